//! Pearson-correlation scoring, aggregation and report output.
//!
//! Aggregation conventions, stated once here and in every rendered table:
//! an utterance's score is the mean of its defined channel CCs; a group's
//! mean is the mean over utterances within each fold, then over folds; the
//! standard deviation is the population standard deviation of utterance
//! scores pooled over folds. Channels whose prediction or truth is constant
//! have no CC; they are excluded and counted as undefined.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::artic::{channel_names, N_POSITION};
use crate::error::{AaiError, Result};
use crate::featio::format::{read_bytes, write_bytes};

/// Standard deviations at or below this make a CC undefined.
pub const CC_STD_FLOOR: f64 = 1e-12;

pub const STD_CONVENTION: &str = "std: population std of per-utterance articulator-averaged CC, pooled over folds; \
mean: over utterances within each fold, then over folds; undefined (constant) channels excluded";

/// Pearson correlation, or `None` when either input is (numerically) constant.
pub fn pearson_cc(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(AaiError::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(AaiError::invalid(format!(
            "need at least 2 samples, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let (sx, sy) = ((sxx / n).sqrt(), (syy / n).sqrt());
    if sx <= CC_STD_FLOOR || sy <= CC_STD_FLOOR {
        return Ok(None);
    }
    // sqrt(s * s) == s exactly, so identical inputs give exactly 1.
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// CC on each of the 12 position channels. Columns past 12 are ignored.
pub fn score_utterance(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<[Option<f64>; N_POSITION]> {
    if pred.nrows() != truth.nrows() {
        return Err(AaiError::invalid(format!(
            "frame mismatch: {} predicted vs {} reference",
            pred.nrows(),
            truth.nrows()
        )));
    }
    if pred.ncols() < N_POSITION || truth.ncols() < N_POSITION {
        return Err(AaiError::invalid(format!(
            "need at least {N_POSITION} channels, got {} and {}",
            pred.ncols(),
            truth.ncols()
        )));
    }
    let mut out = [None; N_POSITION];
    for (c, slot) in out.iter_mut().enumerate() {
        let p = pred.column(c).to_vec();
        let t = truth.column(c).to_vec();
        *slot = pearson_cc(&p, &t)?;
    }
    Ok(out)
}

/// `100 · (candidate − baseline) / baseline`.
pub fn relative_improvement(candidate: f64, baseline: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(AaiError::invalid("baseline is zero"));
    }
    Ok(100.0 * (candidate - baseline) / baseline)
}

/// Table cell: mean and standard deviation to four decimals.
pub fn format_cell(mean: f64, std: f64) -> String {
    format!("{mean:.4} ({std:.4})")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub utterance_id: String,
    pub subject_id: String,
    pub group: String,
    /// Canonical channel order; `None` = undefined.
    pub cc: Vec<Option<f64>>,
}

impl UtteranceScore {
    /// Mean over defined channels.
    pub fn mean_cc(&self) -> Option<f64> {
        let defined: Vec<f64> = self.cc.iter().flatten().copied().collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }

    pub fn undefined(&self) -> usize {
        self.cc.iter().filter(|c| c.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub feature_tag: String,
    pub scheme: String,
    /// Subjects the model was trained on / adapted to.
    pub scope: String,
    pub fold: usize,
    /// Held-out subject for unseen and adaptation runs.
    pub target_subject: Option<String>,
    pub t_percent: Option<f64>,
}

/// Per-utterance CCs of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub utterances: Vec<UtteranceScore>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AaiError::Format {
            path: "<report>".into(),
            offset: 0,
            msg: e.to_string(),
        })
    }

    /// Tab-separated per-utterance table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("utterance_id\tsubject_id\tgroup");
        for name in channel_names() {
            out.push('\t');
            out.push_str(&name);
        }
        out.push_str("\tmean_cc\tundefined\n");
        for u in &self.utterances {
            let _ = write!(out, "{}\t{}\t{}", u.utterance_id, u.subject_id, u.group);
            for c in &u.cc {
                match c {
                    Some(v) => {
                        let _ = write!(out, "\t{v:.6}");
                    }
                    None => out.push_str("\tNA"),
                }
            }
            match u.mean_cc() {
                Some(m) => {
                    let _ = writeln!(out, "\t{m:.6}\t{}", u.undefined());
                }
                None => {
                    let _ = writeln!(out, "\tNA\t{}", u.undefined());
                }
            }
        }
        out
    }

    /// Writes `<stem>.json` (machine-readable) and `<stem>.tsv`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        write_bytes(&dir.join(format!("{stem}.json")), self.to_json().as_bytes())?;
        write_bytes(&dir.join(format!("{stem}.tsv")), self.to_tsv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|_| AaiError::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: "report is not UTF-8".into(),
        })?;
        serde_json::from_str(&text).map_err(|e| AaiError::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: e.to_string(),
        })
    }

    /// Keeps only the listed utterances.
    pub fn restricted_to(&self, ids: &[String]) -> EvalReport {
        EvalReport {
            meta: self.meta.clone(),
            utterances: self
                .utterances
                .iter()
                .filter(|u| ids.contains(&u.utterance_id))
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Overall,
    ByGroup,
    BySubject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: String,
    pub mean: f64,
    pub std: f64,
    pub n_utterances: usize,
    pub n_folds: usize,
    pub undefined: usize,
}

impl SummaryRow {
    pub fn cell(&self) -> String {
        format_cell(self.mean, self.std)
    }
}

fn key_of(u: &UtteranceScore, grouping: Grouping) -> String {
    match grouping {
        Grouping::Overall => "all".into(),
        Grouping::ByGroup => u.group.clone(),
        Grouping::BySubject => u.subject_id.clone(),
    }
}

/// Mean and population std over utterances and folds, per key.
///
/// Reports are processed in (fold, scope) order and utterances in id order,
/// so the result does not depend on input order.
pub fn aggregate(reports: &[EvalReport], grouping: Grouping) -> Result<Vec<SummaryRow>> {
    if reports.is_empty() {
        return Err(AaiError::invalid("no reports to aggregate"));
    }
    let mut ordered: Vec<&EvalReport> = reports.iter().collect();
    ordered.sort_by(|a, b| {
        (a.meta.fold, &a.meta.scope, &a.meta.target_subject).cmp(&(b.meta.fold, &b.meta.scope, &b.meta.target_subject))
    });

    #[derive(Default)]
    struct Acc {
        fold_means: Vec<f64>,
        pooled: Vec<f64>,
        undefined: usize,
    }
    let mut acc: BTreeMap<String, Acc> = BTreeMap::new();
    for r in ordered {
        let mut utts: Vec<&UtteranceScore> = r.utterances.iter().collect();
        utts.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
        let mut per_key: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for u in utts {
            let key = key_of(u, grouping);
            let a = acc.entry(key.clone()).or_default();
            a.undefined += u.undefined();
            if let Some(m) = u.mean_cc() {
                per_key.entry(key).or_default().push(m);
            }
        }
        for (key, vals) in per_key {
            let a = acc.get_mut(&key).expect("inserted above");
            a.fold_means.push(vals.iter().sum::<f64>() / vals.len() as f64);
            a.pooled.extend(vals);
        }
    }

    let rows: Vec<SummaryRow> = acc
        .into_iter()
        .filter(|(_, a)| !a.pooled.is_empty())
        .map(|(key, a)| {
            let mean = a.fold_means.iter().sum::<f64>() / a.fold_means.len() as f64;
            let n = a.pooled.len() as f64;
            let pooled_mean = a.pooled.iter().sum::<f64>() / n;
            let var = a.pooled.iter().map(|v| (v - pooled_mean).powi(2)).sum::<f64>() / n;
            SummaryRow {
                key,
                mean,
                std: var.sqrt(),
                n_utterances: a.pooled.len(),
                n_folds: a.fold_means.len(),
                undefined: a.undefined,
            }
        })
        .collect();
    if rows.is_empty() {
        return Err(AaiError::invalid("no defined CC values in the reports"));
    }
    Ok(rows)
}

/// Mean CC per position channel over every utterance (defined values only).
pub fn per_articulator(reports: &[EvalReport]) -> Vec<(String, Option<f64>)> {
    let names = channel_names();
    let mut sums = vec![(0.0, 0usize); N_POSITION];
    for r in reports {
        for u in &r.utterances {
            for (c, v) in u.cc.iter().enumerate().take(N_POSITION) {
                if let Some(v) = v {
                    sums[c].0 += v;
                    sums[c].1 += 1;
                }
            }
        }
    }
    names
        .into_iter()
        .zip(sums)
        .map(|(n, (s, k))| (n, if k == 0 { None } else { Some(s / k as f64) }))
        .collect()
}

fn group_label(key: &str) -> &str {
    match key {
        "healthy" => "Healthy Controls",
        "patient" => "Patients",
        other => other,
    }
}

/// Renders summary tables: by group (healthy controls vs patients) and by
/// subject, one row per (feature, scheme), plus the per-articulator means.
pub fn render_tables(reports: &[EvalReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(AaiError::EmptyResult("no reports found".into()));
    }
    let mut by_run: BTreeMap<(String, String), Vec<EvalReport>> = BTreeMap::new();
    for r in reports {
        let scheme = match r.meta.t_percent {
            Some(t) => format!("{}@t{t}", r.meta.scheme),
            None => r.meta.scheme.clone(),
        };
        by_run
            .entry((r.meta.feature_tag.clone(), scheme))
            .or_default()
            .push(r.clone());
    }

    let mut out = String::new();
    for (title, grouping) in [("by group", Grouping::ByGroup), ("by subject", Grouping::BySubject)] {
        let mut columns: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for ((feature, scheme), rs) in &by_run {
            let summary = aggregate(rs, grouping)?;
            for s in &summary {
                if !columns.contains(&s.key) {
                    columns.push(s.key.clone());
                }
            }
            rows.push((feature.clone(), scheme.clone(), summary));
        }
        if grouping == Grouping::ByGroup {
            columns.sort_by_key(|k| match k.as_str() {
                "healthy" => 0,
                "patient" => 1,
                _ => 2,
            });
        } else {
            columns.sort();
        }
        let _ = writeln!(out, "# Average CC (standard deviation), {title}");
        out.push_str("feature\tscheme");
        for c in &columns {
            let _ = write!(out, "\t{}", group_label(c));
        }
        out.push('\n');
        for (feature, scheme, summary) in rows {
            let _ = write!(out, "{feature}\t{scheme}");
            for c in &columns {
                match summary.iter().find(|s| &s.key == c) {
                    Some(s) => {
                        let _ = write!(out, "\t{}", s.cell());
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }

    let _ = writeln!(out, "# Mean CC per articulator");
    out.push_str("feature\tscheme");
    for n in channel_names() {
        let _ = write!(out, "\t{n}");
    }
    out.push('\n');
    for ((feature, scheme), rs) in &by_run {
        let _ = write!(out, "{feature}\t{scheme}");
        for (_, v) in per_articulator(rs) {
            match v {
                Some(v) => {
                    let _ = write!(out, "\t{v:.4}");
                }
                None => out.push_str("\tNA"),
            }
        }
        out.push('\n');
    }
    let undefined: usize = reports
        .iter()
        .flat_map(|r| r.utterances.iter())
        .map(UtteranceScore::undefined)
        .sum();
    let _ = writeln!(out, "\n# {STD_CONVENTION}");
    let _ = writeln!(out, "# undefined channel CCs: {undefined}");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    AdaptationCurve,
    ArticulatorBox,
}

/// Tab-separated plot data with a header row.
///
/// `AdaptationCurve`: one row per (subject, feature, t) with mean and std CC
/// from runs that carry an adaptation percentage. `ArticulatorBox`: one row
/// per (channel, feature, utterance) CC.
pub fn emit_plot_data(reports: &[EvalReport], kind: PlotKind) -> Result<String> {
    match kind {
        PlotKind::AdaptationCurve => {
            let mut groups: BTreeMap<(String, String), BTreeMap<u64, Vec<EvalReport>>> = BTreeMap::new();
            for r in reports {
                let (Some(t), Some(subject)) = (r.meta.t_percent, r.meta.target_subject.clone()) else {
                    continue;
                };
                groups
                    .entry((subject, r.meta.feature_tag.clone()))
                    .or_default()
                    .entry(t.to_bits())
                    .or_default()
                    .push(r.clone());
            }
            if groups.is_empty() {
                return Err(AaiError::EmptyResult(
                    "no adaptation runs (reports with t_percent) found".into(),
                ));
            }
            let mut out = String::from("subject\tfeature\tt_percent\tmean_cc\tstd\tn_utterances\n");
            for ((subject, feature), by_t) in groups {
                let mut ts: Vec<(f64, Vec<EvalReport>)> =
                    by_t.into_iter().map(|(bits, rs)| (f64::from_bits(bits), rs)).collect();
                ts.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (t, rs) in ts {
                    let row = aggregate(&rs, Grouping::Overall)?;
                    let r = &row[0];
                    let _ = writeln!(
                        out,
                        "{subject}\t{feature}\t{t}\t{:.6}\t{:.6}\t{}",
                        r.mean, r.std, r.n_utterances
                    );
                }
            }
            Ok(out)
        }
        PlotKind::ArticulatorBox => {
            let names = channel_names();
            let mut rows: Vec<(usize, String, String, String, f64)> = Vec::new();
            for r in reports {
                for u in &r.utterances {
                    for (c, v) in u.cc.iter().enumerate().take(N_POSITION) {
                        if let Some(v) = v {
                            rows.push((
                                c,
                                r.meta.feature_tag.clone(),
                                r.meta.scheme.clone(),
                                format!("{}/f{}", u.utterance_id, r.meta.fold),
                                *v,
                            ));
                        }
                    }
                }
            }
            if rows.is_empty() {
                return Err(AaiError::EmptyResult("no defined CC values found".into()));
            }
            rows.sort_by(|a, b| (a.0, &a.1, &a.2, &a.3).cmp(&(b.0, &b.1, &b.2, &b.3)));
            let mut out = String::from("channel\tfeature\tscheme\tutterance\tcc\n");
            for (c, feature, scheme, utt, v) in rows {
                let _ = writeln!(out, "{}\t{feature}\t{scheme}\t{utt}\t{v:.6}", names[c]);
            }
            Ok(out)
        }
    }
}
