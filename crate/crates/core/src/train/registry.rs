use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{AaiError, Result};
use crate::featio::format::write_bytes;

pub const REGISTRY_NAME: &str = "runs.tsv";
const HEADER: &str = "scheme\tscope\tfold\tt_percent\tcheckpoint\treport\tseed\tn_train\tn_val\tn_test\tdisjoint";

/// Sizes of the three utterance sets of a run and whether they are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetAudit {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub disjoint: bool,
}

/// One trained (or evaluated) model. Paths are relative to the runs
/// directory. Wall-clock time goes to the log, never here, so registries are
/// reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: String,
    pub scope: String,
    pub fold: usize,
    pub t_percent: Option<f64>,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
    pub seed: u64,
    pub audit: SetAudit,
}

impl RunRecord {
    fn key(&self) -> (&str, &str, usize, Option<u64>) {
        (&self.scheme, &self.scope, self.fold, self.t_percent.map(f64::to_bits))
    }

    fn to_line(&self) -> String {
        let t = self.t_percent.map_or("-".to_string(), |t| t.to_string());
        format!(
            "{}\t{}\t{}\t{t}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.scheme,
            self.scope,
            self.fold,
            self.checkpoint.display(),
            self.report.display(),
            self.seed,
            self.audit.n_train,
            self.audit.n_val,
            self.audit.n_test,
            self.audit.disjoint
        )
    }

    fn parse(line: &str, path: &Path, lineno: usize) -> Result<Self> {
        let bad = |msg: String| AaiError::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("line {lineno}: {msg}"),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 11 {
            return Err(bad(format!("expected 11 fields, found {}", f.len())));
        }
        let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| bad(format!("bad {what} '{s}'")));
        Ok(RunRecord {
            scheme: f[0].into(),
            scope: f[1].into(),
            fold: num(f[2], "fold")? as usize,
            t_percent: match f[3] {
                "-" => None,
                s => Some(s.parse().map_err(|_| bad(format!("bad t_percent '{s}'")))?),
            },
            checkpoint: f[4].into(),
            report: f[5].into(),
            seed: num(f[6], "seed")?,
            audit: SetAudit {
                n_train: num(f[7], "n_train")? as usize,
                n_val: num(f[8], "n_val")? as usize,
                n_test: num(f[9], "n_test")? as usize,
                disjoint: f[10] == "true",
            },
        })
    }
}

pub fn load_registry(runs_dir: &Path) -> Result<Vec<RunRecord>> {
    let path = runs_dir.join(REGISTRY_NAME);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| AaiError::io(&path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && *l != HEADER)
        .map(|(i, l)| RunRecord::parse(l, &path, i + 1))
        .collect()
}

/// Adds `records`, replacing any existing record with the same
/// (scheme, scope, fold, t).
pub fn update_registry(runs_dir: &Path, records: &[RunRecord]) -> Result<()> {
    let mut all = load_registry(runs_dir)?;
    for r in records {
        match all.iter_mut().find(|x| x.key() == r.key()) {
            Some(slot) => *slot = r.clone(),
            None => all.push(r.clone()),
        }
    }
    let mut text = String::new();
    let _ = writeln!(text, "{HEADER}");
    for r in &all {
        let _ = writeln!(text, "{}", r.to_line());
    }
    write_bytes(&runs_dir.join(REGISTRY_NAME), text.as_bytes())
}
