//! Articulatory channel layout, EMA preprocessing and kinematic augmentation.

use std::fmt;

use ndarray::{s, Array2, Axis};

use crate::dsp::{decimate, design_lowpass_fir, filter_zero_delay};
use crate::error::{AaiError, Result};

/// Position channels per frame.
pub const N_POSITION: usize = 12;
/// Positions plus per-articulator speed and acceleration.
pub const N_AUGMENTED: usize = 24;
pub const RAW_RATE_HZ: f64 = 200.0;
pub const TARGET_RATE_HZ: f64 = 100.0;
pub const SMOOTHING_CUTOFF_HZ: f64 = 25.0;
pub const SMOOTHING_TAPS: usize = 101;
pub const DELTA_WINDOW: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Articulator {
    UpperLip,
    LowerLip,
    Jaw,
    TongueTip,
    TongueBody,
    TongueDorsum,
}

impl Articulator {
    pub const ALL: [Articulator; 6] = [
        Articulator::UpperLip,
        Articulator::LowerLip,
        Articulator::Jaw,
        Articulator::TongueTip,
        Articulator::TongueBody,
        Articulator::TongueDorsum,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            Articulator::UpperLip => "UL",
            Articulator::LowerLip => "LL",
            Articulator::Jaw => "JAW",
            Articulator::TongueTip => "TT",
            Articulator::TongueBody => "TB",
            Articulator::TongueDorsum => "TD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AxisDir {
    X,
    Y,
}

/// One position channel: an articulator along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArticulatorChannel {
    pub articulator: Articulator,
    pub axis: AxisDir,
}

impl ArticulatorChannel {
    /// Canonical order: UL_x, UL_y, LL_x, LL_y, JAW_x, JAW_y, TT_x, TT_y,
    /// TB_x, TB_y, TD_x, TD_y.
    pub fn canonical() -> [ArticulatorChannel; N_POSITION] {
        let mut out = [ArticulatorChannel {
            articulator: Articulator::UpperLip,
            axis: AxisDir::X,
        }; N_POSITION];
        for (i, a) in Articulator::ALL.iter().enumerate() {
            out[2 * i] = ArticulatorChannel { articulator: *a, axis: AxisDir::X };
            out[2 * i + 1] = ArticulatorChannel { articulator: *a, axis: AxisDir::Y };
        }
        out
    }

    pub fn name(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ArticulatorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = match self.axis {
            AxisDir::X => "x",
            AxisDir::Y => "y",
        };
        write!(f, "{}_{}", self.articulator.abbrev(), axis)
    }
}

/// Channel names in canonical order.
pub fn channel_names() -> Vec<String> {
    ArticulatorChannel::canonical().iter().map(|c| c.name()).collect()
}

/// `T × 12` positions at 100 Hz in canonical channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulatoryTrajectory(Array2<f64>);

impl ArticulatoryTrajectory {
    pub fn new(frames: Array2<f64>) -> Result<Self> {
        check_width(&frames, N_POSITION)?;
        check_finite(&frames)?;
        Ok(ArticulatoryTrajectory(frames))
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn n_frames(&self) -> usize {
        self.0.nrows()
    }
}

/// `T × 24`: positions (0..12), speed per articulator (12..18),
/// acceleration per articulator (18..24).
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrajectory(Array2<f64>);

impl AugmentedTrajectory {
    pub fn new(frames: Array2<f64>) -> Result<Self> {
        check_width(&frames, N_AUGMENTED)?;
        check_finite(&frames)?;
        Ok(AugmentedTrajectory(frames))
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.0
    }

    pub fn n_frames(&self) -> usize {
        self.0.nrows()
    }
}

fn check_width(frames: &Array2<f64>, width: usize) -> Result<()> {
    if frames.ncols() != width {
        return Err(AaiError::invalid(format!(
            "expected {width} articulatory columns, got {}",
            frames.ncols()
        )));
    }
    if frames.nrows() == 0 {
        return Err(AaiError::EmptySequence("trajectory has no frames".into()));
    }
    Ok(())
}

fn check_finite(frames: &Array2<f64>) -> Result<()> {
    if let Some(((t, c), _)) = frames.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(AaiError::invalid(format!("non-finite value at frame {t}, channel {c}")));
    }
    Ok(())
}

/// Regression-based delta over a ±`window` neighbourhood, with the first and
/// last frames replicated past the edges.
pub fn regression_delta(x: &Array2<f64>, window: usize) -> Array2<f64> {
    let t_len = x.nrows();
    let mut out = Array2::zeros(x.raw_dim());
    if t_len == 0 || window == 0 {
        return out;
    }
    let denom = 2.0 * (1..=window).map(|n| (n * n) as f64).sum::<f64>();
    let last = t_len as isize - 1;
    let at = |i: isize| i.clamp(0, last) as usize;
    for t in 0..t_len {
        let ti = t as isize;
        let mut row = out.row_mut(t);
        for n in 1..=window {
            let ahead = x.row(at(ti + n as isize));
            let behind = x.row(at(ti - n as isize));
            let w = n as f64 / denom;
            for ((o, a), b) in row.iter_mut().zip(ahead).zip(behind) {
                *o += w * (a - b);
            }
        }
    }
    out
}

/// Appends per-articulator speed (norm of the x/y deltas) and its delta.
pub fn augment_kinematics(traj: &ArticulatoryTrajectory) -> AugmentedTrajectory {
    let pos = traj.frames();
    let t_len = pos.nrows();
    let deltas = regression_delta(pos, DELTA_WINDOW);
    let mut speed = Array2::zeros((t_len, Articulator::ALL.len()));
    for (a, mut col) in speed.axis_iter_mut(Axis(1)).enumerate() {
        for (t, v) in col.iter_mut().enumerate() {
            *v = deltas[[t, 2 * a]].hypot(deltas[[t, 2 * a + 1]]);
        }
    }
    let accel = regression_delta(&speed, DELTA_WINDOW);

    let mut out = Array2::zeros((t_len, N_AUGMENTED));
    out.slice_mut(s![.., 0..12]).assign(pos);
    out.slice_mut(s![.., 12..18]).assign(&speed);
    out.slice_mut(s![.., 18..24]).assign(&accel);
    AugmentedTrajectory(out)
}

/// 200 Hz raw EMA → 100 Hz, then zero-delay 25 Hz low-pass per channel.
pub fn preprocess_trajectory(raw: &Array2<f64>) -> Result<ArticulatoryTrajectory> {
    check_width(raw, N_POSITION)?;
    check_finite(raw)?;
    let out_len = raw.nrows().div_ceil(2);
    if raw.nrows() <= crate::dsp::DECIMATION_TAPS || out_len <= SMOOTHING_TAPS {
        return Err(AaiError::invalid(format!(
            "{} raw frames is too short: need more than {} frames after decimation",
            raw.nrows(),
            SMOOTHING_TAPS
        )));
    }
    let smoother = design_lowpass_fir(SMOOTHING_CUTOFF_HZ, TARGET_RATE_HZ, SMOOTHING_TAPS)?;
    let mut out = Array2::zeros((out_len, N_POSITION));
    for (c, col) in raw.axis_iter(Axis(1)).enumerate() {
        let down = decimate(&col.to_vec(), 2)?;
        let smooth = filter_zero_delay(&down, &smoother)?;
        out.column_mut(c).assign(&ndarray::Array1::from(smooth));
    }
    ArticulatoryTrajectory::new(out)
}
