//! Kinematic augmentation and EMA preprocessing properties.

use std::f64::consts::PI;

use aai_core::artic::{augment_kinematics, preprocess_trajectory, ArticulatoryTrajectory};
use ndarray::Array2;
use proptest::prelude::*;

fn trajectory() -> impl Strategy<Value = Array2<f64>> {
    (6usize..80).prop_flat_map(|t| {
        prop::collection::vec(-50.0f64..50.0, t * 12).prop_map(move |v| Array2::from_shape_vec((t, 12), v).unwrap())
    })
}

#[test]
fn circular_motion_speed_matches_closed_form() {
    // x = r cos(wt), y = r sin(wt): the ±2 regression delta of a sinusoid
    // scales it by sum_n 2 n sin(w n) / (2 sum_n n^2), so speed is constant.
    let (r, w, t_len) = (3.0, 2.0 * PI * 4.0 / 100.0, 300);
    let frames = Array2::from_shape_fn((t_len, 12), |(t, c)| {
        let a = (c / 2) as f64;
        let phase = w * t as f64 + a;
        let radius = r * (1.0 + a);
        if c % 2 == 0 {
            radius * phase.cos()
        } else {
            radius * phase.sin()
        }
    });
    let gain = (1..=2).map(|n| 2.0 * n as f64 * (w * n as f64).sin()).sum::<f64>() / 10.0;
    let out = augment_kinematics(&ArticulatoryTrajectory::new(frames).unwrap());
    let f = out.frames();
    for t in 4..t_len - 4 {
        for a in 0..6 {
            let want = r * (1.0 + a as f64) * gain;
            assert!((f[[t, 12 + a]] - want).abs() < 1e-10, "frame {t} articulator {a}");
            assert!(f[[t, 18 + a]].abs() < 1e-10);
        }
    }
}

#[test]
fn preprocessing_halves_rate_and_removes_jitter() {
    let n = 2000;
    let slow = |t: usize| (2.0 * PI * 2.0 * t as f64 / 200.0).sin();
    let jitter = |t: usize| 0.5 * (2.0 * PI * 40.0 * t as f64 / 200.0 + 0.4).sin();
    let raw = Array2::from_shape_fn((n, 12), |(t, c)| slow(t) * (c + 1) as f64 + jitter(t));
    let clean = Array2::from_shape_fn((n, 12), |(t, c)| slow(t) * (c + 1) as f64);
    let a = preprocess_trajectory(&raw).unwrap();
    let b = preprocess_trajectory(&clean).unwrap();
    assert_eq!(a.n_frames(), 1000);
    let inner = 60..940;
    let residual = inner.clone().flat_map(|t| (0..12).map(move |c| (t, c)));
    let err = residual.map(|(t, c)| (a.frames()[[t, c]] - b.frames()[[t, c]]).powi(2)).sum::<f64>();
    let rms = (err / (inner.len() * 12) as f64).sqrt();
    let jitter_rms = 0.5 / 2f64.sqrt();
    assert!(20.0 * (rms / jitter_rms).log10() <= -40.0, "residual {rms}");

    let short = Array2::from_shape_fn((400, 12), |(t, _)| slow(t));
    assert_eq!(preprocess_trajectory(&short).unwrap().n_frames(), 200);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn augmentation_layout(frames in trajectory(), shift in prop::collection::vec(-100.0f64..100.0, 12)) {
        let traj = ArticulatoryTrajectory::new(frames.clone()).unwrap();
        let out = augment_kinematics(&traj);
        prop_assert_eq!(out.frames().ncols(), 24);
        prop_assert_eq!(out.frames().slice(ndarray::s![.., 0..12]), frames.view());
        prop_assert!(out.frames().slice(ndarray::s![.., 12..18]).iter().all(|v| *v >= 0.0));

        let mut moved = frames.clone();
        for (c, mut col) in moved.columns_mut().into_iter().enumerate() {
            col += shift[c];
        }
        let out2 = augment_kinematics(&ArticulatoryTrajectory::new(moved).unwrap());
        let a = out.frames().slice(ndarray::s![.., 12..24]);
        let b = out2.frames().slice(ndarray::s![.., 12..24]);
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
