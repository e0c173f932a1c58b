mod common;

use common::*;
use hilbert_fc::nn::{Arch, Model, Tensor};
use hilbert_fc::preprocess::gaussian_smooth;

#[test]
fn pearson_matches_z_score_definition() {
    let run = oracle_pearson(300, 1);
    assert_eq!(run.trials, 300);
    assert!(run.max_abs_err <= 1e-10, "{run:?}");
}

#[test]
fn reho_matches_pairwise_mean() {
    let run = oracle_reho(150, 2);
    assert!(run.max_abs_err <= 1e-10, "{run:?}");
}

#[test]
fn time_average_matches_loop() {
    let run = oracle_time_average(150, 3);
    assert!(run.max_abs_err <= 1e-10, "{run:?}");
}

#[test]
fn smoothing_matches_dense_kernel() {
    let run = oracle_smoothing(120, 4);
    assert!(run.max_abs_err <= 1e-8, "{run:?}");
}

#[test]
fn smoothing_4d_is_per_frame() {
    let mut r = rng(5);
    let v = random_volume(&mut r, [5, 4, 6, 3]);
    let s = gaussian_smooth(&v, 6.0).unwrap();
    for t in 0..3 {
        let dense = smooth_dense(&v.frame_volume(t), 6.0);
        for (a, b) in s.frame(t).iter().zip(dense) {
            assert!((a - b).abs() <= 1e-8);
        }
    }
}

#[test]
fn network_forward_matches_nested_loops() {
    let mut r = rng(6);
    for trial in 0..24 {
        let arch = if trial % 2 == 0 { Arch::Net2 } else { Arch::Net4 };
        let side = 4 + trial % 17;
        let mut m = Model::<f64>::new(arch, side, trial as u64).unwrap();
        let x = uniform_vec(&mut r, side * side, -1.0, 1.0);
        let got = m.forward(&Tensor::new([1, side, side], x.clone()).unwrap()).unwrap();
        let want = forward_naive(&m, &x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{arch} side {side}: {a} vs {b}");
        }
    }
}

#[test]
fn full_size_forward_matches_nested_loops() {
    let mut r = rng(7);
    for arch in [Arch::Net2, Arch::Net4] {
        let mut m = Model::<f64>::new(arch, 90, 11).unwrap();
        let x = uniform_vec(&mut r, 8100, -1.0, 1.0);
        let got = m.forward(&Tensor::new([1, 90, 90], x.clone()).unwrap()).unwrap();
        let want = forward_naive(&m, &x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{arch}: {a} vs {b}");
        }
    }
}
