use proptest::prelude::*;

use hilbert_fc::experiments::{make_split, TestSize};
use hilbert_fc::features::{correlation_matrix, pearson_spatial, ClassLabel};
use hilbert_fc::hilbert::HilbertCurve;
use hilbert_fc::preprocess::{slice_time_correct, time_average};
use hilbert_fc::synth::{gen_cohort_matrices, SynthSpec};
use hilbert_fc::volume::{read_volume, write_volume, Axis, Volume4D, VolumeFormat};

fn finite_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e4f64..1e4, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curve_round_trip_and_adjacency(order in 1u32..=10, frac in 0.0f64..1.0) {
        let c = HilbertCurve::new(order).unwrap();
        let h = ((c.total_cells() - 1) as f64 * frac) as usize;
        let p = c.index_to_coord(h).unwrap();
        prop_assert!(p.iter().all(|&v| v < c.side()));
        prop_assert_eq!(c.coord_to_index(p).unwrap(), h);
        if h + 1 < c.total_cells() {
            let q = c.index_to_coord(h + 1).unwrap();
            let d: usize = p.iter().zip(&q).map(|(a, b)| a.abs_diff(*b)).sum();
            prop_assert_eq!(d, 1);
        }
    }

    #[test]
    fn pearson_bounded_symmetric_affine(v in finite_vec(12), w in finite_vec(12), a in 0.1f64..10.0, b in -100.0f64..100.0) {
        let r = pearson_spatial(&v, &w).unwrap().value;
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(r, pearson_spatial(&w, &v).unwrap().value);
        let scaled: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        prop_assert!((pearson_spatial(&scaled, &w).unwrap().value - r).abs() < 1e-9);
    }

    #[test]
    fn matrix_invariants(rows in prop::collection::vec(finite_vec(7), 2..9)) {
        let m = correlation_matrix(&rows, "s", ClassLabel::Cn).unwrap();
        prop_assert!(m.check_invariants().is_ok());
    }

    #[test]
    fn split_disjoint_and_balanced(n0 in 10usize..80, n1 in 10usize..80, seed in any::<u64>()) {
        let mut labels = vec![0; n0];
        labels.extend(vec![1; n1]);
        if let Ok(s) = make_split(&labels, TestSize::Fraction(0.2), 0.2, seed) {
            prop_assert_eq!(s.train.len() + s.test.len(), n0 + n1);
            prop_assert!(s.train.iter().all(|i| s.test.binary_search(i).is_err()));
            prop_assert!(s.train_imbalance() <= 0.2);
            prop_assert_eq!(s.test.len(), ((n0 + n1) as f64 * 0.2).ceil() as usize);
        }
    }

    #[test]
    fn constant_series_survive_slice_timing(nx in 1usize..5, ny in 1usize..5, nz in 2usize..7, nt in 2usize..9, c in -1e4f64..1e4) {
        let v = Volume4D::new([nx, ny, nz, nt], [3.0; 3], 2.0, vec![c; nx * ny * nz * nt]).unwrap();
        let out = slice_time_correct(&v, Axis::Z).unwrap();
        prop_assert!(out.data().iter().all(|&x| x == c));
        prop_assert!(time_average(&out).data().iter().all(|&x| (x - c).abs() <= 1e-9 * c.abs().max(1.0)));
    }

    #[test]
    fn volume_files_round_trip(dims in prop::array::uniform4(1usize..5), seed in any::<u64>()) {
        let n: usize = dims.iter().product();
        let data: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 20_000) as f64 * 0.73 - 500.0).collect();
        let v = Volume4D::new(dims, [2.0, 3.0, 4.0], 1.5, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let internal = dir.path().join("v.hfcv");
        write_volume(&v, &internal, VolumeFormat::Internal).unwrap();
        prop_assert_eq!(read_volume(&internal).unwrap(), v.clone());
        let nii = dir.path().join("v.nii");
        write_volume(&v, &nii, VolumeFormat::Nifti).unwrap();
        let back = read_volume(&nii).unwrap();
        prop_assert_eq!(back.dims(), v.dims());
        for (a, b) in back.data().iter().zip(v.data()) {
            prop_assert_eq!(*a, (*b as f32) as f64);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthetic_matrices_valid(seed in any::<u64>(), sep in 0.0f64..=1.0, regions in 2usize..40) {
        let spec = SynthSpec { n_per_class: 3, r_regions: regions, separation: sep, seed, ..SynthSpec::default() };
        for m in gen_cohort_matrices(&spec).unwrap() {
            prop_assert!(m.check_invariants().is_ok());
            prop_assert_eq!(m.size, regions);
        }
    }
}
