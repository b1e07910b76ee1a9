//! Property tests for the structural invariants.

use proptest::prelude::*;

use pcdiff_core::data::{denormalize, normalize, Dataset, PointCloud};
use pcdiff_core::diffusion::{encode_shape, init_encoder, EncoderConfig};
use pcdiff_core::metrics::{jsd_sets, outlier_trim};
use pcdiff_core::rng::Rng;
use pcdiff_core::tensor::Tensor;

fn arb_cloud(max_points: usize) -> impl Strategy<Value = PointCloud> {
    (1..=max_points, prop::bool::ANY).prop_flat_map(|(n, four_d)| {
        let d = if four_d { 4 } else { 3 };
        prop::collection::vec(-100.0f32..100.0, n * d).prop_map(move |values| {
            PointCloud::new(Tensor::new(vec![n, d], values).unwrap()).unwrap()
        })
    })
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6, 1usize..20, prop::bool::ANY).prop_flat_map(|(events, n, four_d)| {
        let d = if four_d { 4 } else { 3 };
        prop::collection::vec(-50.0f32..50.0, events * n * d).prop_map(move |values| {
            let clouds: Vec<PointCloud> = values
                .chunks(n * d)
                .map(|chunk| {
                    PointCloud::new(Tensor::new(vec![n, d], chunk.to_vec()).unwrap()).unwrap()
                })
                .collect();
            Dataset::new(clouds, "prop").unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_round_trips(ds in arb_dataset()) {
        let (normed, stats) = normalize(&ds).unwrap();
        let back = denormalize(&normed, &stats);
        for (a, b) in ds.events.iter().zip(&back.events) {
            let linf = a.points().max_abs_diff(b.points()).unwrap();
            // Tolerance scales with the coordinate range (values up to 100).
            prop_assert!(linf < 1e-3, "round trip L-inf {linf}");
        }
    }

    #[test]
    fn pcds_round_trips_bit_exact(ds in arb_dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.pcds");
        pcdiff_core::save_pc(&ds, &path).unwrap();
        let back = pcdiff_core::load_pc(&path).unwrap();
        prop_assert_eq!(ds.events.len(), back.events.len());
        for (a, b) in ds.events.iter().zip(&back.events) {
            let lhs: Vec<u32> = a.points().values().iter().map(|v| v.to_bits()).collect();
            let rhs: Vec<u32> = b.points().values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn encoder_invariant_under_permutation(cloud in arb_cloud(24), seed in 0u64..1000) {
        let cfg = EncoderConfig {
            input_dim: cloud.dim(),
            hidden: vec![8, 12],
            latent_dim: 6,
        };
        let mut store = pcdiff_core::ParamStore::new();
        init_encoder(&mut store, &cfg, &mut Rng::new(seed));
        let n = cloud.n_points();
        // Deterministic shuffle of the point order.
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = Rng::new(seed ^ 0xabcd);
        for i in (1..n).rev() {
            let j = rng.below(i + 1);
            perm.swap(i, j);
        }
        let shuffled = cloud.permuted(&perm).unwrap();
        let z1 = encode_shape(&store, &cfg, cloud.points()).unwrap();
        let z2 = encode_shape(&store, &cfg, shuffled.points()).unwrap();
        let b1: Vec<u32> = z1.iter().map(|v| v.to_bits()).collect();
        let b2: Vec<u32> = z2.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(b1, b2);
    }

    #[test]
    fn trim_budget_respected(values in prop::collection::vec(-1e6f64..1e6, 1..200),
                             kf in 0.01f64..=1.0) {
        let (kept, removed) = outlier_trim(&values, kf).unwrap();
        prop_assert_eq!(kept.len() + removed, values.len());
        prop_assert!((removed as f64) <= (1.0 - kf) * values.len() as f64 + 1.0);
        // Kept values appear in original relative order.
        let mut cursor = 0;
        for v in &kept {
            while cursor < values.len() && values[cursor].to_bits() != v.to_bits() {
                cursor += 1;
            }
            prop_assert!(cursor < values.len(), "kept value out of order");
            cursor += 1;
        }
    }

    #[test]
    fn jsd_bounded_and_symmetric(a in arb_dataset(), b in arb_dataset()) {
        // Only compare sets of equal dimension; regenerate mismatches cheaply.
        prop_assume!(a.dim() == b.dim());
        let ab = jsd_sets(&a.events, &b.events, 8).unwrap();
        let ba = jsd_sets(&b.events, &a.events, 8).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
    }
}
