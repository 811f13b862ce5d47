use approx::assert_relative_eq;
use nsp_core::annet::{forward, Architecture, Shape, WeightMeta, WeightStore};
use nsp_core::dataset::{encode_labels, holdout_split, stratified_indices, subsample, Dataset, CLASSES};
use nsp_core::response::current_stats_to_diffusion;
use nsp_core::stimulus::{ensemble_to_stats, stats_to_ensemble, EnsembleLayout};
use nsp_core::{
    noisy_softplus, noisy_softplus_grad, rate_constant_current, siegert_rate, simulate_neuron, ActivationKind,
    CombinedScale, CurrentTrace, Drive, LifParams,
};
use proptest::prelude::*;

fn labelled(labels: Vec<u8>) -> Dataset {
    let images = (0..labels.len()).map(|i| (i % 7) as f64 / 7.0).collect();
    Dataset::new(1, 1, images, labels).unwrap()
}

proptest! {
    #[test]
    fn noisy_softplus_bounds(x in -5.0..5.0f64, s in 0.0..3.0f64, k in 0.05..1.0f64) {
        let f = noisy_softplus(x, s, k);
        prop_assert!(f >= x.max(0.0) - 1e-12);
        prop_assert!(f <= x.max(0.0) + k * s * core::f64::consts::LN_2 + 1e-12);
        let g = noisy_softplus_grad(x, s, k);
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn noisy_softplus_monotone(x in -3.0..3.0f64, dx in 0.0..1.0f64, s in 0.01..2.0f64, ds in 0.0..1.0f64, k in 0.05..1.0f64) {
        prop_assert!(noisy_softplus(x + dx, s, k) >= noisy_softplus(x, s, k));
        // more noise never lowers the response
        prop_assert!(noisy_softplus(x, s + ds, k) >= noisy_softplus(x, s, k) - 1e-15);
    }

    #[test]
    fn label_rows_sum(labels in prop::collection::vec(0u8..10, 1..40), offset in 0.0..0.1f64) {
        for row in encode_labels(&labels, offset).unwrap() {
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0 + CLASSES as f64 * offset, epsilon = 1e-12);
            let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min, offset);
        }
    }

    #[test]
    fn stratified_sample_is_balanced(per_class in 5usize..30, n_frac in 0.0..1.0f64, seed in any::<u64>()) {
        let labels: Vec<u8> = (0..CLASSES * per_class).map(|i| (i % CLASSES) as u8).collect();
        let n = (n_frac * labels.len() as f64) as usize;
        let idx = stratified_indices(&labels, n, seed).unwrap();
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(&idx, &stratified_indices(&labels, n, seed).unwrap());
        let ds = labelled(labels).select(&idx).unwrap();
        for c in ds.class_counts() {
            prop_assert!((c as f64 - n as f64 / CLASSES as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn holdout_partitions(per_class in 3usize..20, hold in 0usize..30, seed in any::<u64>()) {
        let labels: Vec<u8> = (0..CLASSES * per_class).map(|i| ((i * 7) % CLASSES) as u8).collect();
        let ds = labelled(labels);
        let hold = hold.min(ds.len());
        let (train, test) = holdout_split(&ds, hold, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), ds.len());
        prop_assert_eq!(test, subsample(&ds, hold, seed).unwrap());
        let mut counts = train.class_counts();
        for (c, t) in counts.iter_mut().zip(subsample(&ds, hold, seed).unwrap().class_counts()) {
            *c += t;
        }
        prop_assert_eq!(counts, ds.class_counts());
    }

    #[test]
    fn ensemble_reproduces_target_stats(m in -0.5..1.0f64, s in 0.1..1.5f64, tau in 1.0..10.0f64) {
        // w = s/4 is feasible while s^2 >= |m|·w/2
        prop_assume!(s >= m.abs() / 8.0);
        let layout = EnsembleLayout::balanced(s / 4.0, 1000.0, 0);
        let spec = stats_to_ensemble(m, s, tau, &layout).unwrap();
        prop_assert!(spec.rates.iter().all(|&r| r >= 0.0));
        let st = ensemble_to_stats(&spec, tau);
        assert_relative_eq!(st.mean, m, epsilon = 1e-9);
        assert_relative_eq!(st.var, s * s, max_relative = 1e-9);
    }

    #[test]
    fn constant_current_rate_monotone(i in 0.0..2.0f64, di in 0.0..0.5f64) {
        let p = LifParams::default();
        prop_assert!(rate_constant_current(&p, i + di) >= rate_constant_current(&p, i));
        prop_assert!(rate_constant_current(&p, i) < 1000.0 / p.tau_refrac);
    }

    #[test]
    fn siegert_monotone_in_mean(m in -0.5..1.0f64, dm in 0.01..0.3f64, s in 0.1..1.5f64) {
        let p = LifParams::default();
        let lo = siegert_rate(&p, current_stats_to_diffusion(m, s, 1.0, &p)).unwrap();
        let hi = siegert_rate(&p, current_stats_to_diffusion(m + dm, s, 1.0, &p)).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-7));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refractory_period_respected(i in 0.1..5.0f64, tref in 0.5..3.0f64, dt in prop::sample::select(vec![0.1, 0.5, 1.0])) {
        let p = LifParams { tau_refrac: tref, ..LifParams::default() };
        let trace = CurrentTrace::constant(i, 500.0, dt).unwrap();
        let sim = simulate_neuron(&p, Drive::Current(&trace), 500.0, dt, false).unwrap();
        if let Some(isi) = sim.spikes.min_interval() {
            prop_assert!(isi >= tref - 1e-9, "isi {} < {}", isi, tref);
        }
    }

    #[test]
    fn relu_network_is_positively_homogeneous(seed in 0u64..100, c in 0.1..4.0f64) {
        let meta = WeightMeta { scale: CombinedScale::new(201.0, 5.0).unwrap(), input_rate: 100.0, init_seed: 0, stages: Vec::new() };
        let arch = Architecture::parse(Shape::new(1, 6, 6), "2c3-2s-3fc").unwrap();
        let store = WeightStore::glorot(arch, meta, seed).unwrap();
        let x: Vec<f64> = (0..36).map(|i| ((i * 13 + seed as usize) % 10) as f64 / 10.0).collect();
        let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
        let y = forward(&store, &x, &ActivationKind::Relu).unwrap();
        let cy = forward(&store, &cx, &ActivationKind::Relu).unwrap();
        for (a, b) in y.last().unwrap().y.iter().zip(&cy.last().unwrap().y) {
            assert_relative_eq!(a * c, *b, epsilon = 1e-12, max_relative = 1e-12);
        }
    }
}
