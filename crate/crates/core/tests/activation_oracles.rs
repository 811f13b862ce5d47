//! Activation and Siegert values against 50-digit reference evaluations,
//! and derivatives against central differences.

use nsp_core::activation::{combined_forward, combined_grad, noisy_softplus, noisy_softplus_grad};
use nsp_core::response::current_stats_to_diffusion;
use nsp_core::{siegert_rate, ActivationKind, CombinedScale, LifParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

include!("common/oracle_tables.rs");

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn noisy_softplus_matches_reference() {
    for &(x, s, k, v, g) in NSP_REF.iter() {
        let got = noisy_softplus(x, s, k);
        assert!(close(got, v, 1e-12), "f({x}, {s}, {k}) = {got}, want {v}");
        let got = noisy_softplus_grad(x, s, k);
        assert!(close(got, g, 1e-12), "f'({x}, {s}, {k}) = {got}, want {g}");
    }
}

#[test]
fn combined_forms_match_reference() {
    let scale = CombinedScale::new(201.0, 5.0).unwrap();
    for &(x, s, k, v, g) in NSP_REF.iter() {
        let kind = ActivationKind::NoisySoftplus { k };
        let y = combined_forward(&kind, x, Some(s), &scale).unwrap();
        assert!(close(y, v * 1.005, 1e-12), "y({x}) = {y}");
        let dy = combined_grad(&kind, x, Some(s), &scale).unwrap();
        assert!(close(dy, g * 1.005, 1e-12), "dy({x}) = {dy}");
        let sp = ActivationKind::Softplus { k, fixed_sigma: s };
        assert!(close(combined_forward(&sp, x, None, &scale).unwrap(), v * 1.005, 1e-12));
    }
}

#[test]
fn siegert_matches_reference() {
    for &(m, s, dt, off, want) in SIEGERT_REF.iter() {
        let p = LifParams::default().with_i_offset(off);
        let got = siegert_rate(&p, current_stats_to_diffusion(m, s, dt, &p)).unwrap();
        assert!(close(got, want, 1e-7), "siegert({m}, {s}, dt {dt}) = {got}, want {want}");
    }
}

#[test]
fn derivatives_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scale = CombinedScale::new(201.0, 5.0).unwrap();
    for _ in 0..1000 {
        let x: f64 = rng.random_range(-2.0..2.0);
        let s: f64 = rng.random_range(0.05..2.0);
        let k: f64 = rng.random_range(0.1..1.0);
        let h = 1e-6;
        let fd = (noisy_softplus(x + h, s, k) - noisy_softplus(x - h, s, k)) / (2.0 * h);
        assert!((fd - noisy_softplus_grad(x, s, k)).abs() < 1e-6, "x {x} s {s} k {k}");
        let kinds = [ActivationKind::NoisySoftplus { k }, ActivationKind::Softplus { k, fixed_sigma: s }];
        for kind in kinds {
            let f = |x| combined_forward(&kind, x, Some(s), &scale).unwrap();
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            assert!((fd - combined_grad(&kind, x, Some(s), &scale).unwrap()).abs() < 1e-6);
        }
        if x.abs() > 1e-3 {
            let relu = ActivationKind::Relu;
            let f = |x| combined_forward(&relu, x, None, &scale).unwrap();
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            assert!((fd - combined_grad(&relu, x, None, &scale).unwrap()).abs() < 1e-6);
        }
    }
}
