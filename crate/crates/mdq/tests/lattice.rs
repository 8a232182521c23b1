use mdq::harness::stats::{correlation, ks_uniform, mean, variance};
use mdq::lattice::*;
use mdq::MdqError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn errors(q: &DitheredLattice, x: impl Fn(u64) -> f64, n: u64) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|t| {
            let xt = x(t);
            (xt, q.quantize(&[xt], t).unwrap().reproduction[0] - xt)
        })
        .unzip()
}

#[test]
fn error_law_is_uniform_for_a_fixed_input() {
    for (step, x) in [(1.0, 0.3), (2.0, -7.25), (0.01, 1e3)] {
        let q = DitheredLattice::new(1, step, 17, 3).unwrap();
        let (_, e) = errors(&q, |_| x, 200_000);
        let ks = ks_uniform(&e, step / 2.0);
        assert!(ks.p_value > 0.01, "Δ = {step}: {ks:?}");
    }
}

#[test]
fn error_moments_for_a_fixed_input() {
    let q = DitheredLattice::new(1, 1.0, 4, 0).unwrap();
    let (_, e) = errors(&q, |_| 0.7, 1_000_000);
    assert!(mean(&e).abs() < 3.0 / 12f64.sqrt() / 1e3);
    assert!((variance(&e) * 12.0 - 1.0).abs() < 0.01);
}

#[test]
fn error_is_uncorrelated_with_the_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let xs: Vec<f64> = (0..1_000_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let q = DitheredLattice::new(1, 1.5, 8, 1).unwrap();
    let (x, e) = errors(&q, |t| xs[t as usize], xs.len() as u64);
    assert!(correlation(&x, &e).abs() < 0.01);
    assert!((variance(&e) / q.second_moment() - 1.0).abs() < 0.01);
    let ks = ks_uniform(&e, 0.75);
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let a = DitheredLattice::new(1, 1.0, 5, 0).unwrap();
    let b = DitheredLattice::new(1, 1.0, 5, 0).unwrap();
    let c = a.with_stream(1);
    let d = DitheredLattice::new(1, 1.0, 6, 0).unwrap();
    let za: Vec<f64> = (0..100_000).map(|t| a.dither(t)[0]).collect();
    let zb: Vec<f64> = (0..100_000).map(|t| b.dither(t)[0]).collect();
    let zc: Vec<f64> = (0..100_000).map(|t| c.dither(t)[0]).collect();
    let zd: Vec<f64> = (0..100_000).map(|t| d.dither(t)[0]).collect();
    assert_eq!(za, zb);
    assert!(correlation(&za, &zc).abs() < 0.01);
    assert!(correlation(&za, &zd).abs() < 0.01);
    assert!(ks_uniform(&za, 0.5).p_value > 0.01);
}

#[test]
fn two_dimensional_lattice_is_per_axis() {
    let q = DitheredLattice::new(2, 0.5, 3, 2).unwrap();
    assert!((q.second_moment() - 0.25 / 12.0).abs() < 1e-15);
    assert_eq!(q.normalized_second_moment(), 1.0 / 12.0);
    assert!((q.second_moment() - q.normalized_second_moment() * q.cell_volume().powf(1.0)).abs() < 1e-15);
    let mut e0 = Vec::new();
    let mut e1 = Vec::new();
    for t in 0..100_000 {
        let s = q.quantize(&[0.2, -3.1], t).unwrap();
        e0.push(s.reproduction[0] - 0.2);
        e1.push(s.reproduction[1] + 3.1);
    }
    assert!(ks_uniform(&e0, 0.25).p_value > 0.01 && ks_uniform(&e1, 0.25).p_value > 0.01);
    assert!(correlation(&e0, &e1).abs() < 0.01);
    assert!(matches!(q.quantize(&[1.0], 0), Err(MdqError::InvalidParameter(_))));
}

#[test]
fn step_from_noise_variance() {
    for v in [1e-6, 0.111111, 1.0 / 12.0, 3.0] {
        let step = step_for_noise_variance(v).unwrap().unwrap();
        let q = DitheredLattice::new(1, step, 0, 0).unwrap();
        assert!((q.second_moment() - v).abs() <= 1e-15 * v.max(1.0));
    }
    let q = DitheredLattice::for_noise_variance(1, 0.111111, 0, 0).unwrap();
    assert!((q.step() - 1.154700).abs() < 1e-6);
}

proptest! {
    #[test]
    fn shaping_is_scaled_quantization(step in 0.01f64..10.0, a in prop_oneof![-5.0f64..-0.05, 0.05f64..5.0], x in -100.0f64..100.0, t in 0u64..1_000_000) {
        let q = DitheredLattice::new(1, step, 21, 4).unwrap();
        let s = q.shape(a).unwrap();
        prop_assert!((s.step() - a.abs() * step).abs() <= 1e-12 * step);
        prop_assert!((s.second_moment() - a * a * q.second_moment()).abs() <= 1e-12 * s.second_moment());
        let shaped = s.quantize(&[x], t).unwrap();
        let base = q.quantize(&[x / a], t).unwrap();
        prop_assert_eq!(&shaped.index, &base.index);
        prop_assert_eq!(shaped.reproduction[0], a * base.reproduction[0]);
        prop_assert_eq!(shaped.dither[0], a * base.dither[0]);
    }

    #[test]
    fn decoder_rebuilds_from_index(step in 0.01f64..10.0, x in -1e3f64..1e3, t in 0u64..u32::MAX as u64, seed: u64) {
        let q = DitheredLattice::new(1, step, seed, 7).unwrap();
        let s = q.quantize(&[x], t).unwrap();
        prop_assert_eq!(q.reconstruct(&s.index, t).unwrap(), s.reproduction.clone());
        let z = s.dither[0];
        prop_assert!(z > -step / 2.0 && z <= step / 2.0);
        prop_assert!((s.reproduction[0] - (s.index[0] as f64 * step - z)).abs() <= 1e-9 * step.max(x.abs()));
        let e = s.reproduction[0] - x;
        prop_assert!(e.abs() <= step / 2.0 * (1.0 + 1e-9));
    }

    #[test]
    fn forced_dither_matches_direct_rounding(step in 0.01f64..10.0, x in -1e3f64..1e3, u in -0.499f64..0.5) {
        let z = u * step;
        let q = DitheredLattice::new(1, step, 0, 0).unwrap().with_forced_dither(vec![z]).unwrap();
        let s = q.quantize(&[x], 0).unwrap();
        let k = ((x + z) / step - 0.5).ceil();
        prop_assert_eq!(s.index[0], k as i64);
        prop_assert_eq!(s.reproduction[0], k * step - z);
    }
}
