use mdq::codec::{self, build, encode, CodecKind, Decoder, EstimatorConfig};
use mdq::exec::ExecMode;
use mdq::harness::source::{Family, SourceSpec};
use mdq::harness::stats::{correlation, mse_estimate, second_moments};
use mdq::lattice::scalar_redundancy_bits;
use mdq::region::{test_channel_params, DistortionTriple, RateTarget, SplitSolution, SplitVariance, TestChannel};
use mdq::MdqError;

const N: usize = 1_000_000;

fn running() -> TestChannel {
    let d = DistortionTriple::new(1.0, 0.1, 0.1, 0.05).unwrap();
    test_channel_params(&d).unwrap().active().unwrap()
}

fn source(f: Family, seed: u64) -> Vec<f64> {
    SourceSpec::new(f, seed).generate(N, ExecMode::Parallel).unwrap().x
}

/// Latent model: X, T0, a unit ζ and T3 independent; each variable is a row
/// of loadings on (X, T0, ζ, T3).
struct Latent {
    var: [f64; 4],
}

impl Latent {
    fn new(d1: f64, d2: f64, d3: f64, t3: f64) -> (Self, f64, f64) {
        let t0 = d3 / (1.0 - d3);
        let s1 = (d1 / (1.0 - d1) - t0).sqrt();
        let s2 = (d2 / (1.0 - d2) - t0).sqrt();
        (Self { var: [1.0, t0, 1.0, t3] }, s1, s2)
    }

    fn cov(&self, rows: &[[f64; 4]]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|a| rows.iter().map(|b| (0..4).map(|k| a[k] * b[k] * self.var[k]).sum()).collect())
            .collect()
    }
}

fn max_gap(emp: &[Vec<f64>], th: &[Vec<f64>]) -> f64 {
    emp.iter().flatten().zip(th.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn step_sizes_of_running_successive_codec() {
    let topo = build(CodecKind::Successive, &running(), RateTarget::Vertex(1), 1, 1).unwrap();
    let steps: Vec<f64> = topo.stages.iter().map(|s| s.quantizer.as_ref().unwrap().step()).collect();
    assert!((steps[0] - (12.0f64 * 0.111111).sqrt()).abs() < 1e-5);
    assert!((steps[0] - 1.154700).abs() < 1e-6);
    assert!((steps[1] - 1.153100).abs() < 1e-6);
}

#[test]
fn successive_covariance_matches_for_three_sources() {
    let c = running();
    let topo = build(CodecKind::Successive, &c, RateTarget::Vertex(1), 11, 1).unwrap();
    let (lat, s1, s2) = Latent::new(0.1, 0.1, 0.05, 0.0);
    let th = lat.cov(&[[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, s1, 0.0], [1.0, 1.0, -s2, 0.0]]);
    for (i, f) in [Family::Gaussian, Family::Uniform, Family::Laplacian].into_iter().enumerate() {
        let x = source(f.clone(), 100 + i as u64);
        let enc = encode(&topo, &x, ExecMode::Parallel).unwrap();
        let emp = second_moments(&[&x, &enc.outputs[0], &enc.outputs[1]]);
        let gap = max_gap(&emp, &th);
        assert!(gap < 0.01, "{f:?}: gap {gap}");
        let e1: Vec<f64> = enc.outputs[0].iter().zip(&x).map(|(w, x)| w - x).collect();
        let e2: Vec<f64> = enc.outputs[1].iter().zip(&x).map(|(w, x)| w - x).collect();
        let cross = e1.iter().zip(&e2).map(|(a, b)| a * b).sum::<f64>() / N as f64;
        assert!((cross - (-0.005848)).abs() < 0.003, "{f:?}: E(W1-X)(W2-X) = {cross}");
    }
}

#[test]
fn splitting_covariance_matches_for_three_sources() {
    let c = running();
    let topo = build(CodecKind::Splitting, &c, RateTarget::Balanced, 12, 1).unwrap();
    let t3 = match topo.point.sigma2_t3 {
        SplitVariance::Finite(t) => t,
        SplitVariance::Infinite => panic!("balanced point is interior"),
    };
    let b6 = match c.splitting_coeffs(topo.point.sigma2_t3).unwrap() {
        SplitSolution::Split(s) => s.b_star[5],
        SplitSolution::Successive(_) => unreachable!(),
    };
    let (lat, s1, s2) = Latent::new(0.1, 0.1, 0.05, t3);
    let x_ = [1.0, 0.0, 0.0, 0.0];
    let u1 = [1.0, 1.0, s1, 0.0];
    let u2 = [1.0, 1.0, -s2, 0.0];
    let u2p = [1.0, 1.0, -s2, 1.0];
    let delta: [f64; 4] = std::array::from_fn(|k| u2[k] - b6 * u2p[k]);
    let th = lat.cov(&[x_, u1, u2, u2p, delta]);
    for (i, f) in [Family::Gaussian, Family::Uniform, Family::Laplacian].into_iter().enumerate() {
        let x = source(f.clone(), 200 + i as u64);
        let enc = encode(&topo, &x, ExecMode::Parallel).unwrap();
        let (w1, w2) = codec::description_variables(&topo, &enc);
        let emp = second_moments(&[&x, &w1, &w2, &enc.outputs[0], &enc.outputs[2]]);
        let gap = max_gap(&emp, &th);
        assert!(gap < 0.01, "{f:?}: gap {gap}");
    }
}

#[test]
fn splitting_stage_errors_are_uncorrelated() {
    let c = running();
    let topo = build(CodecKind::Splitting, &c, RateTarget::Balanced, 13, 1).unwrap();
    let x = source(Family::Gaussian, 300);
    let enc = encode(&topo, &x, ExecMode::Parallel).unwrap();
    let mut errs = Vec::new();
    for (k, s) in topo.stages.iter().enumerate() {
        let mut input = vec![0.0; N];
        for t in 0..N {
            input[t] = s.x_tap * x[t] + s.taps.iter().map(|&(j, c)| c * enc.outputs[j][t]).sum::<f64>();
        }
        errs.push(enc.outputs[k].iter().zip(&input).map(|(w, v)| w - v).collect::<Vec<f64>>());
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let r = correlation(&errs[i], &errs[j]);
            assert!(r.abs() <= 0.01, "stages {i},{j}: {r}");
        }
    }
}

#[test]
fn distortions_hit_targets_for_all_topologies() {
    let c = running();
    let harm = DistortionTriple::new(1.0, 0.1, 0.1, 1.0 / 19.0).unwrap();
    let ch = test_channel_params(&harm).unwrap().active().unwrap();
    let cases = [
        (CodecKind::Successive, c, RateTarget::Vertex(1)),
        (CodecKind::Successive, c, RateTarget::Vertex(2)),
        (CodecKind::Splitting, c, RateTarget::Balanced),
        (CodecKind::Reuse, c, RateTarget::Balanced),
        (CodecKind::Separate, ch, RateTarget::Vertex(1)),
    ];
    for (i, (kind, chan, target)) in cases.into_iter().enumerate() {
        let topo = build(kind, &chan, target, 20 + i as u64, 1).unwrap();
        for (j, f) in [Family::Gaussian, Family::Uniform, Family::Laplacian].into_iter().enumerate() {
            let x = source(f.clone(), 400 + 10 * i as u64 + j as u64);
            let enc = encode(&topo, &x, ExecMode::Parallel).unwrap();
            let d = chan.triple;
            let mut seen = Vec::new();
            for (which, want) in [(Decoder::Side1, d.d1), (Decoder::Side2, d.d2), (Decoder::Central, d.d3)] {
                let xh = codec::decode(&topo, &enc.streams, which, ExecMode::Parallel).unwrap();
                let e = mse_estimate(&x, &xh);
                assert!(e.within(want, 3.0), "{kind:?} {f:?} {which:?}: {} ± {} vs {want}", e.mean, e.std_error);
                seen.push(e);
            }
            assert!(seen[2].mean <= seen[0].mean.min(seen[1].mean) + 3.0 * seen[2].std_error);
        }
    }
}

#[test]
fn separate_quantization_errors_are_uncorrelated_at_harmonic_bound() {
    let harm = DistortionTriple::new(1.0, 0.1, 0.1, 1.0 / 19.0).unwrap();
    let ch = test_channel_params(&harm).unwrap().active().unwrap();
    let topo = build(CodecKind::Separate, &ch, RateTarget::Vertex(1), 5, 1).unwrap();
    let x = source(Family::Gaussian, 500);
    let enc = encode(&topo, &x, ExecMode::Parallel).unwrap();
    let e1: Vec<f64> = enc.outputs[0].iter().zip(&x).map(|(w, x)| w - x).collect();
    let e2: Vec<f64> = enc.outputs[1].iter().zip(&x).map(|(w, x)| w - x).collect();
    assert!(correlation(&e1, &e2).abs() <= 0.01);
}

#[test]
fn separate_rejected_off_harmonic_bound() {
    assert!(matches!(
        build(CodecKind::Separate, &running(), RateTarget::Vertex(1), 1, 1),
        Err(MdqError::InvalidParameter(_))
    ));
}

#[test]
fn reuse_streams_identical_to_splitting() {
    let c = running();
    let split = build(CodecKind::Splitting, &c, RateTarget::R1(1.6615), 9, 1).unwrap();
    let reuse = build(CodecKind::Reuse, &c, RateTarget::R1(1.6615), 9, 1).unwrap();
    let steps: Vec<f64> = reuse.stages.iter().filter_map(|s| s.quantizer.as_ref().map(|q| q.step())).collect();
    assert!(steps.iter().all(|&s| s == steps[0]));
    let x = source(Family::Laplacian, 600);
    let a = encode(&split, &x, ExecMode::Parallel).unwrap();
    let b = encode(&reuse, &x, ExecMode::Parallel).unwrap();
    let idx = |e: &codec::Encoded| e.streams.all_streams().map(|s| s.indices.clone()).collect::<Vec<_>>();
    let (ia, ib) = (idx(&a), idx(&b));
    let total: usize = ia.iter().map(|v| v.len()).sum();
    let differ: usize = ia.iter().zip(&ib).map(|(p, q)| p.iter().zip(q).filter(|(u, v)| u != v).count()).sum();
    assert_eq!(differ, 0, "{differ} of {total} indices differ");
    for which in [Decoder::Side1, Decoder::Side2, Decoder::Central] {
        let xa = codec::decode(&split, &a.streams, which, ExecMode::Parallel).unwrap();
        let xb = codec::decode(&reuse, &b.streams, which, ExecMode::Parallel).unwrap();
        let worst = xa.iter().zip(&xb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{which:?}: {worst}");
    }
}

#[test]
fn channel_failure_is_reported_not_fatal() {
    let c = running();
    let topo = build(CodecKind::Splitting, &c, RateTarget::Balanced, 3, 1).unwrap();
    let x = source(Family::Gaussian, 700)[..50_000].to_vec();
    let enc = encode(&topo, &x, ExecMode::Sequential).unwrap();
    let lost = enc.streams.clone().lose(1);
    assert!(matches!(codec::decode(&topo, &lost, Decoder::Side1, ExecMode::Sequential), Err(MdqError::ChannelFailure(1))));
    assert!(matches!(codec::decode(&topo, &lost, Decoder::Central, ExecMode::Sequential), Err(MdqError::ChannelFailure(1))));
    let batch = codec::SimBatch::from_streams(&topo, x, &lost, None, ExecMode::Sequential).unwrap();
    assert!(batch.d1.is_none() && batch.d3.is_none());
    assert!((batch.d2.unwrap() - 0.1).abs() < 0.01);
}

#[test]
fn zero_input_with_zero_dither_gives_zero_streams() {
    let topo = build(CodecKind::Successive, &running(), RateTarget::Vertex(1), 0, 1).unwrap().undithered().unwrap();
    let enc = encode(&topo, &[0.0; 1000], ExecMode::Sequential).unwrap();
    assert!(enc.streams.all_streams().all(|s| s.indices.iter().all(|&k| k == 0)));
    for which in [Decoder::Side1, Decoder::Side2, Decoder::Central] {
        assert!(codec::decode(&topo, &enc.streams, which, ExecMode::Sequential).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn non_finite_sample_is_rejected_at_its_index() {
    let topo = build(CodecKind::Successive, &running(), RateTarget::Vertex(1), 0, 1).unwrap();
    let mut x = vec![0.1; 100];
    x[37] = f64::NAN;
    assert!(matches!(encode(&topo, &x, ExecMode::Sequential), Err(MdqError::NonFinite { t: 37, .. })));
}

#[test]
fn encoding_is_independent_of_execution_mode() {
    let topo = build(CodecKind::Splitting, &running(), RateTarget::Balanced, 4, 1).unwrap();
    let x = source(Family::Uniform, 800)[..200_000].to_vec();
    let a = encode(&topo, &x, ExecMode::Sequential).unwrap();
    let b = encode(&topo, &x, ExecMode::Parallel).unwrap();
    assert_eq!(a.streams, b.streams);
}

#[test]
fn gaussian_rates_within_scalar_budget() {
    let c = running();
    let budget = scalar_redundancy_bits();
    let cfg = EstimatorConfig::default();
    for (kind, target) in [(CodecKind::Successive, RateTarget::Vertex(1)), (CodecKind::Splitting, RateTarget::Balanced)] {
        let topo = build(kind, &c, target, 31, 1).unwrap();
        let x = source(Family::Gaussian, 900);
        let enc = encode(&topo, &x, ExecMode::Parallel).unwrap();
        let r = codec::measure_rate(&topo, &enc.streams, &cfg).unwrap();
        let th = c.rates_at(topo.point.sigma2_t3);
        assert!(r.r1 <= th.r1 + budget + 0.02, "{kind:?}: R1 {} vs {}", r.r1, th.r1);
        let stages2 = topo.stages_of(2).filter(|(_, s)| s.quantizer.is_some()).count() as f64;
        assert!(r.r2 <= th.r2 + stages2 * budget + 0.01 + 0.01 * stages2, "{kind:?}: R2 {} vs {}", r.r2, th.r2);
    }
}

#[test]
fn estimator_refuses_short_streams() {
    let topo = build(CodecKind::Successive, &running(), RateTarget::Vertex(1), 0, 1).unwrap();
    let enc = encode(&topo, &vec![0.3; 1000], ExecMode::Sequential).unwrap();
    assert!(matches!(
        codec::measure_rate(&topo, &enc.streams, &EstimatorConfig::default()),
        Err(MdqError::InsufficientSamples { needed: 100_000, got: 1000 })
    ));
}
