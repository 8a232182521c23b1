//! The region → codec → measurement pipeline and its reports.

use super::source::{Family, SourceSpec};
use super::stats::{mse_estimate, second_moments, Estimate};
use crate::codec::{build, description_variables, encode, measure_rate, simulate_batch, CodecKind, Decoder, DescriptionStreams, EstimatorConfig, RateEstimate};
use crate::error::{MdqError, Result};
use crate::exec::ExecMode;
use crate::lattice::scalar_redundancy_bits;
use crate::region::{outer_bound_phi, psi, test_channel_params, DistortionTriple, RatePair, RateTarget, SplitVariance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Fewest samples a run may use; rate estimates need this many.
pub const MIN_SAMPLES: usize = 100_000;
/// Allowed rate-estimator slack per quantized stage, bits.
pub const RATE_SLACK: f64 = 0.02;
/// Extra slack for a description coded in two stages, bits.
pub const TWO_STAGE_SLACK: f64 = 0.01;
/// Allowed deviation of any second moment from the test channel.
pub const COVARIANCE_TOL: f64 = 0.01;
/// Distortions must fall within this many standard errors of their targets.
pub const DISTORTION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    /// Distortion targets at the source's own scale.
    pub triple: DistortionTriple,
    pub target: RateTarget,
    pub kind: CodecKind,
    pub n_samples: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Targets at unit variance, where coding happens.
    pub fn unit_triple(&self) -> Result<DistortionTriple> {
        let v = self.triple.var;
        DistortionTriple::new(1.0, self.triple.d1 / v, self.triple.d2 / v, self.triple.d3 / v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theory {
    #[serde(rename = "R1G")]
    pub r1: f64,
    #[serde(rename = "R2G")]
    pub r2: f64,
    pub sum_rate: f64,
    pub psi: f64,
    pub vertex1: RatePair,
    pub vertex2: RatePair,
    pub sigma2_t3: SplitVariance,
    /// `½log₂(2πeG₁)` per quantized stage.
    pub redundancy_per_stage: f64,
    pub budget_r1: f64,
    pub budget_r2: f64,
    /// Outer-bound sum rate from the source's entropy power.
    pub outer_sum_rate: f64,
    pub entropy_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub target: f64,
    pub measured: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub fingerprint: String,
    pub topology_fingerprint: String,
    pub config: ExperimentConfig,
    pub theory: Theory,
    pub rates: RateEstimate,
    pub d1: DistortionReport,
    pub d2: DistortionReport,
    pub d3: DistortionReport,
    /// Empirical minus test-channel second moments of `(X, U₁, U₂)`.
    pub covariance_delta: [[f64; 3]; 3],
    pub rules: Vec<RuleResult>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.rules.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// SHA-256 of the configuration and the wired topology.
fn fingerprint(cfg: &ExperimentConfig, topo_hex: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("plain data serializes"));
    h.update(topo_hex.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Run one configuration end to end.
pub fn run_experiment(cfg: &ExperimentConfig, exec: ExecMode) -> Result<SimReport> {
    if cfg.n_samples < MIN_SAMPLES {
        return Err(MdqError::InsufficientSamples { needed: MIN_SAMPLES, got: cfg.n_samples });
    }
    let unit = cfg.unit_triple()?;
    let channel = test_channel_params(&unit)?.active()?;
    let topo = build(cfg.kind, &channel, cfg.target, cfg.seed, 1)?;
    let point = channel.resolve(cfg.target)?;
    let pair = channel.rates_at(point.sigma2_t3);
    let samples = cfg.source.generate(cfg.n_samples, exec)?;
    let x = samples.x;
    let est = EstimatorConfig::default();
    let enc = encode(&topo, &x, exec)?;
    let rates = measure_rate(&topo, &enc.streams, &est)?;
    let (u1, u2) = description_variables(&topo, &enc);
    let m = second_moments(&[&x, &u1, &u2]);
    let k = channel.covariance_xuu();
    let mut covariance_delta = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance_delta[i][j] = m[i][j] - k[i][j];
        }
    }
    let scale = cfg.triple.var;
    let measure = |which: Decoder| -> Result<Estimate> {
        let xh = crate::codec::decode(&topo, &enc.streams, which, exec)?;
        let e = mse_estimate(&x, &xh);
        Ok(Estimate { mean: e.mean * scale, std_error: e.std_error * scale })
    };
    let (m1, m2, m3) = (measure(Decoder::Side1)?, measure(Decoder::Side2)?, measure(Decoder::Central)?);
    let count = |d: u8| topo.stages_of(d).filter(|(_, s)| s.quantizer.is_some()).count();
    let (k1, k2) = (count(1), count(2));
    let red = scalar_redundancy_bits();
    let slack = |k: usize| if k > 1 { RATE_SLACK + TWO_STAGE_SLACK } else { RATE_SLACK };
    let budget_r1 = pair.r1 + k1 as f64 * red + slack(k1);
    let budget_r2 = pair.r2 + k2 as f64 * red + slack(k2);
    let p_x = samples.entropy_power.min(1.0);
    let (v1, v2) = channel.vertices();
    let theory = Theory {
        r1: pair.r1,
        r2: pair.r2,
        sum_rate: channel.sum_rate(),
        psi: psi(&unit)?,
        vertex1: v1,
        vertex2: v2,
        sigma2_t3: point.sigma2_t3,
        redundancy_per_stage: red,
        budget_r1,
        budget_r2,
        outer_sum_rate: outer_bound_phi(&unit, p_x)?.sum_min,
        entropy_power: p_x,
    };
    let mut rules = Vec::new();
    for (name, est, target) in [("D1", m1, cfg.triple.d1), ("D2", m2, cfg.triple.d2), ("D3", m3, cfg.triple.d3)] {
        rules.push(RuleResult {
            rule: format!("{name} within {DISTORTION_SIGMAS} standard errors"),
            pass: est.within(target, DISTORTION_SIGMAS),
            detail: format!("{:.6} ± {:.6} vs {target:.6}", est.mean, est.std_error),
        });
    }
    rules.push(RuleResult {
        rule: "R1 within budget".into(),
        pass: rates.r1 <= budget_r1,
        detail: format!("{:.5} vs {budget_r1:.5}", rates.r1),
    });
    rules.push(RuleResult {
        rule: "R2 within budget".into(),
        pass: rates.r2 <= budget_r2,
        detail: format!("{:.5} vs {budget_r2:.5}", rates.r2),
    });
    let worst = covariance_delta.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    rules.push(RuleResult {
        rule: "second moments of (X, U1, U2) match".into(),
        pass: worst <= COVARIANCE_TOL,
        detail: format!("max |delta| = {worst:.5}"),
    });
    let topology_fingerprint = topo.fingerprint_hex();
    Ok(SimReport {
        fingerprint: fingerprint(cfg, &topology_fingerprint),
        topology_fingerprint,
        config: cfg.clone(),
        theory,
        rates,
        d1: DistortionReport { target: cfg.triple.d1, measured: Some(m1) },
        d2: DistortionReport { target: cfg.triple.d2, measured: Some(m2) },
        d3: DistortionReport { target: cfg.triple.d3, measured: Some(m3) },
        covariance_delta,
        rules,
    })
}

/// One point of the dominant face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma2_t3: SplitVariance,
    pub r1g: f64,
    pub r2g: f64,
    pub sum: f64,
    pub r1_hat: Option<f64>,
    pub r2_hat: Option<f64>,
}

/// Measurement settings for sweep and trend runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub source: Family,
    pub n_samples: usize,
    pub seed: u64,
}

/// `steps` points from the second vertex to the first, evenly spaced in `R₁`.
pub fn sweep_dominant_face(d: &DistortionTriple, steps: usize, measure: Option<&MeasureSpec>, exec: ExecMode) -> Result<Vec<SweepRow>> {
    if steps < 2 {
        return Err(MdqError::InvalidParameter(format!("a sweep needs at least 2 steps, got {steps}")));
    }
    let c = test_channel_params(d)?.active()?;
    let (v1, v2) = c.vertices();
    let mut out = Vec::with_capacity(steps);
    for i in 0..steps {
        let (target, t3) = if i == 0 {
            (RateTarget::Vertex(2), SplitVariance::Finite(0.0))
        } else if i == steps - 1 {
            (RateTarget::Vertex(1), SplitVariance::Infinite)
        } else {
            let r1 = v2.r1 + (v1.r1 - v2.r1) * i as f64 / (steps - 1) as f64;
            (RateTarget::R1(r1), c.split_sigma_t3(r1)?.sigma2_t3)
        };
        let pair = match target {
            RateTarget::Vertex(1) => v1,
            RateTarget::Vertex(_) => v2,
            _ => c.rates_at(t3),
        };
        let (r1_hat, r2_hat) = match measure {
            None => (None, None),
            Some(m) => {
                let kind = if matches!(target, RateTarget::Vertex(_)) { CodecKind::Successive } else { CodecKind::Splitting };
                let topo = build(kind, &c, target, m.seed, 1)?;
                let x = SourceSpec::new(m.source.clone(), m.seed).generate(m.n_samples, exec)?.x;
                let r = simulate_batch(&topo, x, &EstimatorConfig::default(), exec)?
                    .rates
                    .ok_or(MdqError::InsufficientSamples { needed: MIN_SAMPLES, got: m.n_samples })?;
                (Some(r.r1), Some(r.r2))
            }
        };
        out.push(SweepRow { sigma2_t3: t3, r1g: pair.r1, r2g: pair.r2, sum: pair.r1 + pair.r2, r1_hat, r2_hat });
    }
    Ok(out)
}

/// One distortion scale of the high-resolution trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub scale: f64,
    pub triple: DistortionTriple,
    pub sum_rate_hat: f64,
    pub outer_sum_rate: f64,
    /// Measured sum rate minus the outer-bound sum rate.
    pub excess: f64,
    /// `excess − (3/2)log₂(2πeG₁)`.
    pub residual: f64,
    pub phi: f64,
    pub psi: f64,
}

/// Balanced splitting runs over scaled copies of `d`.
pub fn highres_acceptance(d: &DistortionTriple, scales: &[f64], m: &MeasureSpec, exec: ExecMode) -> Result<Vec<TrendRow>> {
    let samples = SourceSpec::new(m.source.clone(), m.seed).generate(m.n_samples, exec)?;
    let p_x = samples.entropy_power.min(d.var);
    let mut out = Vec::new();
    for &f in scales {
        let t = d.scaled(f)?;
        let c = test_channel_params(&t)?.active()?;
        let topo = build(CodecKind::Splitting, &c, RateTarget::Balanced, m.seed, 1)?;
        let b = simulate_batch(&topo, samples.x.clone(), &EstimatorConfig::default(), exec)?;
        let r = b.rates.ok_or(MdqError::InsufficientSamples { needed: MIN_SAMPLES, got: m.n_samples })?;
        let ob = outer_bound_phi(&t, p_x)?;
        let sum = r.r1 + r.r2;
        out.push(TrendRow {
            scale: f,
            triple: t,
            sum_rate_hat: sum,
            outer_sum_rate: ob.sum_min,
            excess: sum - ob.sum_min,
            residual: sum - ob.sum_min - 3.0 * scalar_redundancy_bits(),
            phi: ob.phi,
            psi: psi(&t)?,
        });
    }
    Ok(out)
}

/// Channel streams of the configuration, as `run_experiment` encodes them.
pub fn encode_experiment(cfg: &ExperimentConfig, exec: ExecMode) -> Result<DescriptionStreams> {
    let channel = test_channel_params(&cfg.unit_triple()?)?.active()?;
    let topo = build(cfg.kind, &channel, cfg.target, cfg.seed, 1)?;
    let x = cfg.source.generate(cfg.n_samples, exec)?.x;
    Ok(encode(&topo, &x, exec)?.streams)
}
