use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mdq::codec::{stream, CodecKind};
use mdq::exec::ExecMode;
use mdq::geometry::{cell_rows, scalar_analysis, B5Choice, Reproduction, ScalarCase, ScalarOptions, ScalarReport, TapChoice};
use mdq::harness::experiment::{RuleResult, DISTORTION_SIGMAS};
use mdq::harness::source::{Family, SourceSpec};
use mdq::harness::{encode_experiment, run_experiment, sweep_dominant_face, ExperimentConfig, MeasureSpec, SweepRow};
use mdq::lattice::scalar_redundancy_bits;
use mdq::region::{clamp_degenerate, param_report, psi, vertices, DistortionTriple, RateTarget, SplitVariance};
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

macro_rules! emitln {
    ($($t:tt)*) => {
        emit(&format!($($t)*))?
    };
}

#[derive(Parser)]
#[command(name = "mdq", version, about = "Multiple-description quantization: region, codecs and scalar geometry")]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rate region of a distortion triple.
    Region {
        #[command(flatten)]
        triple: Triple,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Every closed-form parameter at one operating point, as JSON.
    Params {
        #[command(flatten)]
        triple: Triple,
        #[command(flatten)]
        target: Target,
    },
    /// Encode a sample stream, measure rates and distortions, print a JSON report.
    Simulate(Simulate),
    /// Cell-level analysis of the scalar staircase schemes, as JSON.
    ScalarAnalysis(ScalarArgs),
    /// Dominant-face table as CSV.
    Sweep(Sweep),
}

#[derive(Args, Clone, Copy)]
struct Triple {
    #[arg(long, default_value_t = 1.0)]
    var: f64,
    #[arg(long, default_value_t = 0.1)]
    d1: f64,
    #[arg(long, default_value_t = 0.1)]
    d2: f64,
    #[arg(long, default_value_t = 0.05)]
    d3: f64,
}

impl Triple {
    fn get(self) -> Result<DistortionTriple> {
        Ok(DistortionTriple::new(self.var, self.d1, self.d2, self.d3)?)
    }
}

#[derive(Args, Clone, Copy)]
#[group(required = true, multiple = false)]
struct Target {
    /// Description-1 rate on the dominant face, bits.
    #[arg(long)]
    r1: Option<f64>,
    /// Equal description rates.
    #[arg(long)]
    balanced: bool,
    /// One of the two corner points.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    vertex: Option<u8>,
}

impl Target {
    fn get(self) -> RateTarget {
        match (self.r1, self.vertex) {
            (Some(r), _) => RateTarget::R1(r),
            (_, Some(v)) => RateTarget::Vertex(v),
            _ => RateTarget::Balanced,
        }
    }
}

#[derive(Args)]
struct Simulate {
    /// gaussian, uniform, laplacian or file:PATH (little-endian f64).
    #[arg(long, default_value = "gaussian")]
    source: String,
    /// successive, splitting, separate or reuse.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1_000_000)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    triple: Triple,
    /// Write rate, distortion and per-stage rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the binary description streams.
    #[arg(long)]
    streams: Option<PathBuf>,
    /// Exit nonzero when any rule fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ScalarArgs {
    /// fig8a (staggered), fig8b (fine step) or balanced.
    #[arg(long)]
    mode: String,
    /// Design rate, bits.
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 1.0)]
    var: f64,
    /// midpoint or centroid.
    #[arg(long, default_value = "midpoint")]
    reproduction: String,
    /// Rate of the first quantizer in the balanced scheme; half the rate by default.
    #[arg(long)]
    r1a: Option<f64>,
    /// Fit the balancing tap to the exact integrals.
    #[arg(long)]
    calibrated_tap: bool,
    /// Use the fixed refinement tap instead of the fitted one.
    #[arg(long)]
    nominal_b5: bool,
    /// Step ratio of the fine-step scheme.
    #[arg(long, default_value_t = mdq::geometry::cases::FINE_RATIO)]
    ratio: f64,
    /// Write one row per cell.
    #[arg(long)]
    cells_csv: Option<PathBuf>,
    /// Exit nonzero when any rule fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct Sweep {
    /// Number of rows from one vertex to the other, inclusive.
    #[arg(long)]
    steps: usize,
    #[command(flatten)]
    triple: Triple,
    /// Measure rates at every row with this source.
    #[arg(long)]
    source: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero when any rule fails.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { ExecMode::Sequential } else { ExecMode::Parallel };
    match run(cli.cmd, exec) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every checked rule passed.
fn run(cmd: Cmd, exec: ExecMode) -> Result<bool> {
    match cmd {
        Cmd::Region { triple, json } => region(triple.get()?, json),
        Cmd::Params { triple, target } => {
            emit(&serde_json::to_string_pretty(&param_report(&triple.get()?, target.get())?)?)?;
            Ok(true)
        }
        Cmd::Simulate(s) => simulate(s, exec),
        Cmd::ScalarAnalysis(a) => scalar(a, exec),
        Cmd::Sweep(s) => sweep(s, exec),
    }
}

fn region(d: DistortionTriple, as_json: bool) -> Result<bool> {
    let c = clamp_degenerate(d)?;
    let (v1, v2) = vertices(&c.triple)?;
    let p = psi(&c.triple)?;
    let params = param_report(&c.triple, RateTarget::Balanced).ok();
    if as_json {
        let out = json!({
            "triple": c.triple,
            "clamp": c.flag,
            "psi": p,
            "sum_rate": v1.sum(),
            "vertex1": v1,
            "vertex2": v2,
            "params": params,
        });
        emit(&serde_json::to_string_pretty(&out)?)?;
    } else {
        emitln!("var {} D1 {} D2 {} D3 {} ({:?})", c.triple.var, c.triple.d1, c.triple.d2, c.triple.d3, c.flag);
        emitln!("psi       {p:.6}");
        emitln!("sum rate  {:.6}", v1.sum());
        emitln!("vertex 1  ({:.6}, {:.6})", v1.r1, v1.r2);
        emitln!("vertex 2  ({:.6}, {:.6})", v2.r1, v2.r2);
        if let Some(p) = params {
            emitln!("balanced  sigma2_T3 = {}", fmt_t3(p.t3));
        }
    }
    Ok(true)
}

fn simulate(s: Simulate, exec: ExecMode) -> Result<bool> {
    let family: Family = s.source.parse()?;
    let triple = s.triple.get()?;
    let mut source = SourceSpec::new(family, s.seed);
    source.variance = triple.var;
    let cfg = ExperimentConfig {
        source,
        triple,
        target: s.target.get(),
        kind: s.kind.parse::<CodecKind>()?,
        n_samples: s.n_samples,
        seed: s.seed,
    };
    let report = run_experiment(&cfg, exec)?;
    if let Some(path) = &s.csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["quantity", "measured", "tolerance", "target", "bound"])?;
        let r = &report.rates;
        let t = &report.theory;
        let f = |v: f64| v.to_string();
        w.write_record(["R1", &f(r.r1), &f(r.tolerance), &f(t.r1), &f(t.budget_r1)])?;
        w.write_record(["R2", &f(r.r2), &f(r.tolerance), &f(t.r2), &f(t.budget_r2)])?;
        if let Some(j) = r.r2_joint {
            w.write_record(["R2_joint", &f(j), &f(r.tolerance), &f(t.r2), &f(t.budget_r2)])?;
        }
        for (name, d) in [("D1", &report.d1), ("D2", &report.d2), ("D3", &report.d3)] {
            if let Some(e) = d.measured {
                w.write_record([name, &f(e.mean), &f(e.std_error), &f(d.target), &f(DISTORTION_SIGMAS * e.std_error)])?;
            }
        }
        for &(k, desc, bits) in &r.stages {
            w.write_record([format!("stage{k}_desc{desc}"), f(bits), f(r.tolerance), String::new(), String::new()])?;
        }
        w.flush()?;
    }
    if let Some(path) = &s.streams {
        let streams = encode_experiment(&cfg, exec)?;
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
        stream::write_to(&mut file, &streams)?;
        file.flush()?;
    }
    report_rules(&report.rules);
    emit(&report.to_json())?;
    Ok(!s.check || report.passed())
}

fn scalar_rules(r: &ScalarReport) -> Vec<RuleResult> {
    let near = |rule: &str, v: f64, target: f64, tol: f64| RuleResult {
        rule: rule.into(),
        pass: (v - target).abs() <= tol,
        detail: format!("{v:.6} vs {target} ± {tol}"),
    };
    match r.case {
        ScalarCase::Staggered => vec![near("D3/D1", r.d3_over_d1, 0.25, 0.05)],
        ScalarCase::FineStep => vec![
            near("D2/D1 over non-border cells", r.d2_over_d1_border_excluded, 0.75, 0.05),
            RuleResult {
                rule: "step ratio at least 64".into(),
                pass: r.ratio >= 64.0,
                detail: format!("{}", r.ratio),
            },
        ],
        ScalarCase::Balanced => vec![
            near("D2/D1", r.d2_over_d1, 1.0, 0.05),
            near("distortion-product gap, dB", r.gap.design, r.predicted.gap_db, 0.05),
        ],
    }
}

fn scalar(a: ScalarArgs, exec: ExecMode) -> Result<bool> {
    let case: ScalarCase = a.mode.parse()?;
    let opts = ScalarOptions {
        reproduction: a.reproduction.parse::<Reproduction>()?,
        r1a: a.r1a,
        tap: if a.calibrated_tap { TapChoice::Calibrated } else { TapChoice::Asymptotic },
        b5: if a.nominal_b5 { B5Choice::Nominal } else { B5Choice::Refined },
        ratio: a.ratio,
        exec,
        ..ScalarOptions::default()
    };
    let (cells, report) = scalar_analysis(case, a.rate, a.var, &opts)?;
    let rules = scalar_rules(&report);
    let mut out = serde_json::to_value(&report)?;
    out["rules"] = serde_json::to_value(&rules)?;
    if let Some(path) = &a.cells_csv {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        for row in cell_rows(&cells, &report.analysis) {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    report_rules(&rules);
    emit(&serde_json::to_string_pretty(&out)?)?;
    Ok(!a.check || rules.iter().all(|r| r.pass))
}

fn sweep_rules(rows: &[SweepRow]) -> Vec<RuleResult> {
    let first = rows[0].sum;
    let spread = rows.iter().map(|r| (r.sum - first).abs()).fold(0.0, f64::max);
    let mut rules = vec![
        RuleResult { rule: "constant sum rate".into(), pass: spread <= 1e-10, detail: format!("max deviation {spread:e}") },
        RuleResult {
            rule: "R1 strictly decreasing".into(),
            pass: rows.windows(2).all(|w| w[1].r1g < w[0].r1g),
            detail: String::new(),
        },
    ];
    let budget = 3.0 * scalar_redundancy_bits() + 0.05;
    for (i, r) in rows.iter().enumerate() {
        if let (Some(a), Some(b)) = (r.r1_hat, r.r2_hat) {
            let excess = a + b - r.sum;
            rules.push(RuleResult {
                rule: format!("row {i} measured sum within budget"),
                pass: excess <= budget,
                detail: format!("{excess:.5} vs {budget:.5}"),
            });
        }
    }
    rules
}

fn sweep(s: Sweep, exec: ExecMode) -> Result<bool> {
    let d = s.triple.get()?;
    let measure = match &s.source {
        Some(src) => Some(MeasureSpec { source: src.parse()?, n_samples: s.n_samples, seed: s.seed }),
        None => None,
    };
    if s.steps < 2 {
        bail!("a sweep needs at least 2 steps");
    }
    let rows = sweep_dominant_face(&d, s.steps, measure.as_ref(), exec)?;
    let sink: Box<dyn Write> = match &s.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["sigma2_T3", "R1G", "R2G", "sum", "R1_hat", "R2_hat"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        w.write_record([fmt_t3(r.sigma2_t3), r.r1g.to_string(), r.r2g.to_string(), r.sum.to_string(), opt(r.r1_hat), opt(r.r2_hat)])?;
    }
    w.flush()?;
    let rules = sweep_rules(&rows);
    report_rules(&rules);
    Ok(!s.check || rules.iter().all(|r| r.pass))
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>().is_some_and(|ce| matches!(ce.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe))
    })
}

fn emit(s: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{s}")?;
    Ok(())
}

fn fmt_t3(t: SplitVariance) -> String {
    match t {
        SplitVariance::Finite(v) => v.to_string(),
        SplitVariance::Infinite => "inf".into(),
    }
}

fn report_rules(rules: &[RuleResult]) {
    for r in rules.iter().filter(|r| !r.pass) {
        eprintln!("FAIL {}: {}", r.rule, r.detail);
    }
}
