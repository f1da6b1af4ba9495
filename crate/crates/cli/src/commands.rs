use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use schwarz_rand::harness::{
    bound_curves, enumerate_expectation, lower_bound_curve, mc_expectation, rate_fit, run_suites, write_csv,
    write_json, BoundCurve, BoundReport, BoundStatus, Execution, ExpectationCurve, ExpectationMode, RunReport,
    SuiteOptions, LOW_POWER_RUNS,
};
use schwarz_rand::solvers::Variant;
use schwarz_rand::spectral::SmoothnessClassReport;
use schwarz_rand::Error;
use serde::Serialize;

use crate::config::{build, InstanceConfig, RunConfig, SolverConfig, TargetConfig, Weights, XiConfig};
use crate::{init_threads, CliError, NormsArgs, Overrides, RunArgs, SweepArgs, VerifyArgs};

struct Outcome {
    curve: ExpectationCurve,
    bounds: Vec<BoundCurve>,
    report: BoundReport,
    lower: Option<Vec<f64>>,
    norms: SmoothnessClassReport,
    oracle_max_deviation_sigma: Option<f64>,
}

fn exec_of(o: &Overrides) -> Execution {
    if o.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn apply(cfg: &mut RunConfig, o: &Overrides, seed: Option<u64>, threads: Option<usize>) -> Result<(), CliError> {
    if let Some(r) = o.runs {
        cfg.runs = r;
    }
    if let Some(m) = o.m_max {
        cfg.m_max = m;
    }
    if seed.is_some() {
        cfg.seed = seed;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()
}

fn oracle_deviation(curve: &ExpectationCurve, exact: &ExpectationCurve) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for ((m, s), e) in curve.means.iter().zip(&curve.stderrs).zip(&exact.means) {
        if *s > 0.0 && s.is_finite() {
            let z = (m - e).abs() / s;
            worst = Some(worst.map_or(z, |w: f64| w.max(z)));
        }
    }
    worst
}

fn execute(cfg: &RunConfig, exec: Execution) -> Result<Outcome, CliError> {
    let seed = cfg.seed.ok_or_else(|| CliError::Config("a seed is required".into()))?;
    let built = build(cfg)?;
    let mut variant = cfg.solver.variant()?;
    if let Variant::Greedy { pool, .. } = &mut variant {
        *pool = None;
    }
    let problem = built.instance.problem(built.target.clone())?.with_rhs_mode(built.rhs_mode);
    let measure = built.instance.measure();
    let curve = mc_expectation(&problem, measure, &variant, cfg.m_max, cfg.runs, seed, exec)?;
    if curve.means.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric("non-finite mean squared error".into()));
    }
    let oracle = if curve.mode == ExpectationMode::MonteCarlo {
        match enumerate_expectation(&problem, measure, &variant, cfg.m_max) {
            Ok(exact) => oracle_deviation(&curve, &exact),
            Err(Error::BudgetExceeded { .. } | Error::Unsupported(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let mut inputs = built.bound_inputs(cfg.interpolation_s)?;
    if let SolverConfig::Greedy { beta } = cfg.solver {
        inputs.beta = Some(beta);
    }
    let bounds = bound_curves(&inputs, cfg.m_max, &variant);
    let report = BoundReport::evaluate(&curve, &bounds);
    let lower = match lower_bound_curve(&built.instance, &built.target, cfg.m_max) {
        Ok(l) => Some(l),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut s_list = vec![0.5];
    s_list.extend(cfg.interpolation_s);
    let norms = built.norms(&s_list)?;
    Ok(Outcome {
        curve,
        bounds,
        report,
        lower,
        norms,
        oracle_max_deviation_sigma: oracle,
    })
}

fn run_report(cfg: &RunConfig, o: &Outcome) -> RunReport {
    RunReport {
        instance: serde_json::to_value(&cfg.instance).expect("serializable"),
        solver: serde_json::to_value(&cfg.solver).expect("serializable"),
        seed: cfg.seed.unwrap_or_default(),
        runs: o.curve.runs,
        m_max: cfg.m_max,
        mode: o.curve.mode,
        low_power: o.report.low_power,
        norms: o.norms.clone(),
        bounds: RunReport::bounds_from(&o.report),
        oracle_max_deviation_sigma: o.oracle_max_deviation_sigma,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn write_json_to<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    Ok(write_json(create(path)?, value)?)
}

pub fn run(a: RunArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&a.config)?;
    apply(&mut cfg, &a.overrides, Some(a.seed), threads)?;
    if a.csv.is_some() {
        cfg.output.csv = a.csv;
    }
    if a.json.is_some() {
        cfg.output.json = a.json;
    }
    init_threads(cfg.threads)?;
    let out = execute(&cfg, exec_of(&a.overrides))?;
    let lower = out.lower.as_deref();
    match &cfg.output.csv {
        Some(p) => write_csv(create(p)?, &out.curve, &out.bounds, lower)?,
        None => write_csv(io::stdout().lock(), &out.curve, &out.bounds, lower)?,
    }
    if let Some(p) = &cfg.output.json {
        write_json_to(p, &run_report(&cfg, &out))?;
    }
    if out.report.low_power {
        log::warn!("only {} runs; bound checks have low power", out.curve.runs);
    }
    Ok(())
}

fn print_check(ok: bool, name: &str, detail: &str) {
    println!("  [{}] {name}: {detail}", if ok { "ok" } else { "FAIL" });
}

pub fn verify(a: VerifyArgs, threads: Option<usize>) -> Result<(), CliError> {
    let exec = exec_of(&a.overrides);
    if let Some(path) = &a.config {
        let mut cfg = RunConfig::load(path)?;
        apply(&mut cfg, &a.overrides, a.seed, threads)?;
        if cfg.seed.is_none() {
            return Err(CliError::Config("a seed is required, in the config or through --seed".into()));
        }
        init_threads(cfg.threads)?;
        let out = execute(&cfg, exec)?;
        println!("{}: {} runs, mode {:?}", path.display(), out.curve.runs, out.curve.mode);
        if out.report.low_power {
            println!("  low power: fewer than {} runs", LOW_POWER_RUNS);
        }
        for c in &out.report.checks {
            if c.status == BoundStatus::Skipped {
                println!("  [skip] {}: not available for this instance and target", c.name);
                continue;
            }
            let detail = format!("worst margin {:.3} sigma at m = {:?}", c.worst_margin_sigma, c.worst_m);
            print_check(c.satisfied, &c.name, &detail);
        }
        if let Some(d) = out.oracle_max_deviation_sigma {
            print_check(d <= 4.0, "oracle", &format!("max deviation {d:.3} sigma"));
        }
        if let Some(p) = &a.json {
            write_json_to(p, &run_report(&cfg, &out))?;
        }
        let failed = out.report.checks.iter().filter(|c| c.status == BoundStatus::Violated).count()
            + usize::from(out.oracle_max_deviation_sigma.is_some_and(|d| d > 4.0));
        return if failed == 0 {
            Ok(())
        } else {
            Err(CliError::Verification(format!("{failed} checks failed")))
        };
    }
    init_threads(threads)?;
    let mut opts = SuiteOptions {
        exec,
        ..SuiteOptions::default()
    };
    if let Some(s) = a.seed {
        opts.seed = s;
    }
    let reports = run_suites(&a.suite, &opts)?;
    let mut failed = 0;
    for r in &reports {
        println!("{} {} ({:.2} s)", if r.passed() { "PASS" } else { "FAIL" }, r.suite, r.seconds);
        for c in &r.checks {
            print_check(c.passed, &c.name, &c.detail);
            failed += usize::from(!c.passed);
        }
    }
    if let Some(p) = &a.json {
        write_json_to(p, &reports)?;
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Verification(format!("{failed} checks failed")))
    }
}

pub fn norms(a: NormsArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(p) = &a.vector {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
        let values: Vec<f64> =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("vector must be a JSON array: {e}")))?;
        if matches!(cfg.instance, InstanceConfig::Collective { .. }) {
            return Err(CliError::Config("explicit vectors are not supported for collective instances".into()));
        }
        cfg.target = TargetConfig::Explicit { values };
    }
    let built = build(&cfg)?;
    let report = built.norms(&a.s)?;
    write_json(io::stdout().lock(), &report)?;
    Ok(())
}

const SWEEP_HEADER: [&str; 13] = [
    "s",
    "beta",
    "sigma",
    "skew",
    "slope",
    "intercept",
    "final_mean",
    "margin_ec2",
    "margin_ec2a",
    "margin_cg1",
    "margin_ecvr",
    "low_power",
    "all_satisfied",
];

fn axis(values: &[f64]) -> Vec<Option<f64>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn variant_config(
    base: &RunConfig,
    s: Option<f64>,
    beta: Option<f64>,
    sigma: Option<f64>,
    skew: Option<f64>,
) -> Result<RunConfig, CliError> {
    let mut cfg = base.clone();
    if let Some(s) = s {
        let TargetConfig::HsElement { norm, seed, .. } = cfg.target else {
            return Err(CliError::Config("sweeping s needs an hs_element target".into()));
        };
        cfg.target = TargetConfig::HsElement { s, norm, seed };
        cfg.interpolation_s = (s > 0.0 && s < 0.5).then_some(s);
    }
    if let Some(beta) = beta {
        let SolverConfig::Greedy { .. } = cfg.solver else {
            return Err(CliError::Config("sweeping beta needs a greedy solver".into()));
        };
        cfg.solver = SolverConfig::Greedy { beta };
    }
    if let Some(sigma) = sigma {
        let xi = match cfg.solver {
            SolverConfig::Noisy { xi, .. } => xi,
            _ => XiConfig::Optimal,
        };
        cfg.solver = SolverConfig::Noisy { sigma, xi };
    }
    if let Some(ratio) = skew {
        let w = match &mut cfg.instance {
            InstanceConfig::Orthonormal { weights, .. }
            | InstanceConfig::UnitDictionary { weights, .. }
            | InstanceConfig::Rkhs { weights, .. }
            | InstanceConfig::Collective { weights, .. } => weights,
        };
        *w = Weights::Geometric { ratio };
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn sweep(a: SweepArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut base = RunConfig::load(&a.config)?;
    apply(&mut base, &a.overrides, Some(a.seed), threads)?;
    init_threads(base.threads)?;
    let exec = exec_of(&a.overrides);
    let out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(|e| CliError::Config(e.to_string()))?;
    let lo = (base.m_max / 16).max(1);
    for s in axis(&a.s) {
        for beta in axis(&a.beta) {
            for sigma in axis(&a.sigma) {
                for skew in axis(&a.skew) {
                    let cfg = variant_config(&base, s, beta, sigma, skew)?;
                    let o = execute(&cfg, exec)?;
                    let fit = rate_fit(&o.curve.means, lo, cfg.m_max).ok();
                    let margin = |name: &str| {
                        o.report
                            .get(name)
                            .filter(|c| c.values.is_some())
                            .map(|c| c.worst_margin_sigma)
                    };
                    let rec = vec![
                        cell(s),
                        cell(beta),
                        cell(sigma),
                        cell(skew),
                        cell(fit.as_ref().map(|f| f.slope)),
                        cell(fit.as_ref().map(|f| f.intercept)),
                        o.curve.means[cfg.m_max].to_string(),
                        cell(margin("ec2")),
                        cell(margin("ec2a")),
                        cell(margin("cg1")),
                        cell(margin("ecvr")),
                        o.report.low_power.to_string(),
                        o.report.all_satisfied().to_string(),
                    ];
                    w.write_record(&rec).map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
        }
    }
    w.flush().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(())
}
