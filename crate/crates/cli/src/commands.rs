use std::io::Write as _;
use std::path::Path;

use ni_core::error::NiError;
use ni_core::lti::{FrequencyEvaluator, StateSpaceSystem};
use ni_core::models::{closed_loop_m, example_controller, example_m_minimal, two_mass_plant, TwoMassParams};
use ni_core::ni::{classify, sweep, NiClass};
use ni_core::numerics::spectral_max_real;
use ni_core::stability::{robustness_margin, theorem_stability_test, MarginPart, StabilityConfig, TheoremVerdict};
use num_complex::Complex64;

use crate::args::{Cli, Command, Example, Options};
use crate::document::SystemDocument;
use crate::error::CliError;
use crate::report::{
    num, Body, ClassSummary, ExampleSummary, InputEcho, MarginSummary, Provenance, Report, StabilitySummary,
    SweepSummary, SystemSummary,
};

/// What a command prints on standard output and the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub exit: i32,
    pub text: String,
}

pub fn class_exit(c: NiClass) -> i32 {
    match c {
        NiClass::Ni | NiClass::StrictNi => 0,
        NiClass::NotNi => 2,
        NiClass::Inconclusive => 3,
    }
}

pub fn stability_exit(v: &TheoremVerdict) -> i32 {
    match v {
        TheoremVerdict::Stable => 0,
        TheoremVerdict::Unstable => 2,
        TheoremVerdict::NumericallyMarginal | TheoremVerdict::PreconditionFailed(_) => 3,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let opts = &cli.opts;
    let cfg = opts.config();
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    match &cli.command {
        Command::Classify { file } => {
            let (sys, input) = load("system", file)?;
            let c = ClassSummary::of(&classify(&sys, &cfg.sweep, &cfg.tol)?);
            let exit = class_exit(c.class);
            Ok(finish(opts, "classify", vec![input], Body::Classify(c), cfg, exit))
        }
        Command::Stability { c_role, cs_role } => {
            let (m, im) = load("c-role", c_role)?;
            let (n, inn) = load("cs-role", cs_role)?;
            let st = StabilitySummary::of(&theorem_stability_test(&m, &n, &cfg)?);
            let exit = stability_exit(&st.verdict);
            Ok(finish(opts, "stability", vec![im, inn], Body::Stability(st), cfg, exit))
        }
        Command::Margin { file, part } => {
            let (sys, input) = load("system", file)?;
            let part = MarginPart::from(*part);
            let (summary, exit) = match robustness_margin(&sys, part, &cfg) {
                Ok(r) => (
                    MarginSummary {
                        part,
                        gamma_star: r.gamma_star,
                        lambda_max_m0: Some(r.lambda_max_m0),
                        strict: r.strict,
                        error: None,
                        class: ClassSummary::of(&r.m_class),
                    },
                    0,
                ),
                Err(NiError::Precondition(e)) => (
                    MarginSummary {
                        part,
                        gamma_star: None,
                        lambda_max_m0: None,
                        strict: true,
                        error: Some(e),
                        class: ClassSummary::of(&classify(&sys, &cfg.sweep, &cfg.tol)?),
                    },
                    3,
                ),
                Err(e) => return Err(e.into()),
            };
            Ok(finish(opts, "margin", vec![input], Body::Margin(summary), cfg, exit))
        }
        Command::Sweep { file, out } => {
            let (sys, input) = load("system", file)?;
            let (csv, summary) = sweep_csv(&sys, &cfg, out.as_deref())?;
            match out {
                None => Ok(Outcome { exit: 0, text: csv }),
                Some(path) => {
                    std::fs::File::create(path)
                        .and_then(|mut f| f.write_all(csv.as_bytes()))
                        .map_err(|e| CliError::Io(path.display().to_string(), e))?;
                    Ok(finish(opts, "sweep", vec![input], Body::Sweep(summary), cfg, 0))
                }
            }
        }
        Command::Example(Example::TwoMass { k, alpha }) => {
            let e = two_mass(*k, *alpha, &cfg)?;
            let exit = stability_exit(&e.verdict);
            Ok(finish(opts, "example two-mass", Vec::new(), Body::Example(e), cfg, exit))
        }
    }
}

fn finish(
    opts: &Options,
    command: &str,
    inputs: Vec<InputEcho>,
    result: Body,
    config: StabilityConfig,
    exit: i32,
) -> Outcome {
    let report = Report { command: command.into(), inputs, result, config, provenance: Provenance::default() };
    let text = if opts.json { report.to_json() + "\n" } else { report.to_human() };
    Outcome { exit, text }
}

fn load(role: &str, path: &Path) -> Result<(StateSpaceSystem, InputEcho), CliError> {
    let doc = SystemDocument::load(path)?;
    let sys = doc.to_system().map_err(|e| match e {
        CliError::Core(e) => CliError::Invalid(format!("{}: {e}", path.display())),
        other => other,
    })?;
    let echo = InputEcho { role: role.into(), source: path.display().to_string(), system: SystemSummary::of(&sys) };
    Ok((sys, echo))
}

/// CSV of `R(jω)` (row-major real and imaginary parts) and the ascending
/// spectrum of `j[R − R*]`, one row per grid frequency.
pub fn sweep_csv(
    sys: &StateSpaceSystem,
    cfg: &StabilityConfig,
    out: Option<&Path>,
) -> Result<(String, SweepSummary), CliError> {
    let (p, q) = (sys.outputs(), sys.inputs());
    if p != q {
        return Err(CliError::Invalid(format!("sweep needs a square system, got {p}x{q}")));
    }
    let samples = sweep(sys, &cfg.sweep)?;
    let mut header = vec!["omega".to_string()];
    for i in 1..=p {
        for j in 1..=q {
            header.push(format!("re_{i}{j}"));
            header.push(format!("im_{i}{j}"));
        }
    }
    header.extend((1..=p).map(|i| format!("lambda_{i}")));

    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Invalid(e.to_string());
    w.write_record(&header).map_err(io)?;
    let (mut min_lambda, mut min_lambda_omega) = (f64::INFINITY, f64::NAN);
    for s in &samples {
        let mut row = vec![num(s.omega)];
        for i in 0..p {
            for j in 0..q {
                row.push(num(s.value[(i, j)].re));
                row.push(num(s.value[(i, j)].im));
            }
        }
        row.extend(s.imag_part_spectrum.iter().map(|&l| num(l)));
        if let Some(&l) = s.imag_part_spectrum.first() {
            if l < min_lambda {
                (min_lambda, min_lambda_omega) = (l, s.omega);
            }
        }
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is ASCII");
    let summary = SweepSummary {
        out: out.map_or_else(|| "-".into(), |p| p.display().to_string()),
        rows: samples.len(),
        columns: header.len(),
        min_lambda,
        min_lambda_omega,
    };
    Ok((text, summary))
}

/// The two-mass example end to end: `Δ` in the non-strict role, `M` in the
/// strict role.
pub fn two_mass(k: f64, alpha: f64, cfg: &StabilityConfig) -> Result<ExampleSummary, CliError> {
    let params = TwoMassParams::new(k, alpha).map_err(|e| CliError::Usage(e.to_string()))?;
    let (_, p, delta) = two_mass_plant(&params)?;
    let m = example_m_minimal()?;
    let raw = closed_loop_m(&p, &example_controller()?)?;
    let (er, em) = (FrequencyEvaluator::new(&raw), FrequencyEvaluator::new(&m));
    let mut deviation = 0.0f64;
    for w in cfg.sweep.grid() {
        let s = Complex64::new(0.0, w);
        deviation = deviation.max((er.evaluate(s)? - em.evaluate(s)?).norm());
    }
    let report = theorem_stability_test(&delta, &m, cfg)?;
    let stability = StabilitySummary::of(&report);
    let gamma_star = robustness_margin(&m, MarginPart::I, cfg).ok().and_then(|r| r.gamma_star);
    Ok(ExampleSummary {
        k,
        alpha,
        verdict: report.theorem_verdict.clone(),
        gamma_star,
        lambda_max_delta0: spectral_max_real(&delta.dc_gain()?, cfg.tol.eq_tol)?,
        closed_loop_deviation: deviation,
        stability,
    })
}
