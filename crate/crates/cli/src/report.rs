//! Report documents. Human output is rendered from the same structs that
//! `--json` serializes, so both carry the same numbers.

use std::fmt::Write as _;

use ni_core::lti::StateSpaceSystem;
use ni_core::ni::{ClassificationChecks, ClassificationVerdict, Falsifier, NiClass, StrictnessEvidence};
use ni_core::stability::{MarginPart, OracleVerdict, StabilityConfig, StabilityReport, TheoremVerdict};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<InputEcho>,
    pub result: Body,
    pub config: StabilityConfig,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputEcho {
    pub role: String,
    pub source: String,
    pub system: SystemSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub name: String,
    pub order: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl SystemSummary {
    pub fn of(sys: &StateSpaceSystem) -> Self {
        Self { name: sys.name.clone(), order: sys.order(), inputs: sys.inputs(), outputs: sys.outputs() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// No subcommand draws random numbers.
    pub seed: Option<u64>,
}

impl Default for Provenance {
    fn default() -> Self {
        Self { tool: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into(), seed: None }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Body {
    Classify(ClassSummary),
    Stability(StabilitySummary),
    Margin(MarginSummary),
    Sweep(SweepSummary),
    Example(ExampleSummary),
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub lin_residual: f64,
    pub lyap_max_eig: f64,
    pub y_min_eig: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub stop_reason: String,
    pub iterations: usize,
    pub best_combined_residual: f64,
    pub margin_upper_bound: Option<f64>,
    pub facial_directions: usize,
    pub free_dimension: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSummary {
    pub class: NiClass,
    pub reason: Option<String>,
    pub checks: ClassificationChecks,
    pub certificate: Option<CertificateSummary>,
    pub falsifier: Option<Falsifier>,
    pub strictness: Option<StrictnessEvidence>,
    pub solver: Option<SolverSummary>,
}

impl ClassSummary {
    pub fn of(v: &ClassificationVerdict) -> Self {
        Self {
            class: v.class_tag,
            reason: v.reason.clone(),
            checks: v.checks,
            certificate: v.certificate.as_ref().map(|c| CertificateSummary {
                lin_residual: c.lin_residual,
                lyap_max_eig: c.lyap_max_eig,
                y_min_eig: c.y_min_eig,
                iterations: c.iterations,
            }),
            falsifier: v.falsifier,
            strictness: v.strictness_evidence,
            solver: v.solver.as_ref().map(|d| SolverSummary {
                stop_reason: format!("{:?}", d.stop_reason),
                iterations: d.iterations,
                best_combined_residual: d.best_combined_residual,
                margin_upper_bound: d.margin_upper_bound,
                facial_directions: d.facial_directions,
                free_dimension: d.free_dimension,
            }),
        }
    }

    /// `Class` or `Class (reason)`.
    pub fn verdict_line(&self) -> String {
        match &self.reason {
            Some(r) => format!("{} ({r})", self.class),
            None => self.class.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreconditionTable {
    pub c_role_class: NiClass,
    pub c_role_ok: bool,
    pub cs_role_class: NiClass,
    pub cs_role_ok: bool,
    pub inf_product_residual: f64,
    pub inf_product_zero: bool,
    pub cs_inf_min_eig: f64,
    pub cs_inf_psd: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub verdict: Option<OracleVerdict>,
    pub max_real: Option<f64>,
    pub refusal: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySummary {
    pub verdict: TheoremVerdict,
    pub dc_loop_eig: Option<f64>,
    pub preconditions: PreconditionTable,
    pub oracle: OracleSummary,
    pub agreement: Option<bool>,
    pub c_role: ClassSummary,
    pub cs_role: ClassSummary,
}

impl StabilitySummary {
    pub fn of(r: &StabilityReport) -> Self {
        let p = &r.preconditions;
        Self {
            verdict: r.theorem_verdict.clone(),
            dc_loop_eig: r.dc_loop_eig,
            preconditions: PreconditionTable {
                c_role_class: p.m_class.class_tag,
                c_role_ok: p.m_ok(),
                cs_role_class: p.n_class.class_tag,
                cs_role_ok: p.n_ok(),
                inf_product_residual: p.inf_product_residual,
                inf_product_zero: p.inf_product_zero,
                cs_inf_min_eig: p.n_inf_min_eig,
                cs_inf_psd: p.n_inf_psd,
            },
            oracle: OracleSummary {
                verdict: r.oracle.as_ref().map(|o| o.verdict),
                max_real: r.oracle.as_ref().and_then(|o| o.max_real),
                refusal: r.oracle_refusal.clone(),
            },
            agreement: r.agreement,
            c_role: ClassSummary::of(&p.m_class),
            cs_role: ClassSummary::of(&p.n_class),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginSummary {
    pub part: MarginPart,
    pub gamma_star: Option<f64>,
    pub lambda_max_m0: Option<f64>,
    /// Admissible uncertainties satisfy `λ̄(Δ(0)) < γ*`.
    pub strict: bool,
    pub error: Option<String>,
    pub class: ClassSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub out: String,
    pub rows: usize,
    pub columns: usize,
    pub min_lambda: f64,
    pub min_lambda_omega: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleSummary {
    pub k: f64,
    pub alpha: f64,
    pub verdict: TheoremVerdict,
    pub gamma_star: Option<f64>,
    /// `λ̄(Δ(0))`, compared against `γ*`.
    pub lambda_max_delta0: f64,
    /// `max_ω ‖M_raw(jω) − M(jω)‖_F` between the raw interconnection and
    /// the two-state realization.
    pub closed_loop_deviation: f64,
    /// `Δ` in the c-role, `M` in the cs-role.
    pub stability: StabilitySummary,
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), num)
}

fn opt_bool(x: Option<bool>) -> String {
    x.map_or_else(|| "none".into(), |b| b.to_string())
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only serializable fields")
    }

    pub fn to_human(&self) -> String {
        let mut s = String::new();
        match &self.result {
            Body::Classify(c) => {
                let _ = writeln!(s, "verdict: {}", c.verdict_line());
                class_block(&mut s, "", c);
            }
            Body::Stability(st) => stability_block(&mut s, st),
            Body::Margin(m) => {
                let _ = writeln!(s, "part: {:?}", m.part);
                match &m.error {
                    Some(e) => {
                        let _ = writeln!(s, "error: {e}");
                    }
                    None => {
                        let _ = writeln!(s, "gamma_star: {}", opt(m.gamma_star));
                        let _ = writeln!(s, "lambda_max_m0: {}", opt(m.lambda_max_m0));
                        let _ = writeln!(s, "strict: {}", m.strict);
                    }
                }
                let _ = writeln!(s, "class: {}", m.class.verdict_line());
                class_block(&mut s, "  ", &m.class);
            }
            Body::Sweep(w) => {
                let _ = writeln!(s, "out: {}", w.out);
                let _ = writeln!(s, "rows: {}", w.rows);
                let _ = writeln!(s, "columns: {}", w.columns);
                let _ = writeln!(s, "min_lambda: {} at omega = {}", num(w.min_lambda), num(w.min_lambda_omega));
            }
            Body::Example(e) => {
                let _ = writeln!(s, "k: {}", num(e.k));
                let _ = writeln!(s, "alpha: {}", num(e.alpha));
                let _ = writeln!(s, "verdict: {}", e.verdict);
                let _ = writeln!(s, "gamma_star: {}", opt(e.gamma_star));
                let _ = writeln!(s, "lambda_max_delta0: {}", num(e.lambda_max_delta0));
                let _ = writeln!(s, "closed_loop_deviation: {}", num(e.closed_loop_deviation));
                let _ = writeln!(s, "stability:");
                let mut inner = String::new();
                stability_block(&mut inner, &e.stability);
                for line in inner.lines() {
                    let _ = writeln!(s, "  {line}");
                }
            }
        }
        for i in &self.inputs {
            let _ = writeln!(
                s,
                "input {}: {} `{}` order {} ({}x{})",
                i.role, i.source, i.system.name, i.system.order, i.system.outputs, i.system.inputs
            );
        }
        let c = &self.config;
        let _ = writeln!(
            s,
            "config: tol_eq {} tol_psd {} hurwitz_margin {} sweep {}:{}:{} {:?} strict_grid {} marginal_band {}",
            num(c.tol.eq_tol),
            num(c.tol.psd_tol),
            num(c.tol.hurwitz_margin),
            num(c.sweep.omega_min),
            num(c.sweep.omega_max),
            c.sweep.points,
            c.sweep.spacing,
            c.sweep.determinant_sweep,
            num(c.marginal_band)
        );
        let _ = writeln!(s, "{} {} ({})", self.provenance.tool, self.provenance.version, self.command);
        s
    }
}

fn class_block(s: &mut String, pad: &str, c: &ClassSummary) {
    let k = &c.checks;
    let _ = writeln!(
        s,
        "{pad}checks: square {} d_symmetric {} d_asymmetry {} minimal {} a_hurwitz {} max_real_part {}",
        k.square,
        k.d_symmetric,
        num(k.d_asymmetry),
        opt_bool(k.minimal),
        opt_bool(k.a_hurwitz),
        opt(k.max_real_part)
    );
    if let Some(cert) = &c.certificate {
        let _ = writeln!(
            s,
            "{pad}certificate: lin_residual {} lyap_max_eig {} y_min_eig {} iterations {}",
            num(cert.lin_residual),
            num(cert.lyap_max_eig),
            num(cert.y_min_eig),
            cert.iterations
        );
    }
    if let Some(f) = &c.falsifier {
        let _ = writeln!(s, "{pad}falsifier: omega {} min_eig {}", num(f.omega), num(f.min_eig));
    }
    if let Some(e) = &c.strictness {
        let _ = writeln!(
            s,
            "{pad}sweep: min_eig {} at omega {} min_relative_eig {} at omega {} min_abs_det {} grid_points {}",
            num(e.min_eig),
            num(e.at_omega),
            num(e.min_relative_eig),
            num(e.relative_at_omega),
            opt(e.min_abs_det),
            e.grid_points
        );
    }
    if let Some(d) = &c.solver {
        let _ = writeln!(
            s,
            "{pad}solver: {} iterations {} best_combined_residual {} margin_upper_bound {} facial_directions {} free_dimension {}",
            d.stop_reason,
            d.iterations,
            num(d.best_combined_residual),
            opt(d.margin_upper_bound),
            d.facial_directions,
            d.free_dimension
        );
    }
}

fn stability_block(s: &mut String, st: &StabilitySummary) {
    let p = &st.preconditions;
    let _ = writeln!(s, "verdict: {}", st.verdict);
    let _ = writeln!(s, "dc_loop_eig: {}", opt(st.dc_loop_eig));
    let _ = writeln!(s, "preconditions:");
    let _ = writeln!(s, "  c-role class   {:<12} {}", p.c_role_class.to_string(), ok(p.c_role_ok));
    let _ = writeln!(s, "  cs-role class  {:<12} {}", p.cs_role_class.to_string(), ok(p.cs_role_ok));
    let _ = writeln!(s, "  ‖M(∞)N(∞)‖_F   {:<12} {}", num(p.inf_product_residual), ok(p.inf_product_zero));
    let _ = writeln!(s, "  λ_min(N(∞))    {:<12} {}", num(p.cs_inf_min_eig), ok(p.cs_inf_psd));
    match (&st.oracle.verdict, &st.oracle.refusal) {
        (Some(v), _) => {
            let _ = writeln!(s, "oracle: {v} (max_real {})", opt(st.oracle.max_real));
        }
        (None, Some(r)) => {
            let _ = writeln!(s, "oracle: refused ({r})");
        }
        (None, None) => {
            let _ = writeln!(s, "oracle: none");
        }
    }
    let _ = writeln!(s, "agreement: {}", opt_bool(st.agreement));
    let _ = writeln!(s, "c-role: {}", st.c_role.verdict_line());
    class_block(s, "  ", &st.c_role);
    let _ = writeln!(s, "cs-role: {}", st.cs_role.verdict_line());
    class_block(s, "  ", &st.cs_role);
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}
