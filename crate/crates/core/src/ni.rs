//! Classification into the negative-imaginary classes.
//!
//! Membership is proved by an LMI certificate and refuted by a frequency
//! sweep of `λ_min(j[R(jω) − R(jω)*])`. Strictness is grid-certified only:
//! the sweep sees a finite log-spaced grid, so a `StrictNi` verdict says the
//! strict inequality held at every grid point, not on all of `(0, ∞)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NiError, Result};
use crate::lti::{FrequencyEvaluator, FrequencySample, StateSpaceSystem};
use crate::numerics::{block_diag, sym_eigenvalues, RealMatrix, Tolerances};
use crate::sdp::{solve_ni_feasibility, verify_certificate, Diagnostics, FeasibilityProblem, NiCertificate};

/// Relative tolerance of the `R(0) − R(∞) = CYCᵀ` cross-check.
pub const DC_IDENTITY_TOL: f64 = 1e-6;
/// Redraw cap for [`generate_ni`] with `strict = true`.
pub const GENERATOR_MAX_REDRAWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NiClass {
    StrictNi,
    Ni,
    NotNi,
    Inconclusive,
}

impl NiClass {
    /// True for `Ni` and `StrictNi`.
    pub fn is_ni(self) -> bool {
        matches!(self, NiClass::Ni | NiClass::StrictNi)
    }
}

impl std::fmt::Display for NiClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NiClass::StrictNi => "StrictNi",
            NiClass::Ni => "Ni",
            NiClass::NotNi => "NotNi",
            NiClass::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
}

/// Frequency grid for the sweep route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub spacing: Spacing,
    /// Also track `min |det(R(jω) − R(jω)*)|` over the grid.
    pub determinant_sweep: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { omega_min: 1e-4, omega_max: 1e4, points: 2000, spacing: Spacing::Log, determinant_sweep: false }
    }
}

impl SweepConfig {
    pub fn new(omega_min: f64, omega_max: f64, points: usize) -> Result<Self> {
        let cfg = Self { omega_min, omega_max, points, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min > 0.0 && self.omega_min < self.omega_max && self.omega_max.is_finite()) {
            return Err(NiError::InvalidParameter(format!(
                "sweep needs 0 < omega_min < omega_max, got {}..{}",
                self.omega_min, self.omega_max
            )));
        }
        if self.points < 2 {
            return Err(NiError::InvalidParameter(format!("sweep needs at least 2 points, got {}", self.points)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.omega_min.log10(), self.omega_max.log10());
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| match i {
                0 => self.omega_min,
                _ if i == self.points - 1 => self.omega_max,
                _ => 10f64.powf(lo + (hi - lo) * i as f64 / last),
            })
            .collect()
    }
}

/// Frequency at which the NI inequality fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Falsifier {
    pub omega: f64,
    pub min_eig: f64,
}

/// Sweep summary behind the strictness decision.
///
/// `j[R(jω) − R(jω)*]` tends to zero at both ends of the axis for every
/// real-rational `R`, so the grid test compares it with the size of the
/// dynamic part: strict iff `λ_min > psd_tol·‖R(jω) − R(∞)‖_F` at every
/// grid point, i.e. `min_relative_eig > psd_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictnessEvidence {
    pub min_eig: f64,
    pub at_omega: f64,
    /// Minimum over the grid of `λ_min(j[R − R*]) / ‖R(jω) − R(∞)‖_F`.
    pub min_relative_eig: f64,
    pub relative_at_omega: f64,
    /// `min |det(R(jω) − R(jω)*)|` over the grid, when requested.
    pub min_abs_det: Option<f64>,
    pub grid_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationChecks {
    pub square: bool,
    pub d_symmetric: bool,
    pub d_asymmetry: f64,
    pub minimal: Option<bool>,
    pub a_hurwitz: Option<bool>,
    pub max_real_part: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationVerdict {
    pub class_tag: NiClass,
    pub certificate: Option<NiCertificate>,
    pub falsifier: Option<Falsifier>,
    pub strictness_evidence: Option<StrictnessEvidence>,
    pub checks: ClassificationChecks,
    pub reason: Option<String>,
    pub solver: Option<Diagnostics>,
}

impl ClassificationVerdict {
    fn new(class_tag: NiClass, checks: ClassificationChecks) -> Self {
        Self {
            class_tag,
            certificate: None,
            falsifier: None,
            strictness_evidence: None,
            checks,
            reason: None,
            solver: None,
        }
    }

    fn because(mut self, reason: impl Into<String>) -> Self {
        self.reason = Some(reason.into());
        self
    }
}

/// Evaluates the system on the grid, in grid order.
pub fn sweep(sys: &StateSpaceSystem, cfg: &SweepConfig) -> Result<Vec<FrequencySample>> {
    cfg.validate()?;
    let ev = FrequencyEvaluator::new(sys);
    cfg.grid().into_par_iter().map(|w| ev.sample(w)).collect()
}

fn summarize(samples: &[FrequencySample], d: &RealMatrix, determinant: bool) -> StrictnessEvidence {
    let mut min_eig = f64::INFINITY;
    let mut at_omega = samples.first().map_or(0.0, |s| s.omega);
    let mut min_relative_eig = f64::INFINITY;
    let mut relative_at_omega = at_omega;
    let mut min_abs_det = f64::INFINITY;
    for s in samples {
        let l = s.imag_part_spectrum.first().copied().unwrap_or(f64::INFINITY);
        if l < min_eig {
            min_eig = l;
            at_omega = s.omega;
        }
        let size = s.value.iter().zip(d.iter()).map(|(r, d)| (r - d).norm_sqr()).sum::<f64>().sqrt();
        let rel = if size > 0.0 { l / size } else { l.min(0.0) };
        if rel < min_relative_eig {
            min_relative_eig = rel;
            relative_at_omega = s.omega;
        }
        if determinant {
            let det: f64 = s.imag_part_spectrum.iter().product();
            min_abs_det = min_abs_det.min(det.abs());
        }
    }
    StrictnessEvidence {
        min_eig,
        at_omega,
        min_relative_eig,
        relative_at_omega,
        min_abs_det: determinant.then_some(min_abs_det),
        grid_points: samples.len(),
    }
}

impl StrictnessEvidence {
    pub fn is_strict(&self, tol: &Tolerances) -> bool {
        self.min_relative_eig > tol.psd_tol
    }
}

fn d_asymmetry(d: &RealMatrix) -> f64 {
    if d.nrows() != d.ncols() {
        return f64::INFINITY;
    }
    (d - d.transpose()).amax()
}

/// Classifies a square system.
///
/// Order of checks: `D = Dᵀ` (else `NotNi`); minimality (a non-minimal
/// realization can still be refuted by the sweep, never certified); `A`
/// Hurwitz (else `NotNi`); sweep falsifier (`NotNi`); certificate search
/// (`Ni`, upgraded to `StrictNi` by [`StrictnessEvidence::is_strict`]);
/// otherwise `Inconclusive`.
pub fn classify(sys: &StateSpaceSystem, sweep_cfg: &SweepConfig, tol: &Tolerances) -> Result<ClassificationVerdict> {
    tol.validate()?;
    sweep_cfg.validate()?;
    let asym = d_asymmetry(sys.d());
    let mut checks = ClassificationChecks {
        square: sys.is_square(),
        d_symmetric: asym <= tol.eq_tol * (1.0 + sys.d().norm()),
        d_asymmetry: asym,
        minimal: None,
        a_hurwitz: None,
        max_real_part: None,
    };
    if !checks.square {
        return Ok(ClassificationVerdict::new(NiClass::NotNi, checks).because("transfer matrix is not square"));
    }
    if !checks.d_symmetric {
        return Ok(ClassificationVerdict::new(NiClass::NotNi, checks).because("D not symmetric"));
    }
    let minimal = sys.is_minimal();
    checks.minimal = Some(minimal);
    let hurwitz = sys.hurwitz(tol)?;
    checks.a_hurwitz = Some(hurwitz.is_hurwitz);
    checks.max_real_part = Some(hurwitz.max_real_part);

    if minimal && !hurwitz.is_hurwitz {
        return Ok(ClassificationVerdict::new(NiClass::NotNi, checks).because("A not Hurwitz"));
    }
    let samples = match sweep(sys, sweep_cfg) {
        Ok(s) => s,
        Err(NiError::PoleAtS { im, .. }) => {
            return Ok(ClassificationVerdict::new(NiClass::Inconclusive, checks)
                .because(format!("pole on the sweep grid at omega = {im}")))
        }
        Err(e) => return Err(e),
    };
    let evidence = summarize(&samples, sys.d(), sweep_cfg.determinant_sweep);
    if evidence.min_eig < -tol.psd_tol {
        let mut v = ClassificationVerdict::new(NiClass::NotNi, checks).because("frequency sweep falsifier");
        v.falsifier = Some(Falsifier { omega: evidence.at_omega, min_eig: evidence.min_eig });
        v.strictness_evidence = Some(evidence);
        return Ok(v);
    }
    if !minimal {
        let mut v = ClassificationVerdict::new(NiClass::Inconclusive, checks).because("realization is not minimal");
        v.strictness_evidence = Some(evidence);
        return Ok(v);
    }

    let problem = FeasibilityProblem::for_system(sys)?.with_residual_tol(tol.eq_tol)?;
    let outcome = solve_ni_feasibility(&problem)?;
    let mut v = match outcome.certificate() {
        Some(cert) if verify_certificate(sys, cert, tol) => {
            let strict = evidence.is_strict(tol);
            let mut v = ClassificationVerdict::new(if strict { NiClass::StrictNi } else { NiClass::Ni }, checks);
            v.certificate = Some(cert.clone());
            if strict {
                v = v.because("certificate found; strict inequality holds on every grid point");
            }
            v
        }
        Some(_) => ClassificationVerdict::new(NiClass::Inconclusive, checks)
            .because("solver certificate failed independent verification"),
        None => ClassificationVerdict::new(NiClass::Inconclusive, checks)
            .because(format!("no certificate found ({:?})", outcome.diagnostics.stop_reason)),
    };
    v.strictness_evidence = Some(evidence);
    v.solver = Some(outcome.diagnostics);
    Ok(v)
}

/// Result of the DC ordering check `R(0) − R(∞) ⪰ 0` (strict for `StrictNi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcOrdering {
    pub holds: bool,
    /// `λ_min(R(0) − R(∞))`.
    pub min_eig: f64,
    /// `‖(R(0) − R(∞)) − CYCᵀ‖_F` when a certificate is present.
    pub identity_residual: Option<f64>,
    pub identity_holds: Option<bool>,
}

/// `R(0) − R(∞) = −CA⁻¹B`.
pub fn dc_minus_inf(sys: &StateSpaceSystem) -> Result<RealMatrix> {
    Ok(sys.dc_gain()? - sys.gain_at_infinity())
}

pub fn check_dc_ordering(
    sys: &StateSpaceSystem,
    verdict: &ClassificationVerdict,
    tol: &Tolerances,
) -> Result<DcOrdering> {
    if !verdict.class_tag.is_ni() {
        return Err(NiError::Precondition(format!("verdict is {}, expected Ni or StrictNi", verdict.class_tag)));
    }
    let gap = dc_minus_inf(sys)?;
    let min_eig = sym_eigenvalues(&gap)?.first().copied().unwrap_or(f64::INFINITY);
    let mut holds = match verdict.class_tag {
        NiClass::StrictNi => min_eig > tol.psd_tol,
        _ => min_eig >= -tol.psd_tol,
    };
    let (mut identity_residual, mut identity_holds) = (None, None);
    if let Some(cert) = &verdict.certificate {
        let cyc = sys.c() * &cert.y * sys.c().transpose();
        let r = (&gap - &cyc).norm();
        let ok = r <= DC_IDENTITY_TOL * (1.0 + cyc.norm());
        identity_residual = Some(r);
        identity_holds = Some(ok);
        holds &= ok;
    }
    Ok(DcOrdering { holds, min_eig, identity_residual, identity_holds })
}

/// Sum of two classified systems with the class propagated from the
/// summands and the certificate `diag(Y₁, Y₂)`, checked but not re-solved.
pub fn sum_with_class(
    s1: &StateSpaceSystem,
    v1: &ClassificationVerdict,
    s2: &StateSpaceSystem,
    v2: &ClassificationVerdict,
    tol: &Tolerances,
) -> Result<(StateSpaceSystem, ClassificationVerdict)> {
    let (Some(c1), Some(c2)) = (&v1.certificate, &v2.certificate) else {
        return Err(NiError::Precondition("both summands need a certificate".into()));
    };
    if !v1.class_tag.is_ni() || !v2.class_tag.is_ni() {
        return Err(NiError::Precondition(format!(
            "summands are {} and {}, expected Ni or StrictNi",
            v1.class_tag, v2.class_tag
        )));
    }
    let sum = s1.add(s2)?;
    let y = block_diag(&c1.y, &c2.y);
    let cert = NiCertificate::evaluate(sum.a(), sum.b(), sum.c(), &y, 0)?;
    if !verify_certificate(&sum, &cert, tol) {
        return Err(NiError::InvalidCertificate("block-diagonal certificate of the sum does not verify".into()));
    }
    let strict = v1.class_tag == NiClass::StrictNi || v2.class_tag == NiClass::StrictNi;
    let checks = ClassificationChecks {
        square: true,
        d_symmetric: v1.checks.d_symmetric && v2.checks.d_symmetric,
        d_asymmetry: d_asymmetry(sum.d()),
        minimal: None,
        a_hurwitz: Some(true),
        max_real_part: match (v1.checks.max_real_part, v2.checks.max_real_part) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        },
    };
    let mut v = ClassificationVerdict::new(if strict { NiClass::StrictNi } else { NiClass::Ni }, checks)
        .because("class propagated from the summands");
    v.certificate = Some(cert);
    Ok((sum, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feedthrough {
    /// Random symmetric `D`.
    Symmetric,
    /// Random symmetric positive-semidefinite `D`.
    PositiveSemidefinite,
    Zero,
}

#[derive(Debug, Clone)]
pub struct GeneratedSystem {
    pub system: StateSpaceSystem,
    pub certificate: NiCertificate,
    pub redraws: usize,
}

/// Random NI system built from a known certificate `Y₀`, with symmetric `D`.
pub fn generate_ni(order: usize, io_dim: usize, seed: u64, strict: bool) -> Result<GeneratedSystem> {
    generate_ni_with(order, io_dim, seed, strict, Feedthrough::Symmetric)
}

/// As [`generate_ni`] with an explicit feedthrough family.
///
/// Draws `Y₀` with eigenvalues in `[0.5, 2]`, `S` skew, `Q ⪰ 0.1·I`, sets
/// `A = (S − Q)Y₀⁻¹`, a random `C` and `B = −AY₀Cᵀ`. With `strict`, the
/// sweep on the default grid must pass [`StrictnessEvidence::is_strict`];
/// failures are redrawn up to [`GENERATOR_MAX_REDRAWS`] times. A strict
/// draw needs `io_dim ≤ order`.
pub fn generate_ni_with(
    order: usize,
    io_dim: usize,
    seed: u64,
    strict: bool,
    feedthrough: Feedthrough,
) -> Result<GeneratedSystem> {
    if order == 0 || io_dim == 0 {
        return Err(NiError::InvalidParameter("order and io_dim must be at least 1".into()));
    }
    if strict && io_dim > order {
        // j[R − R*] = C(·)Cᵀ has rank at most `order`
        return Err(NiError::InvalidParameter(format!("a strict draw needs io_dim ≤ order, got {io_dim} > {order}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = Tolerances::default();
    let sweep_cfg = SweepConfig::default();
    for redraw in 0..=GENERATOR_MAX_REDRAWS {
        let (system, y0) = draw(order, io_dim, feedthrough, &mut rng)?;
        if strict {
            let evidence = summarize(&sweep(&system, &sweep_cfg)?, system.d(), false);
            if !evidence.is_strict(&tol) {
                continue;
            }
        }
        let certificate = NiCertificate::evaluate(system.a(), system.b(), system.c(), &y0, 0)?;
        return Ok(GeneratedSystem { system, certificate, redraws: redraw });
    }
    Err(NiError::GeneratorExhausted(GENERATOR_MAX_REDRAWS))
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn draw(n: usize, m: usize, feedthrough: Feedthrough, rng: &mut ChaCha8Rng) -> Result<(StateSpaceSystem, RealMatrix)> {
    let spread = Uniform::new_inclusive(0.5, 2.0).map_err(|e| NiError::InvalidParameter(e.to_string()))?;
    let q_orth = gaussian(n, n, rng).qr().q();
    let eig = RealMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| spread.sample(rng)));
    let y0 = crate::numerics::symmetrize(&(&q_orth * &eig * q_orth.transpose()));
    let y0_inv = crate::numerics::symmetrize(
        &(&q_orth * eig.map(|v| if v == 0.0 { 0.0 } else { 1.0 / v }) * q_orth.transpose()),
    );

    let g = gaussian(n, n, rng);
    let skew = (&g - g.transpose()) * 0.5;
    let h = gaussian(n, n, rng);
    let q = &h * h.transpose() / n as f64 + RealMatrix::identity(n, n) * 0.1;

    let a = (skew - q) * &y0_inv;
    let c = gaussian(m, n, rng);
    let b = -(&a * &y0 * c.transpose());
    let d = match feedthrough {
        Feedthrough::Zero => RealMatrix::zeros(m, m),
        Feedthrough::Symmetric => {
            let x = gaussian(m, m, rng);
            (&x + x.transpose()) * 0.5
        }
        Feedthrough::PositiveSemidefinite => {
            let x = gaussian(m, m, rng);
            &x * x.transpose() / m as f64
        }
    };
    // keep the stream position independent of the data values
    let _: u32 = rng.random();
    Ok((StateSpaceSystem::new(a, b, c, d, format!("ni_{n}x{m}"))?, y0))
}
