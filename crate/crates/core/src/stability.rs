//! Internal stability of positive-feedback interconnections `[M, N]` with
//! `M ∈ 𝒞` and `N ∈ 𝒞ₛ`.
//!
//! The DC-loop-gain test decides stability from `λ̄(M(0)N(0))`; the
//! eigenvalue oracle decides it from the closed-loop state matrix `𝒜`.
//! The two are reported side by side.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NiError, Result};
use crate::lti::{close_positive_feedback, imag_part_matrix, StateSpaceSystem};
use crate::ni::{classify, ClassificationVerdict, NiClass, SweepConfig};
use crate::numerics::{
    block_diag, eigenvalues, hermitian_eigenvalues, solve_linear, spectral_max_real, sym_eigenvalues, symmetrize,
    ComplexMatrix, RealMatrix, Tolerances,
};
use crate::sdp::{verify_certificate, NiCertificate};

/// Half-width of the band around 1 in which the DC loop gain is reported as
/// marginal.
pub const MARGINAL_BAND: f64 = 1e-6;

/// Checks `det(I − ab) ≠ 0` for `a` with `j[a − a*] ⪰ 0` and `b` with
/// `j[b − b*] ≻ 0`.
///
/// Returns `true` when `|det(I − ab)| > tol`. Under the suppositions the
/// determinant cannot vanish, so a small determinant is reported as
/// [`NiError::NumericalBreakdown`] instead of `false`.
pub fn det_i_minus_ab_nonzero(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<bool> {
    let n = crate::numerics::ensure_square(a)?;
    if crate::numerics::ensure_square(b)? != n {
        return Err(NiError::DimensionMismatch(format!("a is {n}x{n}, b is {}x{}", b.nrows(), b.ncols())));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(NiError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let a_min = hermitian_eigenvalues(&imag_part_matrix(a)?)?.first().copied().unwrap_or(f64::INFINITY);
    if a_min < -tol {
        return Err(NiError::SuppositionViolated(format!("λ_min(j[a − a*]) = {a_min:e} < −{tol:e}")));
    }
    let b_min = hermitian_eigenvalues(&imag_part_matrix(b)?)?.first().copied().unwrap_or(f64::INFINITY);
    if b_min <= tol {
        return Err(NiError::SuppositionViolated(format!("λ_min(j[b − b*]) = {b_min:e} ≤ {tol:e}")));
    }
    let det = (ComplexMatrix::identity(n, n) - a * b).determinant().norm();
    if det > tol {
        Ok(true)
    } else {
        Err(NiError::NumericalBreakdown(format!("|det(I − ab)| = {det:e} under valid suppositions")))
    }
}

/// Settings shared by the stability and margin analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub tol: Tolerances,
    pub sweep: SweepConfig,
    pub marginal_band: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { tol: Tolerances::default(), sweep: SweepConfig::default(), marginal_band: MARGINAL_BAND }
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        self.tol.validate()?;
        self.sweep.validate()?;
        if !(self.marginal_band >= 0.0 && self.marginal_band.is_finite()) {
            return Err(NiError::InvalidParameter(format!("marginal_band must be ≥ 0, got {}", self.marginal_band)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TheoremVerdict {
    Stable,
    Unstable,
    NumericallyMarginal,
    PreconditionFailed(String),
}

impl TheoremVerdict {
    fn decided(&self) -> Option<bool> {
        match self {
            TheoremVerdict::Stable => Some(true),
            TheoremVerdict::Unstable => Some(false),
            _ => None,
        }
    }
}

impl std::fmt::Display for TheoremVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TheoremVerdict::Stable => f.write_str("Stable"),
            TheoremVerdict::Unstable => f.write_str("Unstable"),
            TheoremVerdict::NumericallyMarginal => f.write_str("NumericallyMarginal"),
            TheoremVerdict::PreconditionFailed(r) => write!(f, "PreconditionFailed ({r})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleVerdict {
    Stable,
    Unstable,
    IllPosed,
}

impl std::fmt::Display for OracleVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OracleVerdict::Stable => "Stable",
            OracleVerdict::Unstable => "Unstable",
            OracleVerdict::IllPosed => "IllPosed",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub verdict: OracleVerdict,
    /// `max Re λ(𝒜)`; absent when the loop is ill-posed.
    pub max_real: Option<f64>,
    pub spectrum: Vec<Complex64>,
}

/// Decides internal stability from the eigenvalues of the closed-loop state
/// matrix. Both operands must be Hurwitz.
pub fn oracle_stability(m: &StateSpaceSystem, n: &StateSpaceSystem, tol: &Tolerances) -> Result<OracleResult> {
    if !m.is_hurwitz(tol)? {
        return Err(NiError::NonStableOperand("m"));
    }
    if !n.is_hurwitz(tol)? {
        return Err(NiError::NonStableOperand("n"));
    }
    let closed = match close_positive_feedback(m, n) {
        Ok(c) => c,
        Err(NiError::IllPosed { .. }) => {
            return Ok(OracleResult { verdict: OracleVerdict::IllPosed, max_real: None, spectrum: Vec::new() })
        }
        Err(e) => return Err(e),
    };
    let spectrum = eigenvalues(closed.a())?;
    let max_real = spectrum.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if max_real < tol.hurwitz_margin { OracleVerdict::Stable } else { OracleVerdict::Unstable };
    Ok(OracleResult { verdict, max_real: Some(max_real), spectrum })
}

/// The side conditions of the DC-loop-gain test.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditions {
    pub m_class: ClassificationVerdict,
    pub n_class: ClassificationVerdict,
    /// `‖M(∞)N(∞)‖_F`.
    pub inf_product_residual: f64,
    pub inf_product_zero: bool,
    /// `λ_min(N(∞))`.
    pub n_inf_min_eig: f64,
    pub n_inf_psd: bool,
}

impl Preconditions {
    pub fn m_ok(&self) -> bool {
        self.m_class.class_tag.is_ni()
    }

    pub fn n_ok(&self) -> bool {
        self.n_class.class_tag == NiClass::StrictNi
    }

    pub fn all_hold(&self) -> bool {
        self.m_ok() && self.n_ok() && self.inf_product_zero && self.n_inf_psd
    }

    fn failure(&self) -> Option<String> {
        let mut reasons = Vec::new();
        if !self.m_ok() {
            reasons.push(format!("m is {}, expected Ni or StrictNi", self.m_class.class_tag));
        }
        if !self.n_ok() {
            reasons.push(format!("n is {}, expected StrictNi", self.n_class.class_tag));
        }
        if !self.inf_product_zero {
            reasons.push(format!("‖M(∞)N(∞)‖_F = {:e}", self.inf_product_residual));
        }
        if !self.n_inf_psd {
            reasons.push(format!("λ_min(N(∞)) = {:e}", self.n_inf_min_eig));
        }
        (!reasons.is_empty()).then(|| reasons.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub preconditions: Preconditions,
    /// `λ̄(M(0)N(0))`, absent when a DC gain does not exist or the product
    /// has a complex spectrum.
    pub dc_loop_eig: Option<f64>,
    pub theorem_verdict: TheoremVerdict,
    pub oracle: Option<OracleResult>,
    /// Why the oracle produced no result.
    pub oracle_refusal: Option<String>,
    /// Theorem and oracle agree; absent unless both returned Stable or
    /// Unstable.
    pub agreement: Option<bool>,
}

/// `λ̄(M(0)N(0))` for square operands of equal size.
pub fn dc_loop_eig(m: &StateSpaceSystem, n: &StateSpaceSystem, tol: &Tolerances) -> Result<f64> {
    let prod = m.dc_gain()? * n.dc_gain()?;
    spectral_max_real(&prod, tol.eq_tol)
}

/// Runs the DC-loop-gain test with `m` in the `𝒞` role and `n` in the
/// `𝒞ₛ` role, and cross-checks it with [`oracle_stability`].
pub fn theorem_stability_test(
    m: &StateSpaceSystem,
    n: &StateSpaceSystem,
    cfg: &StabilityConfig,
) -> Result<StabilityReport> {
    cfg.validate()?;
    if !m.is_square() || !n.is_square() || m.outputs() != n.outputs() {
        return Err(NiError::DimensionMismatch(format!(
            "operands must be square of equal size, got {}x{} and {}x{}",
            m.outputs(),
            m.inputs(),
            n.outputs(),
            n.inputs()
        )));
    }
    let tol = &cfg.tol;
    let m_class = classify(m, &cfg.sweep, tol)?;
    let n_class = classify(n, &cfg.sweep, tol)?;
    let inf_product_residual = (m.gain_at_infinity() * n.gain_at_infinity()).norm();
    let n_inf_min_eig = sym_eigenvalues(&symmetrize(&n.gain_at_infinity()))?.first().copied().unwrap_or(f64::INFINITY);
    let preconditions = Preconditions {
        m_class,
        n_class,
        inf_product_residual,
        inf_product_zero: inf_product_residual <= tol.eq_tol,
        n_inf_min_eig,
        n_inf_psd: n_inf_min_eig >= -tol.psd_tol,
    };

    let dc = dc_loop_eig(m, n, tol).ok();
    let theorem_verdict = match (preconditions.failure(), dc) {
        (Some(reason), _) => TheoremVerdict::PreconditionFailed(reason),
        (None, None) => TheoremVerdict::PreconditionFailed("λ̄(M(0)N(0)) is not defined".into()),
        (None, Some(l)) if l < 1.0 - cfg.marginal_band => TheoremVerdict::Stable,
        (None, Some(l)) if l > 1.0 + cfg.marginal_band => TheoremVerdict::Unstable,
        (None, Some(_)) => TheoremVerdict::NumericallyMarginal,
    };

    let (oracle, oracle_refusal) = match oracle_stability(m, n, tol) {
        Ok(o) => (Some(o), None),
        Err(e @ (NiError::NonStableOperand(_) | NiError::NonConvergence)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let oracle_stable = oracle.as_ref().and_then(|o| match o.verdict {
        OracleVerdict::Stable => Some(true),
        OracleVerdict::Unstable => Some(false),
        OracleVerdict::IllPosed => None,
    });
    let agreement = match (theorem_verdict.decided(), oracle_stable) {
        (Some(t), Some(o)) => Some(t == o),
        _ => None,
    };
    Ok(StabilityReport { preconditions, dc_loop_eig: dc, theorem_verdict, oracle, oracle_refusal, agreement })
}

/// The factorization `𝒜 = ΦT` of the closed-loop state matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiT {
    /// `diag(AY, ĀȲ)`.
    pub phi: RealMatrix,
    /// `[Y⁻¹ − CᵀD̄C, −CᵀC̄; −C̄ᵀC, Ȳ⁻¹ − C̄ᵀDC̄]`.
    pub t: RealMatrix,
    /// `‖𝒜 − ΦT‖_F / (1 + ‖𝒜‖_F)`.
    pub residual: f64,
    pub t_min_eig: f64,
}

/// Builds `Φ` and `T` from certificates `y` of `m` and `ybar` of `n`.
pub fn phi_t_decomposition(
    m: &StateSpaceSystem,
    n: &StateSpaceSystem,
    y: &NiCertificate,
    ybar: &NiCertificate,
    tol: &Tolerances,
) -> Result<PhiT> {
    if !verify_certificate(m, y, tol) {
        return Err(NiError::InvalidCertificate("y does not certify m".into()));
    }
    if !verify_certificate(n, ybar, tol) {
        return Err(NiError::InvalidCertificate("ybar does not certify n".into()));
    }
    let closed = close_positive_feedback(m, n)?;
    let (nm, nn) = (m.order(), n.order());
    let phi = block_diag(&(m.a() * &y.y), &(n.a() * &ybar.y));
    let y_inv = inverse_spd(&y.y)?;
    let ybar_inv = inverse_spd(&ybar.y)?;
    let (c, cb) = (m.c(), n.c());
    let mut t = RealMatrix::zeros(nm + nn, nm + nn);
    t.view_mut((0, 0), (nm, nm)).copy_from(&(y_inv - c.transpose() * n.d() * c));
    t.view_mut((0, nm), (nm, nn)).copy_from(&-(c.transpose() * cb));
    t.view_mut((nm, 0), (nn, nm)).copy_from(&-(cb.transpose() * c));
    t.view_mut((nm, nm), (nn, nn)).copy_from(&(ybar_inv - cb.transpose() * m.d() * cb));
    let t = symmetrize(&t);
    let script_a = closed.a();
    let residual = (script_a - &phi * &t).norm() / (1.0 + script_a.norm());
    let t_min_eig = sym_eigenvalues(&t)?.first().copied().unwrap_or(f64::INFINITY);
    Ok(PhiT { phi, t, residual, t_min_eig })
}

fn inverse_spd(y: &RealMatrix) -> Result<RealMatrix> {
    let n = y.nrows();
    Ok(symmetrize(&solve_linear(y, &RealMatrix::identity(n, n), f64::EPSILON)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginPart {
    /// `M ∈ 𝒞ₛ` with `M(∞) ⪰ 0`, uncertainties in `𝒞`.
    I,
    /// `M ∈ 𝒞`, uncertainties in `𝒞ₛ` with `Δ(∞) ⪰ 0`.
    II,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub part: MarginPart,
    pub m_class: ClassificationVerdict,
    /// `λ̄(M(0))`.
    pub lambda_max_m0: f64,
    /// Supremal admissible `λ̄(Δ(0))`, `1/λ̄(M(0))`; absent (unbounded) when
    /// `λ̄(M(0)) ≤ 0`.
    pub gamma_star: Option<f64>,
    /// The admissible set is `λ̄(Δ(0)) < γ*`: the uncertainty at exactly
    /// `γ*` is marginal, not stable.
    pub strict: bool,
}

/// Largest uncertainty DC gain for which `[Δ, M]` stays internally stable.
pub fn robustness_margin(m: &StateSpaceSystem, part: MarginPart, cfg: &StabilityConfig) -> Result<MarginReport> {
    cfg.validate()?;
    let tol = &cfg.tol;
    let m_class = classify(m, &cfg.sweep, tol)?;
    match part {
        MarginPart::I => {
            if m_class.class_tag != NiClass::StrictNi {
                return Err(NiError::Precondition(format!("part I needs m StrictNi, got {}", m_class.class_tag)));
            }
            let inf_min =
                sym_eigenvalues(&symmetrize(&m.gain_at_infinity()))?.first().copied().unwrap_or(f64::INFINITY);
            if inf_min < -tol.psd_tol {
                return Err(NiError::Precondition(format!("part I needs M(∞) ⪰ 0, λ_min = {inf_min:e}")));
            }
        }
        MarginPart::II => {
            if !m_class.class_tag.is_ni() {
                return Err(NiError::Precondition(format!(
                    "part II needs m Ni or StrictNi, got {}",
                    m_class.class_tag
                )));
            }
        }
    }
    let lambda_max_m0 = spectral_max_real(&m.dc_gain()?, tol.eq_tol)?;
    let gamma_star = (lambda_max_m0 > 0.0).then(|| 1.0 / lambda_max_m0);
    Ok(MarginReport { part, m_class, lambda_max_m0, gamma_star, strict: true })
}

/// `(1/λ̄(M(0)))/(s + 1) · I`, the uncertainty that puts `[Δ, M]` exactly on
/// the stability boundary.
pub fn destabilizing_uncertainty(m: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    if !m.is_square() {
        return Err(NiError::NotSquare { rows: m.outputs(), cols: m.inputs() });
    }
    let l = spectral_max_real(&m.dc_gain()?, Tolerances::default().eq_tol)?;
    if !(l > 0.0) {
        return Err(NiError::NonPositiveDcGain(l));
    }
    let p = m.outputs();
    let eye = RealMatrix::identity(p, p);
    StateSpaceSystem::new(-eye.clone(), &eye / l, eye, DMatrix::zeros(p, p), "destabilizing Δ")
}
