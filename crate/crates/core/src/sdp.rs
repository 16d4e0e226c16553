//! Certificate search for the structured LMI
//!
//! ```text
//! Y ≻ 0,   AY + YAᵀ ⪯ 0,   B = −AYCᵀ
//! ```
//!
//! `B = −AYCᵀ` is equivalent to `YCᵀ = −A⁻¹B`, so the unknown lives on an
//! affine subspace of symmetric matrices. The search parametrizes that
//! subspace and runs a phase-I log-barrier Newton method:
//!
//! ```text
//! maximize s   subject to   Y(x) − eps_pd·I ⪰ sI,   −P⊥ᵀ(AY(x) + Y(x)Aᵀ)P⊥ ⪰ sI
//! ```
//!
//! and stops at the first iterate that is a valid certificate.
//!
//! Facial reduction: for any feasible `Y`, `CB + BᵀCᵀ = −C(AY+YAᵀ)Cᵀ`, so every
//! `v` in the kernel of `CB + BᵀCᵀ` forces `(AY+YAᵀ)Cᵀv = 0`. Those equalities
//! are added to the affine set and the second block is restricted to the
//! complement `P⊥` of `range(Cᵀ ker)`. Relative-degree-two systems (modal
//! models) need this: without it their feasible set has no interior.

use nalgebra::{Cholesky, DVector, SymmetricEigen, QR};

use crate::error::{NiError, Result};
use crate::lti::StateSpaceSystem;
use crate::numerics::{
    ensure_finite, solve_linear, svd, sym_eigen, sym_eigenvalues, symmetrize, RealMatrix, Tolerances,
};

pub const DEFAULT_MAX_ITERS: usize = 5000;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
/// Iterations without progress after which the search is declared stalled.
pub const STALL_WINDOW: usize = 50;
const STALL_PROGRESS: f64 = 1e-14;
const RANK_TOL: f64 = 1e-12;
const KERNEL_TOL: f64 = 1e-10;
const BARRIER_GROWTH: f64 = 8.0;
const CENTERING_TOL: f64 = 1e-3;
const MAX_BARRIER_WEIGHT: f64 = 1e16;
/// `Y ⪯ ρI` with `ρ = SEARCH_RADIUS·(1 + |λ_max(Y₀)| + ‖A⁻¹B‖_F)`.
const SEARCH_RADIUS: f64 = 1e3;

/// Problem data and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: RealMatrix,
    /// Floor realizing `Y ≻ 0` as `Y ⪰ eps_pd·I`.
    pub eps_pd: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

impl FeasibilityProblem {
    /// Builds a problem with default settings; `eps_pd = 1e−6·(1 + ‖A⁻¹B‖_F)`.
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(NiError::NotSquare { rows: n, cols: a.ncols() });
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(NiError::DimensionMismatch(format!(
                "a is {n}x{n}, b is {}x{}, c is {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if b.ncols() != c.nrows() {
            return Err(NiError::DimensionMismatch(format!(
                "b has {} columns but c has {} rows",
                b.ncols(),
                c.nrows()
            )));
        }
        for m in [&a, &b, &c] {
            ensure_finite(m)?;
        }
        let gain = if n == 0 { 0.0 } else { solve_linear(&a, &b, f64::EPSILON).map(|x| x.norm()).unwrap_or(0.0) };
        Ok(Self {
            a,
            b,
            c,
            eps_pd: 1e-6 * (1.0 + gain),
            max_iters: DEFAULT_MAX_ITERS,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        })
    }

    pub fn for_system(sys: &StateSpaceSystem) -> Result<Self> {
        Self::new(sys.a().clone(), sys.b().clone(), sys.c().clone())
    }

    pub fn with_eps_pd(mut self, eps_pd: f64) -> Result<Self> {
        if !(eps_pd > 0.0 && eps_pd.is_finite()) {
            return Err(NiError::InvalidParameter(format!("eps_pd must be positive, got {eps_pd}")));
        }
        self.eps_pd = eps_pd;
        Ok(self)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_residual_tol(mut self, residual_tol: f64) -> Result<Self> {
        if !(residual_tol > 0.0 && residual_tol.is_finite()) {
            return Err(NiError::InvalidParameter(format!("residual_tol must be positive, got {residual_tol}")));
        }
        self.residual_tol = residual_tol;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Residuals of a candidate `Y`.
    pub fn certificate(&self, y: &RealMatrix, iterations: usize) -> Result<NiCertificate> {
        NiCertificate::evaluate(&self.a, &self.b, &self.c, y, iterations)
    }

    /// Validity test for a certificate under this problem's thresholds.
    pub fn accepts(&self, cert: &NiCertificate) -> bool {
        cert.lin_residual <= self.residual_tol * (1.0 + self.b.norm())
            && cert.lyap_max_eig <= self.residual_tol
            && cert.y_min_eig >= self.eps_pd / 2.0
    }
}

/// A witness `Y` together with its residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct NiCertificate {
    pub y: RealMatrix,
    /// `‖B + AYCᵀ‖_F`.
    pub lin_residual: f64,
    /// `λ_max(AY + YAᵀ)`.
    pub lyap_max_eig: f64,
    /// `λ_min(Y)`.
    pub y_min_eig: f64,
    pub iterations: usize,
}

impl NiCertificate {
    /// Computes the residuals of `y` (symmetrized first) from scratch.
    pub fn evaluate(a: &RealMatrix, b: &RealMatrix, c: &RealMatrix, y: &RealMatrix, iterations: usize) -> Result<Self> {
        let n = a.nrows();
        if y.nrows() != n || y.ncols() != n {
            return Err(NiError::DimensionMismatch(format!("Y is {}x{}, expected {n}x{n}", y.nrows(), y.ncols())));
        }
        ensure_finite(y)?;
        let y = symmetrize(y);
        let lin_residual = (b + a * &y * c.transpose()).norm();
        let lyap = a * &y + &y * a.transpose();
        let lyap_max_eig = sym_eigenvalues(&lyap)?.last().copied().unwrap_or(f64::NEG_INFINITY);
        let y_min_eig = sym_eigenvalues(&y)?.first().copied().unwrap_or(f64::INFINITY);
        Ok(Self { y, lin_residual, lyap_max_eig, y_min_eig, iterations })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityStatus {
    Feasible(NiCertificate),
    NotProven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CertificateFound,
    /// The affine constraints (including the facial-reduction rows) have no solution.
    AffineInconsistent,
    /// `CB + BᵀCᵀ` has a negative eigenvalue.
    IndefiniteDirectGain,
    /// The barrier path shows that the margin `s` stays negative.
    MarginBoundNegative,
    MaxIterations,
    Stalled,
    NumericalBreakdown,
}

/// One record per completed centering step of the barrier path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub barrier_weight: f64,
    pub margin: f64,
    pub combined_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Iterate with the smallest combined residual seen.
    pub best: Option<NiCertificate>,
    pub best_combined_residual: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub stalled: bool,
    /// Upper bound on the achievable margin from the last centered point.
    pub margin_upper_bound: Option<f64>,
    /// Dimension of `ker(CB + BᵀCᵀ)` used for facial reduction.
    pub facial_directions: usize,
    /// Dimension of the affine search space.
    pub free_dimension: usize,
    pub eps_pd: f64,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOutcome {
    pub status: FeasibilityStatus,
    pub diagnostics: Diagnostics,
}

impl FeasibilityOutcome {
    pub fn certificate(&self) -> Option<&NiCertificate> {
        match &self.status {
            FeasibilityStatus::Feasible(c) => Some(c),
            FeasibilityStatus::NotProven => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible(_))
    }
}

/// Independent check of the three certificate conditions.
///
/// Valid iff `‖B + AYCᵀ‖_F ≤ eq_tol·(1 + ‖B‖_F)`, `λ_max(AY+YAᵀ) ≤ eq_tol`,
/// `λ_min(Y) ≥ psd_tol` and `Y` is symmetric to `eq_tol·(1 + ‖Y‖_F)`.
pub fn verify_certificate(sys: &StateSpaceSystem, cert: &NiCertificate, tol: &Tolerances) -> bool {
    let y = &cert.y;
    let n = sys.order();
    if y.nrows() != n || y.ncols() != n || y.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if n == 0 {
        return true;
    }
    if (y - y.transpose()).norm() > tol.eq_tol * (1.0 + y.norm()) {
        return false;
    }
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let lin = (b + a * y * c.transpose()).norm();
    let lyap = a * y + y * a.transpose();
    let (Ok(lyap_eigs), Ok(y_eigs)) = (sym_eigenvalues(&lyap), sym_eigenvalues(y)) else {
        return false;
    };
    lin <= tol.eq_tol * (1.0 + b.norm())
        && lyap_eigs.last().is_some_and(|&l| l <= tol.eq_tol)
        && y_eigs.first().is_some_and(|&l| l >= tol.psd_tol)
}

/// Coordinates `svec(Y)` with orthonormal basis over symmetric matrices
/// (off-diagonal entries weighted by √2), so Frobenius geometry is Euclidean.
#[derive(Debug, Clone)]
struct SymBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl SymBasis {
    fn new(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for i in 0..=j {
                pairs.push((i, j));
            }
        }
        Self { n, pairs }
    }

    fn dim(&self) -> usize {
        self.pairs.len()
    }

    fn element(&self, k: usize) -> RealMatrix {
        let (i, j) = self.pairs[k];
        let mut e = RealMatrix::zeros(self.n, self.n);
        if i == j {
            e[(i, i)] = 1.0;
        } else {
            e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
            e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
        }
        e
    }

    fn vec(&self, m: &RealMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.pairs.iter().map(|&(i, j)| {
                if i == j {
                    m[(i, i)]
                } else {
                    std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
                }
            }),
        )
    }

    fn mat(&self, v: &DVector<f64>) -> RealMatrix {
        let mut m = RealMatrix::zeros(self.n, self.n);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }
}

/// Orthonormal basis of the complement of the column span of `u`
/// (orthonormal columns), from the eigenvectors of `I − uuᵀ`.
fn orth_complement(u: &RealMatrix) -> RealMatrix {
    let n = u.nrows();
    let r = u.ncols();
    if r == 0 {
        return RealMatrix::identity(n, n);
    }
    let proj = RealMatrix::identity(n, n) - u * u.transpose();
    let eig = SymmetricEigen::new(symmetrize(&proj));
    let mut cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    cols.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    RealMatrix::from_fn(n, cols.len(), |row, k| eig.eigenvectors[(row, cols[k])])
}

/// Orthonormal basis of the column span of `m` at relative tolerance `tol`.
fn orth(m: &RealMatrix, tol: f64) -> RealMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return RealMatrix::zeros(m.nrows(), 0);
    }
    let dec = svd(m);
    let k = dec.rank(tol);
    dec.u.columns(0, k).into_owned()
}

/// The affine set `{Y = Yᵀ : YCᵀ = −A⁻¹B, (AY+YAᵀ)CᵀV₀ = 0}` where `V₀`
/// spans `ker(CB + BᵀCᵀ)`, as `svec(Y) = p + E x` with orthonormal `E`.
#[derive(Debug, Clone)]
pub struct AffineSet {
    basis: SymBasis,
    lin: RealMatrix,
    rhs: DVector<f64>,
    /// `V_k diag(1/σ) U_kᵀ` restricted to the numerical rank.
    pinv: RealMatrix,
    particular: DVector<f64>,
    directions: RealMatrix,
    consistent: bool,
    facial: RealMatrix,
}

impl AffineSet {
    pub fn new(p: &FeasibilityProblem) -> Result<Self> {
        let n = p.order();
        let basis = SymBasis::new(n);
        let target =
            if n == 0 { RealMatrix::zeros(0, p.b.ncols()) } else { solve_linear(&p.a, &p.b, f64::EPSILON)? * -1.0 };
        let facial = facial_directions(p)?;
        let a_scale = p.a.norm().max(f64::MIN_POSITIVE);
        let ct = p.c.transpose();
        let ctv = &ct * &facial;
        let m = ct.ncols();
        let k = facial.ncols();
        let rows = n * m + n * k;
        let cols = basis.dim();

        let mut lin = RealMatrix::zeros(rows, cols);
        for q in 0..cols {
            let e = basis.element(q);
            let mut col = (&e * &ct).as_slice().to_vec();
            if k > 0 {
                let l = (&p.a * &e + &e * p.a.transpose()) * &ctv / a_scale;
                col.extend_from_slice(l.as_slice());
            }
            lin.set_column(q, &DVector::from_vec(col));
        }
        let mut rhs = target.as_slice().to_vec();
        rhs.resize(rows, 0.0);
        let rhs = DVector::from_vec(rhs);

        if rows == 0 || cols == 0 {
            return Ok(Self {
                pinv: RealMatrix::zeros(cols, rows),
                lin,
                rhs: rhs.clone(),
                directions: RealMatrix::identity(cols, cols),
                particular: DVector::zeros(cols),
                basis,
                consistent: rhs.iter().all(|&v| v == 0.0),
                facial,
            });
        }

        let dec = svd(&lin);
        let sv = &dec.singular_values;
        let max = sv.first().copied().unwrap_or(0.0);
        let keep: Vec<usize> =
            (0..sv.len()).filter(|&i| max > 0.0 && sv[i] > RANK_TOL * max * (rows.max(cols) as f64)).collect();
        let mut pinv = RealMatrix::zeros(cols, rows);
        for &i in &keep {
            pinv += dec.v.column(i) * dec.u.column(i).transpose() / sv[i];
        }
        let mut particular = &pinv * &rhs;
        particular += &pinv * (&rhs - &lin * &particular);
        let row_space = RealMatrix::from_fn(cols, keep.len(), |r, c| dec.v[(r, keep[c])]);
        let directions = orth_complement(&row_space);
        let resid = (&lin * &particular - &rhs).norm();
        let consistent = resid <= 1e-9 * (1.0 + rhs.norm());
        Ok(Self { basis, lin, rhs, pinv, particular, directions, consistent, facial })
    }

    /// Whether the constraints admit any symmetric solution.
    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    pub fn free_dimension(&self) -> usize {
        self.directions.ncols()
    }

    pub fn facial_dimension(&self) -> usize {
        self.facial.ncols()
    }

    /// Frobenius-nearest point of the affine set.
    pub fn project(&self, y: &RealMatrix) -> RealMatrix {
        let v = self.basis.vec(y) - &self.particular;
        let x = self.directions.transpose() * v;
        self.basis.mat(&(&self.particular + &self.directions * x))
    }

    /// Iterative refinement towards the affine set. The first block of the
    /// residual is formed as `−A⁻¹(B + AYCᵀ)` rather than against the stored
    /// target, so the certificate residual `‖B + AYCᵀ‖` itself is driven down.
    fn refine(&self, p: &FeasibilityProblem, y: &RealMatrix) -> RealMatrix {
        let n = p.order();
        let mut v = self.basis.vec(y);
        for _ in 0..2 {
            let ym = self.basis.mat(&v);
            let lin_res = -(&p.b + &p.a * &ym * p.c.transpose());
            let Ok(head) = solve_linear(&p.a, &lin_res, f64::EPSILON) else {
                break;
            };
            let mut r = &self.rhs - &self.lin * &v;
            r.rows_mut(0, n * p.c.nrows()).copy_from_slice(head.as_slice());
            v += &self.pinv * r;
        }
        self.basis.mat(&v)
    }

    fn coordinates(&self, y: &RealMatrix) -> DVector<f64> {
        self.directions.transpose() * (self.basis.vec(y) - &self.particular)
    }
}

/// Kernel of `CB + BᵀCᵀ`; errors are not raised for indefiniteness, the
/// caller inspects [`direct_gain_min_eig`].
fn facial_directions(p: &FeasibilityProblem) -> Result<RealMatrix> {
    let m = p.c.nrows();
    if p.order() == 0 {
        return Ok(RealMatrix::zeros(m, 0));
    }
    let cb = &p.c * &p.b;
    let k = symmetrize(&(&cb + cb.transpose()));
    let scale = p.c.norm() * p.b.norm();
    let eig = sym_eigen(&k)?;
    let cols: Vec<usize> =
        (0..m).filter(|&i| eig.values[i].abs() <= KERNEL_TOL * scale.max(f64::MIN_POSITIVE)).collect();
    Ok(RealMatrix::from_fn(m, cols.len(), |r, c| eig.vectors[(r, cols[c])]))
}

fn direct_gain_min_eig(p: &FeasibilityProblem) -> Result<(f64, f64)> {
    let cb = &p.c * &p.b;
    let k = symmetrize(&(&cb + cb.transpose()));
    let scale = p.c.norm() * p.b.norm();
    Ok((sym_eigen(&k)?.min(), scale))
}

fn combined_residual(p: &FeasibilityProblem, cert: &NiCertificate) -> f64 {
    cert.lin_residual / (1.0 + p.b.norm()) + cert.lyap_max_eig.max(0.0) + (p.eps_pd / 2.0 - cert.y_min_eig).max(0.0)
}

/// One LMI block `F(x, s) = F₀ + Σ xᵢFᵢ − s·I`, or `F₀ + Σ xᵢFᵢ` when not
/// `shifted`.
struct Block {
    constant: RealMatrix,
    slopes: Vec<RealMatrix>,
    shifted: bool,
}

impl Block {
    fn size(&self) -> usize {
        self.constant.nrows()
    }

    fn at(&self, x: &DVector<f64>, s: f64) -> RealMatrix {
        let mut f = self.constant.clone();
        for (xi, fi) in x.iter().zip(&self.slopes) {
            f.zip_apply(fi, |a, b| *a += xi * b);
        }
        if self.shifted {
            for i in 0..self.size() {
                f[(i, i)] -= s;
            }
        }
        f
    }
}

fn log_det_pd(m: &RealMatrix) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let v = l[(i, i)];
        if !(v > 0.0 && v.is_finite()) {
            return None;
        }
        acc += v.ln();
    }
    Some(2.0 * acc)
}

struct Barrier<'a> {
    blocks: &'a [Block],
}

impl Barrier<'_> {
    fn value(&self, x: &DVector<f64>, s: f64, t: f64) -> Option<f64> {
        let mut v = -t * s;
        for b in self.blocks {
            v -= log_det_pd(&b.at(x, s))?;
        }
        Some(v)
    }

    /// Gradient and a factor `J` of the Hessian (`H = JᵀJ`) in `(x, s)`.
    fn derivatives(&self, x: &DVector<f64>, s: f64, t: f64) -> Option<(DVector<f64>, RealMatrix)> {
        let d = x.len();
        let mut grad = DVector::zeros(d + 1);
        grad[d] = -t;
        let rows = self.blocks.iter().map(|b| SymBasis::new(b.size()).dim()).sum();
        let mut jac = RealMatrix::zeros(rows, d + 1);
        let mut offset = 0;
        for b in self.blocks {
            let k = b.size();
            if k == 0 {
                continue;
            }
            let f = b.at(x, s);
            let eig = SymmetricEigen::new(symmetrize(&f));
            if eig.eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                return None;
            }
            let mut w = eig.eigenvectors.transpose();
            for i in 0..k {
                w.row_mut(i).scale_mut(eig.eigenvalues[i].powf(-0.5));
            }
            let basis = SymBasis::new(k);
            let dim = basis.dim();
            for (i, fi) in b.slopes.iter().enumerate() {
                let e = &w * fi * w.transpose();
                grad[i] -= e.trace();
                jac.view_mut((offset, i), (dim, 1)).copy_from(&basis.vec(&e));
            }
            if b.shifted {
                let e = -(&w * w.transpose());
                grad[d] -= e.trace();
                jac.view_mut((offset, d), (dim, 1)).copy_from(&basis.vec(&e));
            }
            offset += dim;
        }
        Some((grad, jac))
    }
}

/// Solves `JᵀJ dir = −grad` through a QR factorization of the column-scaled
/// `J`, avoiding the squared conditioning of the normal equations.
fn newton_direction(grad: &DVector<f64>, jac: &RealMatrix) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale = DVector::from_iterator(
        n,
        jac.column_iter().map(|c| {
            let norm = c.norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        }),
    );
    let mut scaled = jac.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= scale[j];
    }
    let rhs = -grad.component_mul(&scale);
    if scaled.nrows() >= n {
        let r = QR::new(scaled.clone()).r();
        let rmax = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r.diagonal().iter().all(|v| v.abs() > 1e-13 * rmax) {
            let z = r.transpose().solve_lower_triangular(&rhs)?;
            let y = r.solve_upper_triangular(&z)?;
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&scale));
            }
        }
    }
    let hess = scaled.transpose() * &scaled;
    let mut shift = 1e-14;
    for _ in 0..8 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += shift;
        }
        if let Some(ch) = Cholesky::new(h) {
            let y = ch.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&scale));
            }
        }
        shift *= 100.0;
    }
    None
}

/// Searches for a certificate `Y`.
///
/// `Feasible` always carries a certificate that is valid under the problem's
/// thresholds. `NotProven` is never a proof of infeasibility; the
/// diagnostics hold the best iterate and the reason the search stopped.
pub fn solve_ni_feasibility(p: &FeasibilityProblem) -> Result<FeasibilityOutcome> {
    let n = p.order();
    if n > 0 {
        let max_real = crate::numerics::eigenvalues(&p.a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if max_real >= 0.0 {
            return Err(NiError::NonHurwitzA { max_real });
        }
    }
    let mut diag = Diagnostics {
        best: None,
        best_combined_residual: f64::INFINITY,
        iterations: 0,
        stop_reason: StopReason::MaxIterations,
        stalled: false,
        margin_upper_bound: None,
        facial_directions: 0,
        free_dimension: 0,
        eps_pd: p.eps_pd,
        trace: Vec::new(),
    };
    if n == 0 {
        let cert = p.certificate(&RealMatrix::zeros(0, 0), 0)?;
        diag.best_combined_residual = 0.0;
        diag.best = Some(cert.clone());
        diag.stop_reason = StopReason::CertificateFound;
        return Ok(FeasibilityOutcome { status: FeasibilityStatus::Feasible(cert), diagnostics: diag });
    }

    let not_proven = |mut diag: Diagnostics, reason: StopReason| {
        diag.stalled = reason == StopReason::Stalled;
        diag.stop_reason = reason;
        Ok(FeasibilityOutcome { status: FeasibilityStatus::NotProven, diagnostics: diag })
    };

    let (k_min, k_scale) = direct_gain_min_eig(p)?;
    let set = AffineSet::new(p)?;
    diag.facial_directions = set.facial_dimension();
    diag.free_dimension = set.free_dimension();
    let start = set.project(&RealMatrix::identity(n, n));
    let start_cert = p.certificate(&start, 0)?;
    diag.best_combined_residual = combined_residual(p, &start_cert);
    diag.best = Some(start_cert);
    if k_min < -KERNEL_TOL * k_scale.max(f64::MIN_POSITIVE) {
        return not_proven(diag, StopReason::IndefiniteDirectGain);
    }
    if !set.is_consistent() {
        return not_proven(diag, StopReason::AffineInconsistent);
    }

    let min_eig = |m: &RealMatrix| sym_eigenvalues(m).map(|v| v.first().copied().unwrap_or(f64::INFINITY));
    let ct_v = p.c.transpose() * &set.facial;
    let complement = orth_complement(&orth(&ct_v, RANK_TOL * n as f64));
    let lyap = |y: &RealMatrix| -(complement.transpose() * (&p.a * y + y * p.a.transpose()) * &complement);
    let dirs: Vec<RealMatrix> =
        (0..set.free_dimension()).map(|i| set.basis.mat(&set.directions.column(i).into_owned())).collect();
    let y0 = set.basis.mat(&set.particular);
    let mut shifted = y0.clone();
    for i in 0..n {
        shifted[(i, i)] -= p.eps_pd;
    }
    // Y ⪯ ρI keeps the iterate bounded; without it the margin can be pushed
    // along directions where ‖Y‖ grows until roundoff spoils YCᵀ = −A⁻¹B
    let rho = SEARCH_RADIUS * (1.0 + min_eig(&(-&start))?.abs() + set.rhs.norm());
    let bounded = RealMatrix::identity(n, n) * rho - &y0;
    let blocks = [
        Block { constant: shifted, slopes: dirs.clone(), shifted: true },
        Block { constant: lyap(&y0), slopes: dirs.iter().map(lyap).collect(), shifted: true },
        Block { constant: bounded, slopes: dirs.iter().map(|e| -e).collect(), shifted: false },
    ];
    let barrier = Barrier { blocks: &blocks };
    let rank_total: f64 = blocks.iter().map(|b| b.size() as f64).sum();

    let y_of = |x: &DVector<f64>| {
        let mut y = y0.clone();
        for (xi, e) in x.iter().zip(&dirs) {
            y.zip_apply(e, |a, b| *a += xi * b);
        }
        y
    };

    let mut x = set.coordinates(&start);
    let s0 = min_eig(&blocks[0].at(&x, 0.0))?.min(min_eig(&blocks[1].at(&x, 0.0))?);
    let mut s = s0 - s0.abs().max(1.0);
    // barrier weight whose duality gap m/t matches the initial margin
    let mut t = rank_total.max(1.0) / (1.0 + s.abs());
    let mut last_improvement = 0usize;
    let mut best_margin = f64::NEG_INFINITY;

    for iter in 0..=p.max_iters {
        let cert = p.certificate(&set.refine(p, &y_of(&x)), iter)?;
        if p.accepts(&cert) {
            diag.iterations = iter;
            diag.best_combined_residual = combined_residual(p, &cert);
            diag.best = Some(cert.clone());
            diag.stop_reason = StopReason::CertificateFound;
            return Ok(FeasibilityOutcome { status: FeasibilityStatus::Feasible(cert), diagnostics: diag });
        }
        let r = combined_residual(p, &cert);
        if r < diag.best_combined_residual - STALL_PROGRESS || s > best_margin + STALL_PROGRESS * (1.0 + s.abs()) {
            last_improvement = iter;
        }
        best_margin = best_margin.max(s);
        if r < diag.best_combined_residual {
            diag.best_combined_residual = r;
            diag.best = Some(cert);
        }
        diag.iterations = iter;
        if iter == p.max_iters {
            break;
        }
        if iter - last_improvement >= STALL_WINDOW {
            return not_proven(diag, StopReason::Stalled);
        }

        let Some((grad, jac)) = barrier.derivatives(&x, s, t) else {
            return not_proven(diag, StopReason::NumericalBreakdown);
        };
        let Some(dir) = newton_direction(&grad, &jac) else {
            return not_proven(diag, StopReason::NumericalBreakdown);
        };
        let decrement = -grad.dot(&dir);
        let d = x.len();
        let dx = dir.rows(0, d).into_owned();
        let ds = dir[d];
        let Some(f0) = barrier.value(&x, s, t) else {
            return not_proven(diag, StopReason::NumericalBreakdown);
        };
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let xn = &x + &dx * step;
            let sn = s + ds * step;
            if let Some(f) = barrier.value(&xn, sn, t) {
                if f <= f0 - 0.25 * step * decrement {
                    x = xn;
                    s = sn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted && decrement > 1e-12 * (1.0 + f0.abs()) {
            return not_proven(diag, StopReason::Stalled);
        }

        if decrement / 2.0 < CENTERING_TOL || !accepted {
            let bound = s + rank_total / t;
            diag.margin_upper_bound = Some(bound);
            diag.trace.push(TraceEntry { iteration: iter + 1, barrier_weight: t, margin: s, combined_residual: r });
            if bound < -(p.eps_pd / 2.0).max(p.residual_tol) {
                diag.iterations = iter + 1;
                return not_proven(diag, StopReason::MarginBoundNegative);
            }
            t *= BARRIER_GROWTH;
            last_improvement = iter;
            if t > MAX_BARRIER_WEIGHT / (1.0 + s.abs()) {
                return not_proven(diag, StopReason::Stalled);
            }
        }
    }
    not_proven(diag, StopReason::MaxIterations)
}
