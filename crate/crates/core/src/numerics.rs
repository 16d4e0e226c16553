//! Dense real/complex matrix primitives shared by every analysis module.
//!
//! Matrices are plain `nalgebra` dynamic matrices. All sign tests in the
//! crate go through a single [`Tolerances`] bundle so that every verdict can
//! be traced back to an explicit threshold.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{NiError, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

const SCHUR_MAX_ITERS: usize = 10_000;

/// Thresholds used by every sign and equality test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Equality / residual threshold.
    pub eq_tol: f64,
    /// Threshold below which an eigenvalue counts as negative.
    pub psd_tol: f64,
    /// Largest real part an eigenvalue may have and still count as stable.
    pub hurwitz_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eq_tol: 1e-8, psd_tol: 1e-8, hurwitz_margin: -1e-9 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.eq_tol > 0.0 && self.eq_tol.is_finite()) {
            return Err(NiError::InvalidParameter(format!("eq_tol must be positive, got {}", self.eq_tol)));
        }
        if !(self.psd_tol > 0.0 && self.psd_tol.is_finite()) {
            return Err(NiError::InvalidParameter(format!("psd_tol must be positive, got {}", self.psd_tol)));
        }
        if !(self.hurwitz_margin <= 0.0 && self.hurwitz_margin.is_finite()) {
            return Err(NiError::InvalidParameter(format!(
                "hurwitz_margin must be a finite non-positive real part bound, got {}",
                self.hurwitz_margin
            )));
        }
        Ok(())
    }
}

pub fn ensure_square<T>(m: &DMatrix<T>) -> Result<usize>
where
    T: nalgebra::Scalar,
{
    if m.nrows() != m.ncols() {
        return Err(NiError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &RealMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NiError::NonFinite)
    }
}

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &RealMatrix) -> RealMatrix {
    (m + m.transpose()) * 0.5
}

/// Returns `(m + m*) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

fn cmp_complex(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// All eigenvalues of a real square matrix, with multiplicity, sorted by
/// `(Re, Im)`.
pub fn eigenvalues(m: &RealMatrix) -> Result<Vec<Complex64>> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITERS).ok_or(NiError::NonConvergence)?;
    let mut eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect();
    eigs.sort_by(cmp_complex);
    Ok(eigs)
}

/// Symmetric eigendecomposition with eigenvalues in ascending order and the
/// matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: RealMatrix,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Reassembles `V diag(f(λ)) Vᵀ`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> RealMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        let out = scaled * self.vectors.transpose();
        symmetrize(&out)
    }
}

/// Eigendecomposition of the symmetric part of `m`.
pub fn sym_eigen(m: &RealMatrix) -> Result<SymEigen> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    if n == 0 {
        return Ok(SymEigen { values: Vec::new(), vectors: RealMatrix::zeros(0, 0) });
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = RealMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &RealMatrix) -> Result<Vec<f64>> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut v: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Ascending (real) eigenvalues of the Hermitian part of a complex matrix.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let h = hermitian_part(m);
    match n {
        1 => Ok(vec![h[(0, 0)].re]),
        2 => {
            // closed form; the general solver dominates sweep cost at this size
            let (a, d, b) = (h[(0, 0)].re, h[(1, 1)].re, h[(0, 1)]);
            let mean = 0.5 * (a + d);
            let r = (0.5 * (a - d)).hypot(b.norm());
            Ok(vec![mean - r, mean + r])
        }
        // fixed-size storage avoids heap traffic in the sweep hot path
        3 => Ok(sorted(nalgebra::Matrix3::from_fn(|i, j| h[(i, j)]).symmetric_eigenvalues().iter())),
        4 => Ok(sorted(nalgebra::Matrix4::from_fn(|i, j| h[(i, j)]).symmetric_eigenvalues().iter())),
        _ => Ok(sorted(h.symmetric_eigenvalues().iter())),
    }
}

fn sorted<'a>(values: impl Iterator<Item = &'a f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest eigenvalue of a matrix whose spectrum is real by construction
/// (e.g. a product of two symmetric matrices, one of them PSD).
///
/// Fails with [`NiError::ComplexSpectrum`] when some eigenvalue has an
/// imaginary part above `eq_tol · (1 + ‖m‖_F)`.
pub fn spectral_max_real(m: &RealMatrix, eq_tol: f64) -> Result<f64> {
    let eigs = eigenvalues(m)?;
    let bound = eq_tol * (1.0 + m.norm());
    let max_imag = eigs.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_imag > bound {
        return Err(NiError::ComplexSpectrum { max_imag, bound });
    }
    Ok(eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Thin singular value decomposition `m = U diag(σ) Vᵀ` with `σ` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: RealMatrix,
    pub singular_values: Vec<f64>,
    pub v: RealMatrix,
}

impl Svd {
    /// Number of singular values strictly above `tol · σ_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        if max == 0.0 {
            return 0;
        }
        self.singular_values.iter().filter(|&&s| s > tol * max).count()
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Slower than bidiagonalization but accurate for clustered singular values,
/// which the constraint matrices of the certificate search always have.
pub fn svd(m: &RealMatrix) -> Svd {
    let (r, c) = m.shape();
    if r < c {
        let t = svd(&m.transpose());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let mut w = m.clone();
    let mut v = RealMatrix::identity(c, c);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let (a, b) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = cs * a - sn * b;
                        mat[(i, q)] = sn * a + cs * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..c).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let u = RealMatrix::from_fn(r, c, |i, k| {
        let j = order[k];
        if norms[j] > 0.0 {
            w[(i, j)] / norms[j]
        } else {
            0.0
        }
    });
    let v = RealMatrix::from_fn(c, c, |i, k| v[(i, order[k])]);
    Svd { u, singular_values: order.iter().map(|&j| norms[j]).collect(), v }
}

/// Reciprocal 2-norm condition number `σ_min / σ_max` (0 for the zero matrix).
pub fn rcond(a: &RealMatrix) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = svd(a).singular_values;
    let max = sv[0];
    if max == 0.0 {
        return 0.0;
    }
    sv[sv.len() - 1] / max
}

/// Solves `a x = b`, refusing matrices whose reciprocal condition number is
/// at or below `sing_tol`.
pub fn solve_linear(a: &RealMatrix, b: &RealMatrix, sing_tol: f64) -> Result<RealMatrix> {
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(NiError::DimensionMismatch(format!("solve: a is {n}x{n} but b has {} rows", b.nrows())));
    }
    ensure_finite(a)?;
    ensure_finite(b)?;
    if n == 0 {
        return Ok(RealMatrix::zeros(0, b.ncols()));
    }
    let rc = rcond(a);
    if rc <= sing_tol {
        return Err(NiError::SingularMatrix { rcond: rc });
    }
    a.clone().lu().solve(b).ok_or(NiError::SingularMatrix { rcond: rc })
}

/// Nearest (Frobenius) positive-semidefinite matrix to the symmetric part of `m`.
pub fn project_psd(m: &RealMatrix) -> Result<RealMatrix> {
    project_psd_floor(m, 0.0)
}

/// Nearest (Frobenius) matrix `X ⪰ floor·I` to the symmetric part of `m`.
pub fn project_psd_floor(m: &RealMatrix, floor: f64) -> Result<RealMatrix> {
    let eig = sym_eigen(m)?;
    Ok(eig.reassemble(|l| l.max(floor)))
}

/// Nearest (Frobenius) negative-semidefinite matrix to the symmetric part of `m`.
pub fn project_nsd(m: &RealMatrix) -> Result<RealMatrix> {
    let eig = sym_eigen(m)?;
    Ok(eig.reassemble(|l| l.min(0.0)))
}

/// Number of singular values strictly above `tol · σ_max`.
pub fn rank(m: &RealMatrix, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    svd(m).rank(tol)
}

/// Block-diagonal concatenation.
pub fn block_diag(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    let mut out = RealMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Solver for the continuous Lyapunov equation `A X + X Aᵀ = Q`.
///
/// The complex Schur form of `A` is computed once; each solve is then a
/// Bartels–Stewart back substitution on the triangular factor.
#[derive(Debug, Clone)]
pub struct LyapunovSolver {
    unitary: ComplexMatrix,
    triangular: ComplexMatrix,
}

impl LyapunovSolver {
    pub fn new(a: &RealMatrix) -> Result<Self> {
        let n = ensure_square(a)?;
        ensure_finite(a)?;
        if n == 0 {
            return Ok(Self { unitary: ComplexMatrix::zeros(0, 0), triangular: ComplexMatrix::zeros(0, 0) });
        }
        let schur = Schur::try_new(to_complex(a), f64::EPSILON, SCHUR_MAX_ITERS).ok_or(NiError::NonConvergence)?;
        let (unitary, triangular) = schur.unpack();
        for i in 0..n {
            for j in 0..n {
                let s = triangular[(i, i)] + triangular[(j, j)].conj();
                if s.norm() <= f64::EPSILON * (1.0 + triangular.norm()) {
                    return Err(NiError::SingularMatrix { rcond: s.norm() });
                }
            }
        }
        Ok(Self { unitary, triangular })
    }

    pub fn solve(&self, q: &RealMatrix) -> RealMatrix {
        let n = self.triangular.nrows();
        if n == 0 {
            return RealMatrix::zeros(0, 0);
        }
        let t = &self.triangular;
        let u = &self.unitary;
        let qt = u.adjoint() * to_complex(q) * u;
        let mut x = ComplexMatrix::zeros(n, n);
        // T x_j + sum_{k >= j} conj(T[j,k]) x_k = q_j, columns from last to first.
        for j in (0..n).rev() {
            let mut rhs = qt.column(j).clone_owned();
            for k in (j + 1)..n {
                let coef = t[(j, k)].conj();
                rhs -= x.column(k) * coef;
            }
            let shift = t[(j, j)].conj();
            for i in (0..n).rev() {
                let mut acc = rhs[i];
                for l in (i + 1)..n {
                    acc -= t[(i, l)] * x[(l, j)];
                }
                x[(i, j)] = acc / (t[(i, i)] + shift);
            }
        }
        let full = u * x * u.adjoint();
        symmetrize(&full.map(|z| z.re))
    }
}
