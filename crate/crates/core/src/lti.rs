//! Continuous-time state-space systems `ẋ = Ax + Bu`, `y = Cx + Du`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{NiError, Result};
use crate::numerics::{
    block_diag, eigenvalues, ensure_finite, hermitian_eigenvalues, solve_linear, to_complex, ComplexMatrix, RealMatrix,
    Tolerances,
};

/// Relative tolerance for dropping directions in the orthogonal Krylov
/// (staircase) rank computation used by [`StateSpaceSystem::is_minimal`].
pub const MINIMALITY_RANK_TOL: f64 = 1e-10;

/// Pivot ratio below which `sI - A` is treated as singular.
const POLE_PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: RealMatrix,
    b: RealMatrix,
    c: RealMatrix,
    d: RealMatrix,
    pub name: String,
}

/// One point of a frequency sweep.
#[derive(Debug, Clone)]
pub struct FrequencySample {
    pub omega: f64,
    pub value: ComplexMatrix,
    /// Ascending eigenvalues of the Hermitian matrix `j[R(jω) − R(jω)*]`.
    pub imag_part_spectrum: Vec<f64>,
}

/// Stability summary of the state matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurwitzCheck {
    pub is_hurwitz: bool,
    pub max_real_part: f64,
}

impl StateSpaceSystem {
    /// Builds a system after checking dimension consistency and finiteness.
    ///
    /// A zero-state system (`a` is 0×0) is allowed and represents the static
    /// gain `d`.
    pub fn new(a: RealMatrix, b: RealMatrix, c: RealMatrix, d: RealMatrix, name: impl Into<String>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(NiError::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        if b.nrows() != n {
            return Err(NiError::DimensionMismatch(format!("b has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(NiError::DimensionMismatch(format!("c has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(NiError::DimensionMismatch(format!(
                "d is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(NiError::DimensionMismatch("system needs at least one input and one output".into()));
        }
        for m in [&a, &b, &c, &d] {
            ensure_finite(m)?;
        }
        Ok(Self { a, b, c, d, name: name.into() })
    }

    /// The static system `y = d u`.
    pub fn static_gain(d: RealMatrix, name: impl Into<String>) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(RealMatrix::zeros(0, 0), RealMatrix::zeros(0, m), RealMatrix::zeros(p, 0), d, name)
    }

    /// The zero transfer matrix with `io` inputs and outputs.
    pub fn zero(io: usize) -> Result<Self> {
        Self::static_gain(RealMatrix::zeros(io, io), "zero")
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }
    pub fn b(&self) -> &RealMatrix {
        &self.b
    }
    pub fn c(&self) -> &RealMatrix {
        &self.c
    }
    pub fn d(&self) -> &RealMatrix {
        &self.d
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn is_square(&self) -> bool {
        self.inputs() == self.outputs()
    }

    /// Scales the transfer matrix by `k` (scales `B` and `D`).
    pub fn scaled(&self, k: f64) -> Self {
        Self { b: &self.b * k, d: &self.d * k, ..self.clone() }
    }

    /// Negates the transfer matrix.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// `D + C (sI − A)⁻¹ B`.
    pub fn evaluate(&self, s: Complex64) -> Result<ComplexMatrix> {
        let n = self.order();
        let d = to_complex(&self.d);
        if n == 0 {
            return Ok(d);
        }
        let mut si_a = to_complex(&self.a).map(|z| -z);
        for i in 0..n {
            si_a[(i, i)] += s;
        }
        let lu = si_a.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min = diag.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if max == 0.0 || min <= POLE_PIVOT_TOL * max {
            return Err(NiError::PoleAtS { re: s.re, im: s.im });
        }
        let x = lu.solve(&to_complex(&self.b)).ok_or(NiError::PoleAtS { re: s.re, im: s.im })?;
        Ok(d + to_complex(&self.c) * x)
    }

    /// Frequency response at `s = jω` together with the spectrum of
    /// `j[R(jω) − R(jω)*]`.
    pub fn frequency_sample(&self, omega: f64) -> Result<FrequencySample> {
        let value = self.evaluate(Complex64::new(0.0, omega))?;
        let imag_part_spectrum =
            if self.is_square() { hermitian_eigenvalues(&imag_part_matrix(&value)?)? } else { Vec::new() };
        Ok(FrequencySample { omega, value, imag_part_spectrum })
    }

    /// `R(0) = D − C A⁻¹ B`.
    pub fn dc_gain(&self) -> Result<RealMatrix> {
        if self.order() == 0 {
            return Ok(self.d.clone());
        }
        let x = solve_linear(&self.a, &self.b, f64::EPSILON)?;
        Ok(&self.d - &self.c * x)
    }

    /// `R(∞) = D`.
    pub fn gain_at_infinity(&self) -> RealMatrix {
        self.d.clone()
    }

    pub fn hurwitz(&self, tol: &Tolerances) -> Result<HurwitzCheck> {
        let eigs = eigenvalues(&self.a)?;
        let max_real_part = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Ok(HurwitzCheck { is_hurwitz: max_real_part < tol.hurwitz_margin, max_real_part })
    }

    pub fn is_hurwitz(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.hurwitz(tol)?.is_hurwitz)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        eigenvalues(&self.a)
    }

    /// Rank of the controllability matrix `[B AB … Aⁿ⁻¹B]`.
    pub fn controllability_rank(&self) -> usize {
        krylov_rank(&self.a, &self.b, MINIMALITY_RANK_TOL)
    }

    /// Rank of the observability matrix `[C; CA; …; CAⁿ⁻¹]`.
    pub fn observability_rank(&self) -> usize {
        krylov_rank(&self.a.transpose(), &self.c.transpose(), MINIMALITY_RANK_TOL)
    }

    pub fn is_minimal(&self) -> bool {
        let n = self.order();
        self.controllability_rank() == n && self.observability_rank() == n
    }

    /// Realization of the transfer-matrix sum, states ordered `[self; other]`.
    pub fn add(&self, other: &StateSpaceSystem) -> Result<StateSpaceSystem> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(NiError::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{} systems",
                self.outputs(),
                self.inputs(),
                other.outputs(),
                other.inputs()
            )));
        }
        let a = block_diag(&self.a, &other.a);
        let mut b = RealMatrix::zeros(a.nrows(), self.inputs());
        b.view_mut((0, 0), self.b.shape()).copy_from(&self.b);
        b.view_mut((self.order(), 0), other.b.shape()).copy_from(&other.b);
        let mut c = RealMatrix::zeros(self.outputs(), a.ncols());
        c.view_mut((0, 0), self.c.shape()).copy_from(&self.c);
        c.view_mut((0, self.order()), other.c.shape()).copy_from(&other.c);
        let d = &self.d + &other.d;
        StateSpaceSystem::new(a, b, c, d, format!("{}+{}", self.name, other.name))
    }
}

/// Repeated frequency-response evaluation of one system.
///
/// `A = QHQᵀ` is reduced to upper Hessenberg form once, so each point costs a
/// Hessenberg solve of `(sI − H)X = QᵀB` instead of a dense factorization.
#[derive(Debug, Clone)]
pub struct FrequencyEvaluator {
    n: usize,
    /// `H`, row-major.
    h: Vec<f64>,
    /// `QᵀB`, row-major.
    qt_b: Vec<f64>,
    /// `CQ`, row-major.
    c_q: Vec<f64>,
    d: ComplexMatrix,
    square: bool,
}

impl FrequencyEvaluator {
    pub fn new(sys: &StateSpaceSystem) -> Self {
        let n = sys.order();
        let (q, h) = if n == 0 {
            (RealMatrix::zeros(0, 0), RealMatrix::zeros(0, 0))
        } else {
            nalgebra::linalg::Hessenberg::new(sys.a.clone()).unpack()
        };
        let qt_b = q.transpose() * &sys.b;
        Self {
            n,
            h: h.transpose().as_slice().to_vec(),
            qt_b: qt_b.transpose().as_slice().to_vec(),
            c_q: (&sys.c * &q).transpose().as_slice().to_vec(),
            d: to_complex(&sys.d),
            square: sys.is_square(),
        }
    }

    /// `D + C (sI − A)⁻¹ B`.
    pub fn evaluate(&self, s: Complex64) -> Result<ComplexMatrix> {
        let n = self.n;
        if n == 0 {
            return Ok(self.d.clone());
        }
        let p = self.d.ncols();
        let pole = || NiError::PoleAtS { re: s.re, im: s.im };
        // row-major working copies of sI − H and QᵀB
        let mut m: Vec<Complex64> = self.h.iter().map(|&v| Complex64::new(-v, 0.0)).collect();
        for i in 0..n {
            m[i * n + i] += s;
        }
        let mut x: Vec<Complex64> = self.qt_b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for k in 0..n - 1 {
            let (r0, r1) = (k * n, (k + 1) * n);
            if m[r1 + k].norm_sqr() > m[r0 + k].norm_sqr() {
                for j in k..n {
                    m.swap(r0 + j, r1 + j);
                }
                for j in 0..p {
                    x.swap(k * p + j, (k + 1) * p + j);
                }
            }
            let pivot = m[r0 + k];
            if pivot.norm_sqr() == 0.0 {
                return Err(pole());
            }
            let l = m[r1 + k] / pivot;
            if l.norm_sqr() != 0.0 {
                for j in k..n {
                    let v = m[r0 + j];
                    m[r1 + j] -= l * v;
                }
                for j in 0..p {
                    let v = x[k * p + j];
                    x[(k + 1) * p + j] -= l * v;
                }
            }
        }
        let (mut max, mut min) = (0.0f64, f64::INFINITY);
        for i in 0..n {
            let v = m[i * n + i].norm();
            max = max.max(v);
            min = min.min(v);
        }
        if max == 0.0 || min <= POLE_PIVOT_TOL * max {
            return Err(pole());
        }
        for i in (0..n).rev() {
            let inv = m[i * n + i].inv();
            for j in 0..p {
                let mut acc = x[i * p + j];
                for l in (i + 1)..n {
                    acc -= m[i * n + l] * x[l * p + j];
                }
                x[i * p + j] = acc * inv;
            }
        }
        let mut out = self.d.clone();
        for j in 0..p {
            for r in 0..out.nrows() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, &c) in self.c_q[r * n..(r + 1) * n].iter().enumerate() {
                    acc += x[l * p + j] * c;
                }
                out[(r, j)] += acc;
            }
        }
        Ok(out)
    }

    pub fn sample(&self, omega: f64) -> Result<FrequencySample> {
        let value = self.evaluate(Complex64::new(0.0, omega))?;
        let imag_part_spectrum =
            if self.square { hermitian_eigenvalues(&imag_part_matrix(&value)?)? } else { Vec::new() };
        Ok(FrequencySample { omega, value, imag_part_spectrum })
    }
}

/// `j(R − R*)`, made exactly Hermitian.
pub fn imag_part_matrix(r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = crate::numerics::ensure_square(r)?;
    // j(a − b̄) = (−(a.im + b.im), a.re − b.re); swapping (i, j) conjugates it
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (r[(i, j)], r[(j, i)]);
        Complex64::new(-(a.im + b.im), a.re - b.re)
    }))
}

/// Closed-loop realization of the positive-feedback interconnection of `m`
/// and `n`.
///
/// With `M = (A,B,C,D)`, `N = (Ā,B̄,C̄,D̄)` and `F = (I − DD̄)⁻¹`, the
/// returned system realizes `(I − M N)⁻¹` with state `[x_M; x_N]`:
///
/// ```text
/// 𝒜 = [A  BC̄; 0  Ā] + [BD̄; B̄] F [C  DC̄]
/// ℬ = [BD̄; B̄] F,   𝒞 = F [C  DC̄],   𝒟 = F
/// ```
pub fn close_positive_feedback(m: &StateSpaceSystem, n: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    if m.inputs() != n.outputs() || m.outputs() != n.inputs() {
        return Err(NiError::DimensionMismatch(format!(
            "M is {}x{}, N is {}x{}; loop does not close",
            m.outputs(),
            m.inputs(),
            n.outputs(),
            n.inputs()
        )));
    }
    let p = m.outputs();
    let dd = &m.d * &n.d;
    let i_minus = RealMatrix::identity(p, p) - &dd;
    let det = i_minus.determinant();
    let scale = 1.0 + m.d.norm() * n.d.norm();
    if det.abs() <= 1e-12 * scale {
        return Err(NiError::IllPosed { det });
    }
    let f = i_minus.try_inverse().ok_or(NiError::IllPosed { det })?;

    let (nm, nn) = (m.order(), n.order());
    let total = nm + nn;
    let mut open = RealMatrix::zeros(total, total);
    open.view_mut((0, 0), (nm, nm)).copy_from(&m.a);
    open.view_mut((0, nm), (nm, nn)).copy_from(&(&m.b * &n.c));
    open.view_mut((nm, nm), (nn, nn)).copy_from(&n.a);

    let mut left = RealMatrix::zeros(total, p);
    left.view_mut((0, 0), (nm, p)).copy_from(&(&m.b * &n.d));
    left.view_mut((nm, 0), (nn, p)).copy_from(&n.b);

    let mut right = RealMatrix::zeros(p, total);
    right.view_mut((0, 0), (p, nm)).copy_from(&m.c);
    right.view_mut((0, nm), (p, nn)).copy_from(&(&m.d * &n.c));

    let a = open + &left * &f * &right;
    let b = &left * &f;
    let c = &f * &right;
    StateSpaceSystem::new(a, b, c, f, format!("[{},{}]", m.name, n.name))
}

/// Dimension of the Krylov space spanned by `[B AB A²B …]`, computed with an
/// orthogonal (staircase-style) basis instead of explicit matrix powers.
fn krylov_rank(a: &RealMatrix, b: &RealMatrix, tol: f64) -> usize {
    let n = a.nrows();
    if n == 0 {
        return 0;
    }
    let a_scale = a.norm().max(f64::MIN_POSITIVE);
    let b_scale = b.norm();
    if b_scale == 0.0 {
        return 0;
    }
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    let mut frontier: Vec<nalgebra::DVector<f64>> = Vec::new();

    let push = |v: nalgebra::DVector<f64>, reference: f64, basis: &mut Vec<nalgebra::DVector<f64>>| {
        let mut w = v;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in basis.iter() {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm > tol * reference {
            let q = w / norm;
            basis.push(q.clone());
            Some(q)
        } else {
            None
        }
    };

    for j in 0..b.ncols() {
        if basis.len() == n {
            break;
        }
        if let Some(q) = push(b.column(j).into_owned(), b_scale, &mut basis) {
            frontier.push(q);
        }
    }
    while !frontier.is_empty() && basis.len() < n {
        let mut next = Vec::new();
        for q in &frontier {
            if basis.len() == n {
                break;
            }
            if let Some(nq) = push(a * q, a_scale, &mut basis) {
                next.push(nq);
            }
        }
        frontier = next;
    }
    basis.len()
}
