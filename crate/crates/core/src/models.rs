//! Model families: modal sums of lightly damped second-order modes and the
//! two-mass benchmark with its controller and closed-loop map.

use serde::{Deserialize, Serialize};

use crate::error::{NiError, Result};
use crate::lti::StateSpaceSystem;
use crate::numerics::RealMatrix;

/// One second-order mode `k ωₙ²/(s² + 2ζωₙ s + ωₙ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: f64,
    pub zeta: f64,
    pub wn: f64,
}

impl Mode {
    pub fn new(k: f64, zeta: f64, wn: f64) -> Result<Self> {
        let m = Self { k, zeta, wn };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k", self.k), ("zeta", self.zeta), ("wn", self.wn)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NiError::InvalidParameter(format!("mode {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// SISO sum of second-order modes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModalModel {
    pub modes: Vec<Mode>,
}

impl ModalModel {
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        let m = Self { modes };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.modes.iter().try_for_each(Mode::validate)
    }

    /// `Σ kᵢ`.
    pub fn dc_gain(&self) -> f64 {
        self.modes.iter().map(|m| m.k).sum()
    }
}

/// Block-diagonal realization with two states per mode: companion form
/// `[[0, 1], [−ωₙ², −2ζωₙ]]`, input `[0; kωₙ²]`, output `[1, 0]`.
/// An empty mode list gives the zero system.
pub fn modal_to_state_space(model: &ModalModel) -> Result<StateSpaceSystem> {
    model.validate()?;
    let h = model.modes.len();
    if h == 0 {
        return Ok(StateSpaceSystem::zero(1)?.with_name("modal (empty)"));
    }
    let n = 2 * h;
    let mut a = RealMatrix::zeros(n, n);
    let mut b = RealMatrix::zeros(n, 1);
    let mut c = RealMatrix::zeros(1, n);
    for (i, m) in model.modes.iter().enumerate() {
        let r = 2 * i;
        a[(r, r + 1)] = 1.0;
        a[(r + 1, r)] = -m.wn * m.wn;
        a[(r + 1, r + 1)] = -2.0 * m.zeta * m.wn;
        b[(r + 1, 0)] = m.k * m.wn * m.wn;
        c[(0, r)] = 1.0;
    }
    StateSpaceSystem::new(a, b, c, RealMatrix::zeros(1, 1), format!("modal ({h} modes)"))
}

/// Coupling stiffness `k` (N/m) and damping `alpha` (Ns/m) between the two
/// unit masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoMassParams {
    pub k: f64,
    pub alpha: f64,
}

impl TwoMassParams {
    pub fn new(k: f64, alpha: f64) -> Result<Self> {
        let p = Self { k, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k", self.k), ("alpha", self.alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NiError::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// `Ψ = [[1, 0], [1, 1]]`.
pub fn psi() -> RealMatrix {
    RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])
}

/// `Ψ⁻¹ = [[1, 0], [−1, 1]]`.
pub fn psi_inv() -> RealMatrix {
    RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0])
}

/// `(g/2) v vᵀ · 1/(s² + a₁s + a₀)` as a two-state system.
fn rank_one_second_order(v: [f64; 2], a1: f64, a0: f64, name: &str) -> Result<StateSpaceSystem> {
    let a = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -a0, -a1]);
    let b = RealMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5 * v[0], 0.5 * v[1]]);
    let c = RealMatrix::from_row_slice(2, 2, &[v[0], 0.0, v[1], 0.0]);
    StateSpaceSystem::new(a, b, c, RealMatrix::zeros(2, 2), name)
}

/// The uncertain plant `P_Δ`, the nominal plant `P = Ψ diag(p/2, 0) Ψᵀ` and
/// the uncertainty `Δ = Ψ⁻¹ diag(δ/2, 0) Ψ⁻ᵀ`, with `p = 1/(s² + s + 1)`
/// and `δ = 1/(s² + (2α + 1)s + (2k + 1))`.
///
/// `P_Δ` is the four-state mass-spring-damper model (force in, position
/// out), built independently of `P` and `Δ`.
pub fn two_mass_plant(params: &TwoMassParams) -> Result<(StateSpaceSystem, StateSpaceSystem, StateSpaceSystem)> {
    params.validate()?;
    let (k, alpha) = (params.k, params.alpha);
    let stiffness = RealMatrix::from_row_slice(2, 2, &[1.0 + k, -k, -k, 1.0 + k]);
    let damping = RealMatrix::from_row_slice(2, 2, &[1.0 + alpha, -alpha, -alpha, 1.0 + alpha]);
    let mut a = RealMatrix::zeros(4, 4);
    a.view_mut((0, 2), (2, 2)).fill_with_identity();
    a.view_mut((2, 0), (2, 2)).copy_from(&-stiffness);
    a.view_mut((2, 2), (2, 2)).copy_from(&-damping);
    let mut b = RealMatrix::zeros(4, 2);
    b.view_mut((2, 0), (2, 2)).fill_with_identity();
    let mut c = RealMatrix::zeros(2, 4);
    c.view_mut((0, 0), (2, 2)).fill_with_identity();
    let p_delta = StateSpaceSystem::new(a, b, c, RealMatrix::zeros(2, 2), format!("P_Δ(k={k}, α={alpha})"))?;

    let nominal = rank_one_second_order([1.0, 1.0], 1.0, 1.0, "P")?;
    let delta = rank_one_second_order([1.0, -1.0], 2.0 * alpha + 1.0, 2.0 * k + 1.0, &format!("Δ(k={k}, α={alpha})"))?;
    Ok((p_delta, nominal, delta))
}

/// `C(s) = Ψ⁻ᵀ diag(−2(s² + s + 1)/(2s³ + 4s² + 4s + 3), −1/(s + 1)) Ψ⁻¹`.
pub fn example_controller() -> Result<StateSpaceSystem> {
    // c₁ = −(s² + s + 1)/(s³ + 2s² + 2s + 1.5) in controllable form, c₂ = −1/(s + 1)
    let mut a = RealMatrix::zeros(4, 4);
    a[(0, 1)] = 1.0;
    a[(1, 2)] = 1.0;
    a[(2, 0)] = -1.5;
    a[(2, 1)] = -2.0;
    a[(2, 2)] = -2.0;
    a[(3, 3)] = -1.0;
    let mut b_diag = RealMatrix::zeros(4, 2);
    b_diag[(2, 0)] = 1.0;
    b_diag[(3, 1)] = 1.0;
    let mut c_diag = RealMatrix::zeros(2, 4);
    c_diag[(0, 0)] = -1.0;
    c_diag[(0, 1)] = -1.0;
    c_diag[(0, 2)] = -1.0;
    c_diag[(1, 3)] = -1.0;
    let b = b_diag * psi_inv();
    let c = psi_inv().transpose() * c_diag;
    StateSpaceSystem::new(a, b, c, RealMatrix::zeros(2, 2), "C")
}

/// `M = −C(I + PC)⁻¹`, the map from `w` to `z`, as the raw interconnection
/// with state `[x_P; x_C]`. No cancellation is attempted, so the result is
/// generally not minimal.
pub fn closed_loop_m(plant: &StateSpaceSystem, controller: &StateSpaceSystem) -> Result<StateSpaceSystem> {
    if plant.outputs() != controller.inputs() || plant.inputs() != controller.outputs() {
        return Err(NiError::DimensionMismatch(format!(
            "P is {}x{}, C is {}x{}",
            plant.outputs(),
            plant.inputs(),
            controller.outputs(),
            controller.inputs()
        )));
    }
    let (ap, bp, cp, dp) = (plant.a(), plant.b(), plant.c(), plant.d());
    let (ac, bc, cc, dc) = (controller.a(), controller.b(), controller.c(), controller.d());
    let q = plant.outputs();
    let i_plus = RealMatrix::identity(q, q) + dp * dc;
    let det = i_plus.determinant();
    if det.abs() <= 1e-12 * (1.0 + dp.norm() * dc.norm()) {
        return Err(NiError::IllPosed { det });
    }
    let e = i_plus.try_inverse().ok_or(NiError::IllPosed { det })?;
    let (np, nc) = (plant.order(), controller.order());
    let n = np + nc;

    // v = E(w − C_P x_P − D_P C_C x_C), u = C_C x_C + D_C v, z = −u
    let mut v_x = RealMatrix::zeros(q, n);
    v_x.view_mut((0, 0), (q, np)).copy_from(&-(&e * cp));
    v_x.view_mut((0, np), (q, nc)).copy_from(&-(&e * dp * cc));
    let mut u_x = dc * &v_x;
    let mut tail = u_x.view_mut((0, np), (controller.outputs(), nc));
    tail += cc;

    let mut a = RealMatrix::zeros(n, n);
    a.view_mut((0, 0), (np, np)).copy_from(ap);
    a.view_mut((np, np), (nc, nc)).copy_from(ac);
    let mut rows_p = a.view_mut((0, 0), (np, n));
    rows_p += bp * &u_x;
    let mut rows_c = a.view_mut((np, 0), (nc, n));
    rows_c += bc * &v_x;

    let mut b = RealMatrix::zeros(n, q);
    b.view_mut((0, 0), (np, q)).copy_from(&(bp * dc * &e));
    b.view_mut((np, 0), (nc, q)).copy_from(&(bc * &e));
    let c = -u_x;
    let d = -(dc * &e);
    StateSpaceSystem::new(a, b, c, d, "M")
}

/// Two-state minimal realization of the closed-loop map of the two-mass
/// example, `M(s) = Ψ⁻ᵀΨ⁻¹/(s + 1)`.
pub fn example_m_minimal() -> Result<StateSpaceSystem> {
    let m0 = psi_inv().transpose() * psi_inv();
    StateSpaceSystem::new(
        -RealMatrix::identity(2, 2),
        m0,
        RealMatrix::identity(2, 2),
        RealMatrix::zeros(2, 2),
        "M (minimal)",
    )
}
