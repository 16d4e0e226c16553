//! The system document: a TOML file describing one LTI system.
//!
//! ```toml
//! name = "mode"
//! format = "state_space"        # or "modal", "two_mass"
//! a = [[0.0, 1.0], [-4.0, -0.4]]
//! b = [[0.0], [4.0]]
//! c = [[1.0, 0.0]]
//! d = [[0.0]]
//! ```
//!
//! A `modal` document carries `[[modes]]` tables with `k`, `zeta`, `wn`; a
//! `two_mass` document carries `k`, `alpha` and an optional `component`.
//! Matrices are arrays of row arrays. A zero-state system is written with
//! `a = []`, `b = []` and one empty row per output in `c`.

use std::path::Path;

use ni_core::lti::StateSpaceSystem;
use ni_core::models::{
    closed_loop_m, example_controller, example_m_minimal, modal_to_state_space, two_mass_plant, ModalModel, Mode,
    TwoMassParams,
};
use ni_core::numerics::RealMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDocument {
    pub name: String,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum Payload {
    StateSpace {
        a: Rows,
        b: Rows,
        c: Rows,
        d: Rows,
    },
    Modal {
        modes: Vec<Mode>,
    },
    TwoMass {
        k: f64,
        alpha: f64,
        #[serde(default)]
        component: TwoMassComponent,
    },
}

/// Which system of the two-mass example a `two_mass` document denotes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoMassComponent {
    /// The uncertainty `Δ`.
    #[default]
    Uncertainty,
    /// The nominal plant `P`.
    Nominal,
    /// The physical plant `P + Δ`.
    Plant,
    /// The closed loop `M` as built from `P` and the controller.
    ClosedLoop,
    /// The two-state realization of `M`.
    ClosedLoopMinimal,
}

impl SystemDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_text(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// Structural checks: rectangular, dimension-consistent matrices.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Payload::StateSpace { a, b, c, d } = &self.payload {
            for (name, m) in [("a", a), ("b", b), ("c", c), ("d", d)] {
                shape(name, m)?;
            }
        }
        Ok(())
    }

    pub fn to_system(&self) -> Result<StateSpaceSystem, CliError> {
        let sys = match &self.payload {
            Payload::StateSpace { a, b, c, d } => {
                let d = matrix("d", d, None)?;
                let a = matrix("a", a, None)?;
                let n = a.nrows();
                let b = matrix("b", b, (n == 0).then_some((0, d.ncols())))?;
                let c = matrix("c", c, (n == 0).then_some((d.nrows(), 0)))?;
                StateSpaceSystem::new(a, b, c, d, self.name.clone())?
            }
            Payload::Modal { modes } => modal_to_state_space(&ModalModel::new(modes.clone())?)?,
            Payload::TwoMass { k, alpha, component } => {
                let (pd, p, delta) = two_mass_plant(&TwoMassParams::new(*k, *alpha)?)?;
                match component {
                    TwoMassComponent::Uncertainty => delta,
                    TwoMassComponent::Nominal => p,
                    TwoMassComponent::Plant => pd,
                    TwoMassComponent::ClosedLoop => closed_loop_m(&p, &example_controller()?)?,
                    TwoMassComponent::ClosedLoopMinimal => example_m_minimal()?,
                }
            }
        };
        Ok(sys.with_name(self.name.clone()))
    }
}

fn shape(name: &str, rows: &Rows) -> Result<(usize, usize), CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(CliError::Invalid(format!(
                "matrix `{name}`: row {} has {} entries, expected {cols}",
                i + 1,
                r.len()
            )));
        }
    }
    Ok((rows.len(), cols))
}

/// Builds a matrix; `empty` gives the shape to use when `rows` is empty.
fn matrix(name: &str, rows: &Rows, empty: Option<(usize, usize)>) -> Result<RealMatrix, CliError> {
    let (r, c) = shape(name, rows)?;
    if let Some((er, ec)) = empty {
        if r == 0 || c == 0 {
            return Ok(RealMatrix::zeros(er, ec));
        }
    }
    Ok(RealMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Document for an existing system.
pub fn from_system(sys: &StateSpaceSystem) -> SystemDocument {
    let rows = |m: &RealMatrix| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    SystemDocument {
        name: sys.name.clone(),
        payload: Payload::StateSpace { a: rows(sys.a()), b: rows(sys.b()), c: rows(sys.c()), d: rows(sys.d()) },
    }
}
