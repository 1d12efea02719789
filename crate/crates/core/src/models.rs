//! Model construction: field expressions, Hamiltonians, primary
//! constraints and the canonical angular momentum for each
//! (field selection, reduction mode) scenario.
//!
//! Field configuration: a charged-filament field E1 = k/r e_r, a bulk
//! charge field E2 = (rho/2) r e_r, both in-plane and radial, and a
//! uniform magnetic field B along z. The atom carries an induced dipole
//! d = alpha (E + v x B); eliminating d and restricting to the plane
//! yields the effective mass M = m + alpha B^2 and the canonical
//! Hamiltonian H = (p_i + alpha B eps_ij E_j)^2 / (2M)
//!               - alpha E^2 / 2 + K x^2 / 2.
//! The small-kinetic-energy reduction drops the kinetic term and turns
//! the momentum definitions into primary constraints
//! phi_i = p_i + alpha B eps_ij E_j ~ 0.

use num::BigRational;
use serde::{Deserialize, Serialize};

use crate::expr::{rat, PhaseExpression, Var};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("operation requires {expected:?} mode, got {actual:?}")]
    ModeError {
        expected: ReductionMode,
        actual: ReductionMode,
    },
}

/// Numeric parameters of the trapped-atom model. All values are
/// dimensionless runtime numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Bare mass.
    pub m: f64,
    /// Dielectric polarizability.
    pub alpha: f64,
    /// Magnetic field strength.
    #[serde(rename = "B")]
    pub b: f64,
    /// Filament field strength (E1 = k/r e_r).
    pub k: f64,
    /// Charge density parameter (E2 = rho/2 r e_r).
    pub rho: f64,
    /// Trap stiffness.
    #[serde(rename = "K")]
    pub trap: f64,
    pub hbar: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            m: 1.0,
            alpha: 1.0,
            b: 1.0,
            k: 0.5,
            rho: 1.0,
            trap: 1.0,
            hbar: 1.0,
        }
    }
}

impl ModelConfig {
    /// M = m + alpha B^2.
    pub fn effective_mass(&self) -> f64 {
        self.m + self.alpha * self.b * self.b
    }

    /// Noncommutativity scale theta = hbar / (alpha rho B).
    pub fn theta(&self) -> f64 {
        self.hbar / (self.alpha * self.rho * self.b)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.m > 0.0) {
            return Err(ModelError::ConfigError("m must be > 0".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(ModelError::ConfigError("alpha must be > 0".into()));
        }
        if !(self.trap > 0.0) {
            return Err(ModelError::ConfigError("K must be > 0".into()));
        }
        if !(self.hbar > 0.0) {
            return Err(ModelError::ConfigError("hbar must be > 0".into()));
        }
        if !(self.effective_mass() > 0.0) {
            return Err(ModelError::ConfigError(
                "effective mass m + alpha*B^2 must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Which electric fields are switched on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldSelection {
    #[serde(rename = "both")]
    Both,
    #[serde(rename = "e1")]
    E1Only,
    #[serde(rename = "e2")]
    E2Only,
}

impl FieldSelection {
    pub fn includes_e1(self) -> bool {
        matches!(self, FieldSelection::Both | FieldSelection::E1Only)
    }

    pub fn includes_e2(self) -> bool {
        matches!(self, FieldSelection::Both | FieldSelection::E2Only)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReductionMode {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "reduced")]
    Reduced,
}

/// A built model: Hamiltonian plus (in reduced mode) primary constraints.
#[derive(Clone, Debug)]
pub struct HamiltonianSystem {
    pub config: ModelConfig,
    pub selection: FieldSelection,
    pub mode: ReductionMode,
    pub hamiltonian: PhaseExpression,
    pub primary_constraints: Vec<PhaseExpression>,
}

/// Componentized electric field: E1 component of k/r e_r is k x_i / r^2
/// (radial power -1), E2 component of (rho/2) r e_r is (rho/2) x_i.
pub fn electric_field(
    selection: FieldSelection,
    config: &ModelConfig,
) -> [PhaseExpression; 2] {
    let mut field = [PhaseExpression::zero(), PhaseExpression::zero()];
    for (i, var) in [Var::X1, Var::X2].into_iter().enumerate() {
        let x = PhaseExpression::var(var);
        if selection.includes_e1() {
            let filament = x
                .mul(&PhaseExpression::radial(-1))
                .scale(&rat(config.k));
            field[i] = field[i].add(&filament);
        }
        if selection.includes_e2() {
            let bulk = x.scale(&(rat(config.rho) / BigRational::from_integer(2.into())));
            field[i] = field[i].add(&bulk);
        }
    }
    field
}

/// phi_i = p_i + alpha B eps_ij E_j with eps_12 = +1.
pub fn primary_constraints(
    selection: FieldSelection,
    config: &ModelConfig,
) -> [PhaseExpression; 2] {
    let [e1, e2] = electric_field(selection, config);
    let ab = rat(config.alpha) * rat(config.b);
    [
        PhaseExpression::var(Var::P1).add(&e2.scale(&ab)),
        PhaseExpression::var(Var::P2).sub(&e1.scale(&ab)),
    ]
}

/// A_i^eff = alpha eps_ij E_j.
pub fn effective_gauge_potential(
    selection: FieldSelection,
    config: &ModelConfig,
) -> [PhaseExpression; 2] {
    let [e1, e2] = electric_field(selection, config);
    let a = rat(config.alpha);
    [e2.scale(&a), e1.scale(&a).neg()]
}

pub fn build_model(
    config: &ModelConfig,
    selection: FieldSelection,
    mode: ReductionMode,
) -> Result<HamiltonianSystem, ModelError> {
    config.validate()?;
    if mode == ReductionMode::Reduced
        && selection.includes_e2()
        && config.alpha * config.rho * config.b == 0.0
    {
        return Err(ModelError::ConfigError(
            "reduced mode with the bulk field requires alpha*rho*B != 0".into(),
        ));
    }

    let [e1, e2] = electric_field(selection, config);
    let field_energy = e1
        .mul(&e1)
        .add(&e2.mul(&e2))
        .scale(&(rat(config.alpha) / BigRational::from_integer(2.into())));
    let trap = PhaseExpression::radial(1)
        .scale(&(rat(config.trap) / BigRational::from_integer(2.into())));
    let potential = trap.sub(&field_energy);

    let (hamiltonian, primary) = match mode {
        ReductionMode::Full => {
            let [a1, a2] = primary_constraints(selection, config);
            let m_eff = rat(config.m) + rat(config.alpha) * rat(config.b) * rat(config.b);
            let inv_2m = BigRational::from_integer(1.into())
                / (BigRational::from_integer(2.into()) * m_eff);
            let kinetic = a1.mul(&a1).add(&a2.mul(&a2)).scale(&inv_2m);
            (kinetic.add(&potential).normalize_radial(), Vec::new())
        }
        ReductionMode::Reduced => {
            let phi = primary_constraints(selection, config);
            (potential.normalize_radial(), phi.to_vec())
        }
    };

    Ok(HamiltonianSystem {
        config: *config,
        selection,
        mode,
        hamiltonian,
        primary_constraints: primary,
    })
}

/// J = eps_ij x_i p_j = x1 p2 - x2 p1.
pub fn canonical_angular_momentum() -> PhaseExpression {
    let x1 = PhaseExpression::var(Var::X1);
    let x2 = PhaseExpression::var(Var::X2);
    let p1 = PhaseExpression::var(Var::P1);
    let p2 = PhaseExpression::var(Var::P2);
    x1.mul(&p2).sub(&x2.mul(&p1))
}

/// Substitutes p_i = -alpha B eps_ij E_j into J, giving
/// J = alpha B x_i E_i, a function of position only.
pub fn reduce_j_on_constraint_surface(
    system: &HamiltonianSystem,
) -> Result<PhaseExpression, ModelError> {
    if system.mode != ReductionMode::Reduced {
        return Err(ModelError::ModeError {
            expected: ReductionMode::Reduced,
            actual: system.mode,
        });
    }
    let [e1, e2] = electric_field(system.selection, &system.config);
    let ab = rat(system.config.alpha) * rat(system.config.b);
    // p1 = -alpha B E2, p2 = +alpha B E1 (eps_12 = +1)
    let p1_sub = e2.scale(&ab).neg();
    let p2_sub = e1.scale(&ab);
    Ok(canonical_angular_momentum()
        .substitute_momenta(&p1_sub, &p2_sub)
        .normalize_radial())
}
