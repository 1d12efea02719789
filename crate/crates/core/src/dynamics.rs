//! Classical trajectory integration for the full (unconstrained) model.
//!
//! Fixed-step RK4 with per-step logging of the angular momentum, the
//! energy and the would-be primary-constraint residuals. Conservation is
//! monitored, not enforced; the measured drift is itself a test.

use serde::Serialize;

use crate::expr::{CompiledExpression, PhasePoint, Var};
use crate::models::{
    build_model, electric_field, primary_constraints, reduce_j_on_constraint_surface,
    FieldSelection, HamiltonianSystem, ModelConfig, ModelError, ReductionMode,
};

pub const DEFAULT_R_MIN: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("trajectory integration requires a full-mode system")]
    ModeError,
    #[error("trajectory entered r < {r_min:.3e} at t = {t} (singular filament field)")]
    OriginApproach { t: f64, r_min: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("reduction probe requires configs sharing alpha, B, k, rho, K")]
    MismatchedConfigs,
}

/// Time series of phase points with logged invariants.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub j_series: Vec<f64>,
    pub h_series: Vec<f64>,
    pub phi_series: [Vec<f64>; 2],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_relative_drift(series: &[f64]) -> f64 {
        let first = series[0];
        let scale = first.abs().max(1e-12);
        series
            .iter()
            .map(|v| (v - first).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Hamilton's equations xdot_i = dH/dp_i, pdot_i = -dH/dx_i compiled to
/// fast f64 evaluators.
pub struct EquationsOfMotion {
    dx: [CompiledExpression; 2],
    dp: [CompiledExpression; 2],
}

impl EquationsOfMotion {
    pub fn rhs(&self, pt: &PhasePoint) -> [f64; 4] {
        [
            self.dx[0].eval(pt),
            self.dx[1].eval(pt),
            self.dp[0].eval(pt),
            self.dp[1].eval(pt),
        ]
    }
}

pub fn equations_of_motion(
    system: &HamiltonianSystem,
) -> Result<EquationsOfMotion, DynamicsError> {
    if system.mode != ReductionMode::Full {
        return Err(DynamicsError::ModeError);
    }
    let h = &system.hamiltonian;
    Ok(EquationsOfMotion {
        dx: [
            h.partial_derivative(Var::P1).compile(),
            h.partial_derivative(Var::P2).compile(),
        ],
        dp: [
            h.partial_derivative(Var::X1).neg().compile(),
            h.partial_derivative(Var::X2).neg().compile(),
        ],
    })
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub steps: usize,
    pub r_min: f64,
}

impl IntegrationOptions {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            r_min: DEFAULT_R_MIN,
        }
    }
}

fn add_scaled(s: &PhasePoint, d: &[f64; 4], f: f64) -> PhasePoint {
    PhasePoint {
        x: [s.x[0] + f * d[0], s.x[1] + f * d[1]],
        p: [s.p[0] + f * d[2], s.p[1] + f * d[3]],
    }
}

/// Fixed-step RK4. Guards the filament singularity (r_min) whenever the
/// Hamiltonian carries negative radial powers.
pub fn integrate(
    system: &HamiltonianSystem,
    initial: PhasePoint,
    opts: IntegrationOptions,
) -> Result<Trajectory, DynamicsError> {
    let eom = equations_of_motion(system)?;
    let h = system.hamiltonian.compile();
    let j = crate::models::canonical_angular_momentum().compile();
    let [phi1, phi2] = primary_constraints(system.selection, &system.config);
    let (phi1, phi2) = (phi1.compile(), phi2.compile());
    let singular = system.hamiltonian.has_negative_radial_pow();

    let n = opts.steps;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        j_series: Vec::with_capacity(n + 1),
        h_series: Vec::with_capacity(n + 1),
        phi_series: [Vec::with_capacity(n + 1), Vec::with_capacity(n + 1)],
    };
    let mut state = initial;
    for step in 0..=n {
        let t = step as f64 * opts.dt;
        if singular && state.r2() < opts.r_min * opts.r_min {
            return Err(DynamicsError::OriginApproach {
                t,
                r_min: opts.r_min,
            });
        }
        traj.times.push(t);
        traj.states.push(state);
        traj.j_series.push(j.eval(&state));
        traj.h_series.push(h.eval(&state));
        traj.phi_series[0].push(phi1.eval(&state));
        traj.phi_series[1].push(phi2.eval(&state));
        if step == n {
            break;
        }
        let k1 = eom.rhs(&state);
        let k2 = eom.rhs(&add_scaled(&state, &k1, opts.dt / 2.0));
        let k3 = eom.rhs(&add_scaled(&state, &k2, opts.dt / 2.0));
        let k4 = eom.rhs(&add_scaled(&state, &k3, opts.dt));
        for i in 0..2 {
            state.x[i] += opts.dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            state.p[i] +=
                opts.dt / 6.0 * (k1[i + 2] + 2.0 * k2[i + 2] + 2.0 * k3[i + 2] + k4[i + 2]);
        }
    }
    Ok(traj)
}

/// Phase point on the constraint surface at position x:
/// p_i = -alpha B eps_ij E_j(x).
pub fn on_surface_point(
    config: &ModelConfig,
    selection: FieldSelection,
    x: [f64; 2],
) -> PhasePoint {
    let [e1, e2] = electric_field(selection, config);
    let pt = PhasePoint::new(x, [0.0, 0.0]);
    let ab = config.alpha * config.b;
    PhasePoint::new(
        x,
        [
            -ab * e2.evaluate(&pt).unwrap_or(0.0),
            ab * e1.evaluate(&pt).unwrap_or(0.0),
        ],
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeEntry {
    pub m: f64,
    /// Max over the run of |phi_i(t)|; None when the field coupling is
    /// off and the residual is meaningless.
    pub max_constraint_residual: Option<f64>,
    /// Max over the run of |J(t) - alpha B (k + rho r(t)^2 / 2)|.
    pub max_j_deviation: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub entries: Vec<ProbeEntry>,
    /// True when the residuals are nonincreasing down the mass sweep.
    pub monotone: bool,
}

/// Integrates the full model for each mass and reports how well each
/// trajectory tracks the constraint surface and the reduced-model
/// angular momentum. Configs must agree on everything except the mass.
pub fn reduction_probe(
    configs: &[ModelConfig],
    selection: FieldSelection,
    initial_x: [f64; 2],
    opts: IntegrationOptions,
) -> Result<ProbeReport, DynamicsError> {
    let first = configs.first().ok_or(DynamicsError::MismatchedConfigs)?;
    for c in configs {
        if (c.alpha, c.b, c.k, c.rho, c.trap) != (first.alpha, first.b, first.k, first.rho, first.trap)
        {
            return Err(DynamicsError::MismatchedConfigs);
        }
    }
    let coupled = first.alpha * first.b != 0.0;
    let mut entries = Vec::new();
    for config in configs {
        let system = build_model(config, selection, ReductionMode::Full)?;
        let initial = on_surface_point(config, selection, initial_x);
        let traj = integrate(&system, initial, opts)?;
        if !coupled {
            entries.push(ProbeEntry {
                m: config.m,
                max_constraint_residual: None,
                max_j_deviation: None,
            });
            continue;
        }
        let max_phi = traj.phi_series[0]
            .iter()
            .chain(&traj.phi_series[1])
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        // Reduced prediction evaluated along the trajectory.
        let reduced = build_model(config, selection, ReductionMode::Reduced)?;
        let j_pred = reduce_j_on_constraint_surface(&reduced)?.compile();
        let max_dev = traj
            .states
            .iter()
            .zip(&traj.j_series)
            .map(|(s, j)| (j - j_pred.eval(s)).abs())
            .fold(0.0_f64, f64::max);
        entries.push(ProbeEntry {
            m: config.m,
            max_constraint_residual: Some(max_phi),
            max_j_deviation: Some(max_dev),
        });
    }
    // Qualitative trend: residuals should not grow as the kinetic share
    // shrinks (masses sorted descending).
    let mut sorted = entries.clone();
    sorted.sort_by(|a, b| b.m.partial_cmp(&a.m).unwrap());
    let monotone = sorted
        .windows(2)
        .all(|w| match (w[0].max_constraint_residual, w[1].max_constraint_residual) {
            (Some(a), Some(b)) => b <= a * (1.0 + 1e-9),
            _ => true,
        });
    Ok(ProbeReport { entries, monotone })
}
