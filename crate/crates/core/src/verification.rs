//! The verification suite: every closed-form identity and spectrum the
//! derivation predicts, run end to end with fixed tolerances and runtime
//! budgets. Used by both the `verify` CLI subcommand and the acceptance
//! integration test.

use std::time::{Duration, Instant};

use num::{BigRational, One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::{analyze, bracket_matrix, ConstraintClass};
use crate::dynamics::{integrate, IntegrationOptions, Trajectory};
use crate::expr::{poisson_bracket, rat, sample_points, Monomial, PhaseExpression, PhasePoint, Var};
use crate::models::{build_model, FieldSelection, ModelConfig, ReductionMode};
use crate::quantum::{fam_spectrum, full_model_angular_spectrum};

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

/// Knobs for negative controls; default is the honest run.
#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Added to the config's theta when building the noncommutative
    /// plane, to demonstrate that a mismatched plane is caught.
    pub theta_perturbation: f64,
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    run_all_with(seed, VerifyOptions::default())
}

pub fn run_all_with(seed: u64, opts: VerifyOptions) -> Vec<CriterionResult> {
    vec![
        criterion_dirac_bracket(seed),
        criterion_fam_spectrum(seed, opts),
        criterion_integer_spectrum(),
        criterion_e2_ablation(seed),
        criterion_e1_ablation(seed),
        criterion_conservation(),
        criterion_bracket_properties(seed),
        criterion_shift_spacing(),
    ]
}

fn finish(
    name: &'static str,
    start: Instant,
    budget: Duration,
    result: Result<String, String>,
) -> CriterionResult {
    let elapsed = start.elapsed();
    match result {
        Ok(detail) if elapsed <= budget => CriterionResult {
            name,
            passed: true,
            detail,
            elapsed,
        },
        Ok(detail) => CriterionResult {
            name,
            passed: false,
            detail: format!("{detail}; exceeded runtime budget {budget:?}"),
            elapsed,
        },
        Err(detail) => CriterionResult {
            name,
            passed: false,
            detail,
            elapsed,
        },
    }
}

fn random_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    ModelConfig {
        m: rng.gen_range(0.2..2.0),
        alpha: rng.gen_range(0.2..3.0),
        b: rng.gen_range(0.2..3.0),
        k: rng.gen_range(0.1..2.0),
        rho: rng.gen_range(0.2..3.0),
        trap: rng.gen_range(0.2..3.0),
        hbar: 1.0,
    }
}

/// 1. For random configs with alpha*rho*B != 0, the Dirac bracket
/// {x1, x2}_D equals -1/(alpha rho B) exactly in rational arithmetic.
pub fn criterion_dirac_bracket(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = (|| {
        for trial in 0..10 {
            let config = random_config(&mut rng);
            let system = build_model(&config, FieldSelection::Both, ReductionMode::Reduced)
                .map_err(|e| e.to_string())?;
            let analysis = analyze(&system, 3, seed).map_err(|e| e.to_string())?;
            let db = analysis
                .dirac_brackets
                .get(&(Var::X1, Var::X2))
                .and_then(|e| e.as_constant())
                .ok_or_else(|| format!("trial {trial}: bracket not constant"))?;
            let expected =
                -BigRational::one() / (rat(config.alpha) * rat(config.rho) * rat(config.b));
            if db != expected {
                return Err(format!("trial {trial}: got {db}, want {expected}"));
            }
        }
        Ok("10/10 random configs give {x1,x2}_D = -1/(alpha rho B) exactly".to_string())
    })();
    finish("dirac-bracket", start, Duration::from_secs(1), result)
}

/// 2. Reduced-model spectrum J_n = alpha B k + (n + 1/2) hbar at the
/// default config (N = 64, first 32 eigenvalues, 1e-8) and for 5 random
/// configs with the closed-form formula as oracle.
pub fn criterion_fam_spectrum(seed: u64, opts: VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let result = (|| {
        let config = ModelConfig::default();
        if opts.theta_perturbation != 0.0 {
            // Negative control: a plane with the wrong theta must be
            // rejected rather than produce a spectrum.
            let plane = crate::quantum::build_noncommutative_plane(
                config.theta() + opts.theta_perturbation,
                64,
            )
            .map_err(|e| e.to_string())?;
            return match crate::quantum::fam_operator(&config, FieldSelection::Both, &plane) {
                Err(crate::quantum::QuantumError::ThetaMismatch { .. }) => {
                    Err("injected theta mismatch detected (negative control)".to_string())
                }
                other => Err(format!(
                    "perturbed theta was not rejected: {other:?}"
                )),
            };
        }
        let s = fam_spectrum(&config, FieldSelection::Both, 64, 0.5)
            .map_err(|e| e.to_string())?;
        if s.trusted_count < 32 {
            return Err(format!("only {} trusted eigenvalues", s.trusted_count));
        }
        for n in 0..32 {
            let want = 0.5 + n as f64 + 0.5;
            let got = s.eigenvalues[n];
            if (got - want).abs() > 1e-8 {
                return Err(format!("n={n}: {got} vs {want}"));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        for trial in 0..5 {
            let config = random_config(&mut rng);
            let s = fam_spectrum(&config, FieldSelection::Both, 32, 0.5)
                .map_err(|e| e.to_string())?;
            for n in 0..s.trusted_count {
                let want =
                    config.alpha * config.b * config.k + (n as f64 + 0.5) * config.hbar;
                if (s.eigenvalues[n] - want).abs() > 1e-8 {
                    return Err(format!(
                        "random trial {trial}, n={n}: {} vs {want}",
                        s.eigenvalues[n]
                    ));
                }
            }
        }
        Ok("J_n = alpha B k + (n + 1/2) hbar on 32 levels and 5 random configs".to_string())
    })();
    finish("fam-spectrum", start, Duration::from_secs(5), result)
}

/// 3. Fourier-grid angular momentum of the unreduced model: eigenvalues
/// are integer multiples of hbar to 1e-10.
pub fn criterion_integer_spectrum() -> CriterionResult {
    let start = Instant::now();
    let result = (|| {
        for (grid, hbar) in [(16usize, 1.0), (32, 1.0), (16, 2.0)] {
            let s = full_model_angular_spectrum(grid, hbar).map_err(|e| e.to_string())?;
            for (i, ev) in s.eigenvalues.iter().enumerate() {
                let n = ev / hbar;
                if (n - n.round()).abs() > 1e-10 {
                    return Err(format!("grid {grid}: eigenvalue {ev} not an integer multiple"));
                }
                let want = hbar * (i as f64 - grid as f64 / 2.0);
                if (ev - want).abs() > 1e-10 {
                    return Err(format!("grid {grid}: {ev} vs {want}"));
                }
            }
        }
        Ok("Fourier-grid J has spectrum n*hbar, each integer once".to_string())
    })();
    finish("integer-spectrum", start, Duration::from_secs(1), result)
}

/// 4. E2-only ablation: half-integer spectrum (n + 1/2) hbar and Dirac
/// brackets identical to the both-fields case.
pub fn criterion_e2_ablation(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let result = (|| {
        let config = ModelConfig::default();
        let s = fam_spectrum(&config, FieldSelection::E2Only, 64, 0.5)
            .map_err(|e| e.to_string())?;
        for n in 0..s.trusted_count {
            let want = (n as f64 + 0.5) * config.hbar;
            if (s.eigenvalues[n] - want).abs() > 1e-8 {
                return Err(format!("n={n}: {} vs {want}", s.eigenvalues[n]));
            }
        }
        let both = build_model(&config, FieldSelection::Both, ReductionMode::Reduced)
            .map_err(|e| e.to_string())?;
        let e2 = build_model(&config, FieldSelection::E2Only, ReductionMode::Reduced)
            .map_err(|e| e.to_string())?;
        let a_both = analyze(&both, 3, seed).map_err(|e| e.to_string())?;
        let a_e2 = analyze(&e2, 3, seed).map_err(|e| e.to_string())?;
        let key = (Var::X1, Var::X2);
        if a_both.dirac_brackets.get(&key) != a_e2.dirac_brackets.get(&key) {
            return Err("{x1,x2}_D differs between Both and E2Only".to_string());
        }
        Ok("E2-only spectrum is (n + 1/2) hbar; Dirac brackets match the both-fields case"
            .to_string())
    })();
    finish("e2-ablation", start, Duration::from_secs(5), result)
}

/// 5. E1-only ablation: chain of exactly 4 constraints, secondaries equal
/// (alpha k / r^2) E_i + K x_i in canonical form, all second class, 0 dof.
pub fn criterion_e1_ablation(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let result = (|| {
        let config = ModelConfig::default();
        let system = build_model(&config, FieldSelection::E1Only, ReductionMode::Reduced)
            .map_err(|e| e.to_string())?;
        let analysis = analyze(&system, 3, seed).map_err(|e| e.to_string())?;
        if analysis.constraints.len() != 4 {
            return Err(format!("chain has {} constraints", analysis.constraints.len()));
        }
        // (alpha k / r^2) E_i + K x_i = alpha k^2 x_i r^-4 + K x_i
        let ak2 = rat(config.alpha) * rat(config.k) * rat(config.k);
        for (i, var) in [Var::X1, Var::X2].into_iter().enumerate() {
            let expected = PhaseExpression::var(var)
                .mul(&PhaseExpression::radial(-2))
                .scale(&ak2)
                .add(&PhaseExpression::var(var).scale(&rat(config.trap)));
            if analysis.constraints[2 + i].expr != expected {
                return Err(format!(
                    "secondary {i}: {} vs {expected}",
                    analysis.constraints[2 + i].expr
                ));
            }
        }
        if !analysis
            .classification
            .iter()
            .all(|c| *c == ConstraintClass::Second)
        {
            return Err("not all constraints second class".to_string());
        }
        if analysis.dof_count != 0 {
            return Err(format!("dof = {}", analysis.dof_count));
        }
        Ok("4 second-class constraints, secondaries in closed form, 0 dof".to_string())
    })();
    finish("e1-ablation", start, Duration::from_secs(2), result)
}

/// 6. RK4 trajectory of the full model at the default config keeps the
/// relative drift of J and H below 1e-6 over 10^4 steps at dt = 1e-3.
pub fn criterion_conservation() -> CriterionResult {
    let start = Instant::now();
    let result = (|| {
        let config = ModelConfig::default();
        let system = build_model(&config, FieldSelection::Both, ReductionMode::Full)
            .map_err(|e| e.to_string())?;
        // Enough angular momentum to stay clear of the attractive
        // -alpha k^2 / (2 r^2) singularity at the origin.
        let initial = PhasePoint::new([1.5, 0.0], [0.0, 1.0]);
        let traj = integrate(&system, initial, IntegrationOptions::new(1e-3, 10_000))
            .map_err(|e| e.to_string())?;
        let j_drift = Trajectory::max_relative_drift(&traj.j_series);
        let h_drift = Trajectory::max_relative_drift(&traj.h_series);
        if j_drift >= 1e-6 {
            return Err(format!("J drift {j_drift:.3e}"));
        }
        if h_drift >= 1e-6 {
            return Err(format!("H drift {h_drift:.3e}"));
        }
        Ok(format!(
            "J drift {j_drift:.2e}, H drift {h_drift:.2e} over 10^4 RK4 steps"
        ))
    })();
    finish("conservation", start, Duration::from_secs(10), result)
}

fn random_expression(rng: &mut ChaCha8Rng) -> PhaseExpression {
    let n_terms = rng.gen_range(1..=3);
    let mut terms = Vec::new();
    for _ in 0..n_terms {
        let coeff = BigRational::new(
            rng.gen_range(-6i64..=6).into(),
            rng.gen_range(1i64..=4).into(),
        );
        if coeff.is_zero() {
            continue;
        }
        let mut budget = 3u32;
        let draw = |rng: &mut ChaCha8Rng, budget: &mut u32| {
            let e = rng.gen_range(0..=(*budget).min(2));
            *budget -= e;
            e
        };
        let x_exp = [draw(rng, &mut budget), draw(rng, &mut budget)];
        let p_exp = [draw(rng, &mut budget), draw(rng, &mut budget)];
        terms.push(Monomial::new(coeff, x_exp, p_exp, rng.gen_range(-2..=2)));
    }
    PhaseExpression::from_terms(terms)
}

/// 7. Bracket engine properties on >= 100 random triples (antisymmetry,
/// Jacobi, Leibniz) plus the exact constraint bracket matrix
/// alpha rho B * epsilon.
pub fn criterion_bracket_properties(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let result = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
        let pts = sample_points(4, seed.wrapping_add(8));
        for trial in 0..100 {
            let f = random_expression(&mut rng);
            let g = random_expression(&mut rng);
            let h = random_expression(&mut rng);
            let anti = poisson_bracket(&f, &g).add(&poisson_bracket(&g, &f));
            if !anti.is_zero() && !anti.vanishes_at(&pts, 1e-9) {
                return Err(format!("antisymmetry failed on triple {trial}"));
            }
            let jacobi = poisson_bracket(&f, &poisson_bracket(&g, &h))
                .add(&poisson_bracket(&g, &poisson_bracket(&h, &f)))
                .add(&poisson_bracket(&h, &poisson_bracket(&f, &g)));
            for pt in &pts {
                let v = jacobi.evaluate(pt).map_err(|e| e.to_string())?;
                let scale = [&f, &g, &h]
                    .iter()
                    .map(|e| e.evaluate(pt).unwrap_or(0.0).abs())
                    .fold(1.0_f64, f64::max);
                if v.abs() / scale.powi(3).max(1.0) >= 1e-9 {
                    return Err(format!("Jacobi residual {v:.3e} on triple {trial}"));
                }
            }
            let lhs = poisson_bracket(&f, &g.mul(&h));
            let rhs = poisson_bracket(&f, &g)
                .mul(&h)
                .add(&g.mul(&poisson_bracket(&f, &h)));
            if lhs != rhs {
                return Err(format!("Leibniz failed on triple {trial}"));
            }
        }
        // Exact constraint bracket matrix for the both-fields reduction.
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(9));
        let config = random_config(&mut rng);
        let system = build_model(&config, FieldSelection::Both, ReductionMode::Reduced)
            .map_err(|e| e.to_string())?;
        let chain: Vec<crate::constraints::Constraint> = system
            .primary_constraints
            .iter()
            .enumerate()
            .map(|(i, expr)| crate::constraints::Constraint {
                expr: expr.clone(),
                generation: 0,
                label: format!("phi_{}", i + 1),
            })
            .collect();
        let matrix = bracket_matrix(&chain);
        let arb = rat(config.alpha) * rat(config.rho) * rat(config.b);
        let c01 = matrix.entries[0][1]
            .as_constant()
            .ok_or("bracket {phi1, phi2} not constant")?;
        let c10 = matrix.entries[1][0]
            .as_constant()
            .ok_or("bracket {phi2, phi1} not constant")?;
        if c01 != arb || c10 != -arb.clone() || !matrix.entries[0][0].is_zero() {
            return Err(format!("matrix entries {c01}, {c10} vs alpha rho B = {arb}"));
        }
        Ok("100 random triples pass antisymmetry/Jacobi/Leibniz; constraint matrix exact"
            .to_string())
    })();
    finish("bracket-properties", start, Duration::from_secs(10), result)
}

/// 8. Shift law (k -> k + delta shifts every trusted eigenvalue by
/// alpha B delta to 1e-10) and spacing law (consecutive trusted
/// eigenvalues differ by hbar to 1e-8).
pub fn criterion_shift_spacing() -> CriterionResult {
    let start = Instant::now();
    let result = (|| {
        let base = ModelConfig::default();
        let delta = 0.3;
        let shifted = ModelConfig {
            k: base.k + delta,
            ..base
        };
        let s0 =
            fam_spectrum(&base, FieldSelection::Both, 32, 0.5).map_err(|e| e.to_string())?;
        let s1 =
            fam_spectrum(&shifted, FieldSelection::Both, 32, 0.5).map_err(|e| e.to_string())?;
        let n = s0.trusted_count.min(s1.trusted_count);
        let want = base.alpha * base.b * delta;
        for i in 0..n {
            let got = s1.eigenvalues[i] - s0.eigenvalues[i];
            if (got - want).abs() > 1e-10 {
                return Err(format!("shift at n={i}: {got} vs {want}"));
            }
        }
        for w in s0.eigenvalues[..s0.trusted_count].windows(2) {
            if ((w[1] - w[0]) - base.hbar).abs() > 1e-8 {
                return Err(format!("spacing {} vs hbar", w[1] - w[0]));
            }
        }
        Ok("k-shift moves all trusted levels by alpha B delta; spacing is hbar".to_string())
    })();
    finish("shift-spacing", start, Duration::from_secs(5), result)
}
