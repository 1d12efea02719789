//! Dirac-Bergmann algorithm: constraint chains, first/second class
//! classification, Dirac brackets and the physical degree-of-freedom
//! count for the reduced models.

use std::collections::BTreeMap;

use num::{BigRational, One, Signed, Zero};
use serde::Serialize;

use crate::expr::{
    poisson_bracket, rat, sample_points, PhaseExpression, PhasePoint, Var,
};
use crate::models::{electric_field, HamiltonianSystem, ReductionMode};

/// Phase-space dimension of the planar model (x1, x2, p1, p2).
const PHASE_DIM: usize = 4;

/// Numeric rank threshold relative to the largest matrix entry.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ConstraintError {
    #[error("constraint chain still growing past generation {0}")]
    ChainOverflow(usize),
    #[error("system is not in reduced mode")]
    NotReduced,
    #[error("rank-deficient bracket matrix with inconsistent ranks across sample points")]
    DegeneratePoint,
    #[error("second-class bracket matrix is singular")]
    SingularMatrix,
    #[error("Dirac bracket is not constant: {0}")]
    NonConstantBracket(String),
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub expr: PhaseExpression,
    /// 0 = primary, 1 = secondary, ...
    pub generation: usize,
    pub label: String,
}

/// Matrix of pairwise Poisson brackets among constraints.
#[derive(Clone, Debug)]
pub struct BracketMatrix {
    pub entries: Vec<Vec<PhaseExpression>>,
}

impl BracketMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    /// Numeric evaluation at one phase point.
    pub fn evaluate(&self, pt: &PhasePoint) -> Option<Vec<Vec<f64>>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.evaluate(pt).ok()).collect())
            .collect()
    }

    /// Exact constant matrix, if every entry is a constant expression.
    pub fn as_constant(&self) -> Option<Vec<Vec<BigRational>>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.as_constant()).collect())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintClass {
    First,
    Second,
}

#[derive(Clone, Debug)]
pub struct ConstraintAnalysis {
    pub constraints: Vec<Constraint>,
    pub matrix: BracketMatrix,
    pub classification: Vec<ConstraintClass>,
    pub dof_count: usize,
    /// Dirac brackets among the canonical variables, keyed by name pairs.
    pub dirac_brackets: BTreeMap<(Var, Var), PhaseExpression>,
    pub theta: Option<f64>,
}

pub fn bracket_matrix(constraints: &[Constraint]) -> BracketMatrix {
    let entries = constraints
        .iter()
        .map(|ci| {
            constraints
                .iter()
                .map(|cj| poisson_bracket(&ci.expr, &cj.expr).normalize_radial())
                .collect()
        })
        .collect();
    BracketMatrix { entries }
}

/// Rank of an f64 matrix by Gaussian elimination with partial pivoting.
fn numeric_rank(mut m: Vec<Vec<f64>>) -> usize {
    let n = m.len();
    if n == 0 {
        return 0;
    }
    let scale = m
        .iter()
        .flatten()
        .fold(0.0_f64, |a, &v| a.max(v.abs()))
        .max(1.0);
    let tol = RANK_TOL * scale;
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..n).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
        });
        let Some(pivot) = pivot else { break };
        if m[pivot][col].abs() <= tol {
            continue;
        }
        m.swap(rank, pivot);
        for row in rank + 1..n {
            let f = m[row][col] / m[rank][col];
            for c in col..n {
                m[row][c] -= f * m[rank][c];
            }
        }
        rank += 1;
        if rank == n {
            break;
        }
    }
    rank
}

fn matrix_rank_at_points(
    matrix: &BracketMatrix,
    points: &[PhasePoint],
) -> Result<usize, ConstraintError> {
    let ranks: Vec<usize> = points
        .iter()
        .filter_map(|pt| matrix.evaluate(pt).map(numeric_rank))
        .collect();
    if ranks.is_empty() {
        return Err(ConstraintError::DegeneratePoint);
    }
    let max_rank = *ranks.iter().max().unwrap();
    // Rank deficiency together with disagreeing ranks signals that the
    // sampling hit a measure-zero locus; the caller should resample.
    if max_rank < matrix.size() && ranks.iter().any(|&r| r != max_rank) {
        return Err(ConstraintError::DegeneratePoint);
    }
    Ok(max_rank)
}

/// Fix the overall sign of a derived constraint so that the leading
/// canonical term has a positive coefficient (constraints are only
/// defined up to sign).
fn sign_normalize(expr: PhaseExpression) -> PhaseExpression {
    match expr.terms().first() {
        Some(t) if t.coeff.is_negative() => expr.neg(),
        _ => expr,
    }
}

/// Runs the consistency conditions phi_dot = {phi, H} ~ 0 starting from
/// the primary constraints. When the bracket matrix of the current set is
/// invertible at generic points, Lagrange multipliers absorb the
/// conditions and the chain stops; otherwise the on-surface reduction of
/// {phi, H} joins the chain as the next generation.
pub fn generate_constraint_chain(
    system: &HamiltonianSystem,
    max_generation: usize,
    seed: u64,
) -> Result<Vec<Constraint>, ConstraintError> {
    if system.mode != ReductionMode::Reduced {
        return Err(ConstraintError::NotReduced);
    }
    let points = sample_points(8, seed);
    let mut chain: Vec<Constraint> = system
        .primary_constraints
        .iter()
        .enumerate()
        .map(|(i, expr)| Constraint {
            expr: expr.clone(),
            generation: 0,
            label: format!("phi_{}^(0)", i + 1),
        })
        .collect();

    // On-surface substitution p_i = -alpha B eps_ij E_j; exact for chains
    // at most linear in p.
    let [e1, e2] = electric_field(system.selection, &system.config);
    let ab = rat(system.config.alpha) * rat(system.config.b);
    let p1_sub = e2.scale(&ab).neg();
    let p2_sub = e1.scale(&ab);

    for generation in 1..=max_generation {
        let matrix = bracket_matrix(&chain);
        if matrix_rank_at_points(&matrix, &points)? == chain.len() {
            return Ok(chain);
        }
        let frontier: Vec<Constraint> = chain
            .iter()
            .filter(|c| c.generation == generation - 1)
            .cloned()
            .collect();
        let mut appended = 0;
        for (i, c) in frontier.iter().enumerate() {
            let dot = poisson_bracket(&c.expr, &system.hamiltonian)
                .substitute_momenta(&p1_sub, &p2_sub)
                .normalize_radial();
            if dot.is_equivalent_zero(seed.wrapping_add(1)) {
                continue;
            }
            let dot = sign_normalize(dot);
            if chain
                .iter()
                .any(|existing| existing.expr.is_equivalent(&dot, seed.wrapping_add(2)))
            {
                continue;
            }
            chain.push(Constraint {
                expr: dot,
                generation,
                label: format!("phi_{}^({})", i + 1, generation),
            });
            appended += 1;
        }
        if appended == 0 {
            return Ok(chain);
        }
    }
    // One more invertibility check after the last appends.
    let matrix = bracket_matrix(&chain);
    if matrix_rank_at_points(&matrix, &points)? == chain.len() {
        return Ok(chain);
    }
    Err(ConstraintError::ChainOverflow(max_generation))
}

/// Evaluates the bracket matrix at the sample points; rank gives the
/// second-class count, dof = (2 * dim - 2 * #first - #second) / 2.
pub fn classify(
    matrix: &BracketMatrix,
    points: &[PhasePoint],
) -> Result<(Vec<ConstraintClass>, usize), ConstraintError> {
    let n = matrix.size();
    let rank = matrix_rank_at_points(matrix, points)?;
    let n_first = n - rank;
    // A constraint whose row vanishes at every point brackets to zero
    // with the whole set: first class.
    let classification: Vec<ConstraintClass> = (0..n)
        .map(|i| {
            let row_zero = points.iter().all(|pt| {
                matrix.entries[i]
                    .iter()
                    .all(|e| e.evaluate(pt).map(|v| v.abs() < 1e-9).unwrap_or(false))
            });
            if row_zero {
                ConstraintClass::First
            } else {
                ConstraintClass::Second
            }
        })
        .collect();
    let counted_first = classification
        .iter()
        .filter(|c| **c == ConstraintClass::First)
        .count();
    if counted_first != n_first {
        return Err(ConstraintError::DegeneratePoint);
    }
    let dof = (2 * (PHASE_DIM / 2) - 2 * n_first - rank) / 2;
    Ok((classification, dof))
}

/// Exact inverse of a rational matrix by Gauss-Jordan elimination.
fn invert_rational(m: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] /= &p;
            inv[col][j] /= &p;
        }
        for row in 0..n {
            if row == col || a[row][col].is_zero() {
                continue;
            }
            let f = a[row][col].clone();
            for j in 0..n {
                let sub = &f * &a[col][j];
                a[row][j] -= sub;
                let sub = &f * &inv[col][j];
                inv[row][j] -= sub;
            }
        }
    }
    Some(inv)
}

/// {f, g}_D = {f, g} - {f, phi_k} C^-1_kl {phi_l, g} over the
/// second-class constraints. Exact when the bracket matrix is constant.
pub fn dirac_bracket(
    f: &PhaseExpression,
    g: &PhaseExpression,
    constraints: &[Constraint],
    matrix: &BracketMatrix,
) -> Result<PhaseExpression, ConstraintError> {
    let constant = matrix.as_constant().ok_or_else(|| {
        ConstraintError::NonConstantBracket(
            "bracket matrix has position-dependent entries".into(),
        )
    })?;
    let inv = invert_rational(&constant).ok_or(ConstraintError::SingularMatrix)?;
    let fk: Vec<PhaseExpression> = constraints
        .iter()
        .map(|c| poisson_bracket(f, &c.expr).normalize_radial())
        .collect();
    let lg: Vec<PhaseExpression> = constraints
        .iter()
        .map(|c| poisson_bracket(&c.expr, g).normalize_radial())
        .collect();
    let mut out = poisson_bracket(f, g);
    for (k, fk_expr) in fk.iter().enumerate() {
        for (l, lg_expr) in lg.iter().enumerate() {
            if inv[k][l].is_zero() {
                continue;
            }
            out = out.sub(&fk_expr.mul(lg_expr).scale(&inv[k][l]));
        }
    }
    Ok(out.normalize_radial())
}

/// Commutators from constant Dirac brackets: {.,.} -> [.,.] / (i hbar),
/// so [x1, x2] = -i theta with theta = hbar / (alpha rho B).
#[derive(Clone, Debug)]
pub struct CommutatorTable {
    /// Constant Dirac brackets keyed by variable pair; the commutator is
    /// i*hbar times the entry.
    pub brackets: BTreeMap<(Var, Var), BigRational>,
    /// Pairs whose Dirac bracket is position-dependent (reported, not
    /// quantized; e.g. {x_i, p_j}_D with the filament field on).
    pub non_constant: Vec<String>,
    pub theta: f64,
}

pub fn quantize_brackets(
    analysis: &ConstraintAnalysis,
    hbar: f64,
) -> Result<CommutatorTable, ConstraintError> {
    let mut brackets = BTreeMap::new();
    let mut non_constant = Vec::new();
    let mut theta = None;
    for ((a, b), expr) in &analysis.dirac_brackets {
        match expr.as_constant() {
            Some(c) => {
                if (*a, *b) == (Var::X1, Var::X2) {
                    // [x1, x2] = i hbar {x1, x2}_D = -i theta
                    theta = c.to_f64().map(|v| -hbar * v);
                }
                brackets.insert((*a, *b), c);
            }
            None => non_constant.push(format!("{{{a},{b}}}_D = {expr}")),
        }
    }
    let Some(theta) = theta else {
        return Err(ConstraintError::NonConstantBracket(
            "{x1,x2}_D is not a constant".into(),
        ));
    };
    Ok(CommutatorTable {
        brackets,
        non_constant,
        theta,
    })
}

use num::ToPrimitive;

/// Full pipeline: chain, matrix, classification, Dirac brackets among
/// canonical variables, and the noncommutativity scale theta.
pub fn analyze(
    system: &HamiltonianSystem,
    max_generation: usize,
    seed: u64,
) -> Result<ConstraintAnalysis, ConstraintError> {
    let constraints = generate_constraint_chain(system, max_generation, seed)?;
    let matrix = bracket_matrix(&constraints);
    let points = sample_points(8, seed);
    let (classification, dof_count) = classify(&matrix, &points)?;

    let mut dirac_brackets = BTreeMap::new();
    let constant = matrix.as_constant();
    if constant.is_some() {
        let vars = [Var::X1, Var::X2, Var::P1, Var::P2];
        for i in 0..vars.len() {
            for j in i + 1..vars.len() {
                let f = PhaseExpression::var(vars[i]);
                let g = PhaseExpression::var(vars[j]);
                let db = dirac_bracket(&f, &g, &constraints, &matrix)?;
                dirac_brackets.insert((vars[i], vars[j]), db);
            }
        }
    }

    let theta = dirac_brackets
        .get(&(Var::X1, Var::X2))
        .and_then(|e| e.as_constant())
        .and_then(|c| c.to_f64())
        .map(|v| -system.config.hbar * v)
        .filter(|v| *v != 0.0);

    Ok(ConstraintAnalysis {
        constraints,
        matrix,
        classification,
        dof_count,
        dirac_brackets,
        theta,
    })
}

/// JSON-facing form of a [`ConstraintAnalysis`].
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub constraints: Vec<ConstraintReportEntry>,
    pub matrix: Vec<Vec<String>>,
    pub classification: Vec<ConstraintClass>,
    pub dof_count: usize,
    pub dirac_brackets: BTreeMap<String, String>,
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstraintReportEntry {
    pub label: String,
    pub generation: usize,
    pub expr: String,
}

impl ConstraintAnalysis {
    pub fn report(&self) -> AnalysisReport {
        AnalysisReport {
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintReportEntry {
                    label: c.label.clone(),
                    generation: c.generation,
                    expr: c.expr.to_string(),
                })
                .collect(),
            matrix: self
                .matrix
                .entries
                .iter()
                .map(|row| row.iter().map(|e| e.to_string()).collect())
                .collect(),
            classification: self.classification.clone(),
            dof_count: self.dof_count,
            dirac_brackets: self
                .dirac_brackets
                .iter()
                .map(|((a, b), e)| (format!("{{{a},{b}}}_D"), e.to_string()))
                .collect(),
            theta: self.theta,
        }
    }
}

// Var needs an ordering to key the Dirac bracket table.
impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        fn idx(v: Var) -> u8 {
            match v {
                Var::X1 => 0,
                Var::X2 => 1,
                Var::P1 => 2,
                Var::P2 => 3,
            }
        }
        idx(*self).cmp(&idx(*other))
    }
}
