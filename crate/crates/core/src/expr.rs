//! Exact algebra for planar phase-space functions.
//!
//! Every expression is a finite sum of monomials
//! `c * x1^a x2^b p1^c p2^d (r2)^e` where `r2 = x1^2 + x2^2` and the
//! radial exponent `e` may be negative. Coefficients are exact rationals,
//! so Poisson brackets and constraint algebra come out exact; evaluation
//! at a numeric phase point is the only lossy operation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::{BigRational, One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum ExprError {
    #[error("evaluation at the origin with negative radial power")]
    DomainError,
    #[error("cannot parse expression: {0}")]
    Parse(String),
}

/// The four canonical phase-space variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    P1,
    P2,
}

impl Var {
    pub fn as_str(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::P1 => "p1",
            Var::P2 => "p2",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A numeric phase point used for evaluation and sampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: [f64; 2],
    pub p: [f64; 2],
}

impl PhasePoint {
    pub fn new(x: [f64; 2], p: [f64; 2]) -> Self {
        Self { x, p }
    }

    pub fn r2(&self) -> f64 {
        self.x[0] * self.x[0] + self.x[1] * self.x[1]
    }
}

type ExpKey = ([u32; 2], [u32; 2], i32);

/// One term `coeff * x1^a x2^b p1^c p2^d (r2)^e`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: BigRational,
    pub x_exp: [u32; 2],
    pub p_exp: [u32; 2],
    pub radial_pow: i32,
}

impl Monomial {
    pub fn new(coeff: BigRational, x_exp: [u32; 2], p_exp: [u32; 2], radial_pow: i32) -> Self {
        Self {
            coeff,
            x_exp,
            p_exp,
            radial_pow,
        }
    }

    fn key(&self) -> ExpKey {
        (self.x_exp, self.p_exp, self.radial_pow)
    }

    /// Total polynomial degree ignoring the radial factor.
    pub fn poly_degree(&self) -> u32 {
        self.x_exp[0] + self.x_exp[1] + self.p_exp[0] + self.p_exp[1]
    }
}

/// Canonical sum of monomials: sorted by exponent key, merged, no zeros.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PhaseExpression {
    terms: Vec<Monomial>,
}

impl PhaseExpression {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_terms(vec![Monomial::new(c, [0, 0], [0, 0], 0)])
    }

    /// Exact conversion: every finite f64 is a dyadic rational.
    pub fn from_f64(c: f64) -> Self {
        Self::constant(rat(c))
    }

    pub fn var(v: Var) -> Self {
        let (x_exp, p_exp) = match v {
            Var::X1 => ([1, 0], [0, 0]),
            Var::X2 => ([0, 1], [0, 0]),
            Var::P1 => ([0, 0], [1, 0]),
            Var::P2 => ([0, 0], [0, 1]),
        };
        Self::from_terms(vec![Monomial::new(BigRational::one(), x_exp, p_exp, 0)])
    }

    /// `(r2)^pow` with `r2 = x1^2 + x2^2`.
    pub fn radial(pow: i32) -> Self {
        Self::from_terms(vec![Monomial::new(BigRational::one(), [0, 0], [0, 0], pow)])
    }

    pub fn from_terms(terms: Vec<Monomial>) -> Self {
        let mut map: BTreeMap<ExpKey, BigRational> = BTreeMap::new();
        for t in terms {
            let entry = map.entry(t.key()).or_insert_with(BigRational::zero);
            *entry += t.coeff;
        }
        Self::from_map(map)
    }

    fn from_map(map: BTreeMap<ExpKey, BigRational>) -> Self {
        let terms = map
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((x_exp, p_exp, radial_pow), coeff)| Monomial {
                coeff,
                x_exp,
                p_exp,
                radial_pow,
            })
            .collect();
        Self { terms }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// Structural zero (empty canonical term list).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the expression is a constant (including 0).
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.as_slice() {
            [] => Some(BigRational::zero()),
            [t] if t.x_exp == [0, 0] && t.p_exp == [0, 0] && t.radial_pow == 0 => {
                Some(t.coeff.clone())
            }
            _ => None,
        }
    }

    pub fn has_negative_radial_pow(&self) -> bool {
        self.terms.iter().any(|t| t.radial_pow < 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(terms)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Monomial::new(-t.coeff.clone(), t.x_exp, t.p_exp, t.radial_pow))
                .collect(),
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Monomial::new(&t.coeff * c, t.x_exp, t.p_exp, t.radial_pow))
                .collect(),
        }
    }

    pub fn scale_f64(&self, c: f64) -> Self {
        self.scale(&rat(c))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut map: BTreeMap<ExpKey, BigRational> = BTreeMap::new();
        for a in &self.terms {
            for b in &other.terms {
                let key = (
                    [a.x_exp[0] + b.x_exp[0], a.x_exp[1] + b.x_exp[1]],
                    [a.p_exp[0] + b.p_exp[0], a.p_exp[1] + b.p_exp[1]],
                    a.radial_pow + b.radial_pow,
                );
                let entry = map.entry(key).or_insert_with(BigRational::zero);
                *entry += &a.coeff * &b.coeff;
            }
        }
        Self::from_map(map)
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exact partial derivative with the chain rule on the radial factor:
    /// d(r2)^e/dx_i = 2e x_i (r2)^{e-1}.
    pub fn partial_derivative(&self, var: Var) -> Self {
        let mut out: Vec<Monomial> = Vec::new();
        for t in &self.terms {
            match var {
                Var::X1 | Var::X2 => {
                    let i = if var == Var::X1 { 0 } else { 1 };
                    if t.x_exp[i] > 0 {
                        let mut x_exp = t.x_exp;
                        x_exp[i] -= 1;
                        out.push(Monomial::new(
                            &t.coeff * BigRational::from_integer(t.x_exp[i].into()),
                            x_exp,
                            t.p_exp,
                            t.radial_pow,
                        ));
                    }
                    if t.radial_pow != 0 {
                        let mut x_exp = t.x_exp;
                        x_exp[i] += 1;
                        out.push(Monomial::new(
                            &t.coeff * BigRational::from_integer((2 * t.radial_pow).into()),
                            x_exp,
                            t.p_exp,
                            t.radial_pow - 1,
                        ));
                    }
                }
                Var::P1 | Var::P2 => {
                    let i = if var == Var::P1 { 0 } else { 1 };
                    if t.p_exp[i] > 0 {
                        let mut p_exp = t.p_exp;
                        p_exp[i] -= 1;
                        out.push(Monomial::new(
                            &t.coeff * BigRational::from_integer(t.p_exp[i].into()),
                            t.x_exp,
                            p_exp,
                            t.radial_pow,
                        ));
                    }
                }
            }
        }
        Self::from_terms(out)
    }

    /// Best-effort rewrite of a full `x1^2 + x2^2` pair-sum at matching
    /// exponents into the radial factor. Only merges with exactly equal
    /// coefficients (anything else would not reduce the term count).
    /// Runs to a fixed point, so it is idempotent.
    pub fn normalize_radial(&self) -> Self {
        let mut map: BTreeMap<ExpKey, BigRational> = BTreeMap::new();
        for t in &self.terms {
            map.insert(t.key(), t.coeff.clone());
        }
        loop {
            let keys: Vec<ExpKey> = map.keys().cloned().collect();
            let mut merged = false;
            for key in keys {
                let (x, p, e) = key;
                if x[0] < 2 {
                    continue;
                }
                let partner = ([x[0] - 2, x[1] + 2], p, e);
                let (Some(c1), Some(c2)) = (map.get(&key), map.get(&partner)) else {
                    continue;
                };
                if c1 != c2 {
                    continue;
                }
                let c = c1.clone();
                map.remove(&key);
                map.remove(&partner);
                let target = ([x[0] - 2, x[1]], p, e + 1);
                let entry = map.entry(target).or_insert_with(BigRational::zero);
                *entry += c;
                if entry.is_zero() {
                    map.remove(&target);
                }
                merged = true;
                break;
            }
            if !merged {
                break;
            }
        }
        Self::from_map(map)
    }

    pub fn evaluate(&self, pt: &PhasePoint) -> Result<f64, ExprError> {
        let r2 = pt.r2();
        let mut total = 0.0;
        for t in &self.terms {
            if t.radial_pow < 0 && r2 == 0.0 {
                return Err(ExprError::DomainError);
            }
            let mut v = t.coeff.to_f64().expect("rational fits in f64");
            v *= pt.x[0].powi(t.x_exp[0] as i32);
            v *= pt.x[1].powi(t.x_exp[1] as i32);
            v *= pt.p[0].powi(t.p_exp[0] as i32);
            v *= pt.p[1].powi(t.p_exp[1] as i32);
            v *= r2.powi(t.radial_pow);
            total += v;
        }
        Ok(total)
    }

    /// Substitute expressions (in x only, typically) for p1 and p2.
    pub fn substitute_momenta(&self, p1: &Self, p2: &Self) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            let base = Self::from_terms(vec![Monomial::new(
                t.coeff.clone(),
                t.x_exp,
                [0, 0],
                t.radial_pow,
            )]);
            let term = base
                .mul(&p1.powi(t.p_exp[0]))
                .mul(&p2.powi(t.p_exp[1]));
            out = out.add(&term);
        }
        out
    }

    /// True when the expression vanishes at every given point.
    pub fn vanishes_at(&self, points: &[PhasePoint], tol: f64) -> bool {
        points.iter().all(|pt| match self.evaluate(pt) {
            Ok(v) => v.abs() <= tol,
            Err(_) => false,
        })
    }

    /// Zero test: canonicalize and radially normalize; if residual terms
    /// remain, fall back to evaluation at 8 seeded random points.
    pub fn is_equivalent_zero(&self, seed: u64) -> bool {
        let n = self.normalize_radial();
        if n.is_zero() {
            return true;
        }
        n.vanishes_at(&sample_points(8, seed), 1e-9)
    }

    /// Evaluation-based equivalence of two expressions.
    pub fn is_equivalent(&self, other: &Self, seed: u64) -> bool {
        self.sub(other).is_equivalent_zero(seed)
    }

    /// Lower to f64 coefficients for fast repeated evaluation.
    pub fn compile(&self) -> CompiledExpression {
        CompiledExpression {
            terms: self
                .terms
                .iter()
                .map(|t| CompiledTerm {
                    coeff: t.coeff.to_f64().expect("rational fits in f64"),
                    x_exp: [t.x_exp[0] as i32, t.x_exp[1] as i32],
                    p_exp: [t.p_exp[0] as i32, t.p_exp[1] as i32],
                    radial_pow: t.radial_pow,
                })
                .collect(),
        }
    }
}

/// `{f, g} = sum_i df/dx_i dg/dp_i - df/dp_i dg/dx_i` with epsilon_12 = +1
/// orientation throughout the crate.
pub fn poisson_bracket(f: &PhaseExpression, g: &PhaseExpression) -> PhaseExpression {
    let mut out = PhaseExpression::zero();
    for (xv, pv) in [(Var::X1, Var::P1), (Var::X2, Var::P2)] {
        out = out.add(&f.partial_derivative(xv).mul(&g.partial_derivative(pv)));
        out = out.sub(&f.partial_derivative(pv).mul(&g.partial_derivative(xv)));
    }
    out
}

/// Exact rational from a finite f64.
pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Deterministic sample points in the annulus 0.5 <= r <= 2.0 with momenta
/// uniform in [-2, 2]. Away from the origin so negative radial powers are
/// always evaluable.
pub fn sample_points(n: usize, seed: u64) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = rng.gen_range(0.5..2.0);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            PhasePoint {
                x: [r * theta.cos(), r * theta.sin()],
                p: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    coeff: f64,
    x_exp: [i32; 2],
    p_exp: [i32; 2],
    radial_pow: i32,
}

/// f64-coefficient form of a [`PhaseExpression`] for tight loops
/// (trajectory integration evaluates the vector field millions of times).
#[derive(Clone, Debug)]
pub struct CompiledExpression {
    terms: Vec<CompiledTerm>,
}

impl CompiledExpression {
    pub fn eval(&self, pt: &PhasePoint) -> f64 {
        let r2 = pt.r2();
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * pt.x[0].powi(t.x_exp[0])
                    * pt.x[1].powi(t.x_exp[1])
                    * pt.p[0].powi(t.p_exp[0])
                    * pt.p[1].powi(t.p_exp[1])
                    * r2.powi(t.radial_pow)
            })
            .sum()
    }
}

impl fmt::Display for PhaseExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let rendered: Vec<String> = self.terms.iter().map(render_term).collect();
        f.write_str(&rendered.join(" + "))
    }
}

fn render_term(t: &Monomial) -> String {
    let mut factors: Vec<String> = Vec::new();
    let vars = [
        ("x1", t.x_exp[0] as i32),
        ("x2", t.x_exp[1] as i32),
        ("p1", t.p_exp[0] as i32),
        ("p2", t.p_exp[1] as i32),
        ("r2", t.radial_pow),
    ];
    for (name, e) in vars {
        match e {
            0 => {}
            1 => factors.push(name.to_string()),
            _ => factors.push(format!("{name}^{e}")),
        }
    }
    if factors.is_empty() {
        return t.coeff.to_string();
    }
    if t.coeff.is_one() {
        factors.join("*")
    } else if (-t.coeff.clone()).is_one() {
        format!("-{}", factors.join("*"))
    } else {
        format!("{}*{}", t.coeff, factors.join("*"))
    }
}

impl FromStr for PhaseExpression {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "0" {
            return Ok(Self::zero());
        }
        let mut terms = Vec::new();
        for raw in s.split('+') {
            terms.push(parse_term(raw.trim())?);
        }
        Ok(Self::from_terms(terms))
    }
}

fn parse_term(s: &str) -> Result<Monomial, ExprError> {
    if s.is_empty() {
        return Err(ExprError::Parse("empty term".into()));
    }
    let mut coeff = BigRational::one();
    let mut x_exp = [0u32; 2];
    let mut p_exp = [0u32; 2];
    let mut radial_pow = 0i32;
    for factor in s.split('*') {
        let mut factor = factor.trim();
        if let Some(rest) = factor.strip_prefix('-') {
            // A bare leading minus on a variable factor, e.g. "-x1".
            if rest.chars().next().is_some_and(|c| c.is_alphabetic()) {
                coeff = -coeff;
                factor = rest;
            }
        }
        let (name, exp) = match factor.split_once('^') {
            Some((n, e)) => (
                n,
                e.parse::<i32>()
                    .map_err(|_| ExprError::Parse(format!("bad exponent in '{factor}'")))?,
            ),
            None => (factor, 1),
        };
        match name {
            "x1" | "x2" | "p1" | "p2" => {
                if exp < 0 {
                    return Err(ExprError::Parse(format!("negative power on {name}")));
                }
                let e = exp as u32;
                match name {
                    "x1" => x_exp[0] += e,
                    "x2" => x_exp[1] += e,
                    "p1" => p_exp[0] += e,
                    _ => p_exp[1] += e,
                }
            }
            "r2" => radial_pow += exp,
            _ => {
                let c = BigRational::from_str(name)
                    .map_err(|_| ExprError::Parse(format!("bad factor '{name}'")))?;
                coeff *= c;
            }
        }
    }
    Ok(Monomial::new(coeff, x_exp, p_exp, radial_pow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn x1() -> PhaseExpression {
        PhaseExpression::var(Var::X1)
    }
    fn x2() -> PhaseExpression {
        PhaseExpression::var(Var::X2)
    }
    fn p1() -> PhaseExpression {
        PhaseExpression::var(Var::P1)
    }
    fn p2() -> PhaseExpression {
        PhaseExpression::var(Var::P2)
    }

    #[test]
    fn additive_inverse_cancels() {
        assert!(x1().add(&x1().neg()).is_zero());
    }

    #[test]
    fn field_sum_has_two_terms() {
        // E1 component of k/r e_r plus (rho/2) r e_r, componentized.
        let e1_filament = x1().mul(&PhaseExpression::radial(-1)); // k = 1
        let e1_bulk = x1().scale(&rat(0.5)); // rho = 1
        let sum = e1_filament.add(&e1_bulk);
        assert_eq!(sum.terms().len(), 2);
    }

    #[test]
    fn pair_sum_equals_radial_monomial_by_evaluation() {
        let pair = x1().powi(2).add(&x2().powi(2));
        let radial = PhaseExpression::radial(1);
        for pt in sample_points(5, 11) {
            assert_abs_diff_eq!(
                pair.evaluate(&pt).unwrap(),
                radial.evaluate(&pt).unwrap(),
                epsilon = 1e-12
            );
        }
        assert_eq!(pair.normalize_radial(), radial);
    }

    #[test]
    fn mul_adds_exponents() {
        let f = x1().mul(&PhaseExpression::radial(-1));
        let sq = f.mul(&f);
        assert_eq!(sq.terms().len(), 1);
        assert_eq!(sq.terms()[0].x_exp, [2, 0]);
        assert_eq!(sq.terms()[0].radial_pow, -2);
    }

    #[test]
    fn filament_field_squared_is_k2_over_r2() {
        // sum_i (k x_i / r^2)^2 = k^2 / r^2 with k = 2
        let k = rat(2.0);
        let e1 = x1().mul(&PhaseExpression::radial(-1)).scale(&k);
        let e2 = x2().mul(&PhaseExpression::radial(-1)).scale(&k);
        let sq = e1.mul(&e1).add(&e2.mul(&e2)).normalize_radial();
        assert_eq!(sq, PhaseExpression::radial(-1).scale(&rat(4.0)));
    }

    #[test]
    fn inverse_radial_powers_cancel() {
        let prod = PhaseExpression::radial(1).mul(&PhaseExpression::radial(-1));
        assert_eq!(prod, PhaseExpression::one());
    }

    #[test]
    fn normalize_leaves_lone_square_alone() {
        let f = x1().powi(2);
        assert_eq!(f.normalize_radial(), f);
    }

    #[test]
    fn normalize_collapses_scaled_pair() {
        let f = x1()
            .powi(2)
            .mul(&PhaseExpression::radial(-1))
            .add(&x2().powi(2).mul(&PhaseExpression::radial(-1)));
        assert_eq!(f.normalize_radial(), PhaseExpression::one());
        for pt in sample_points(5, 3) {
            assert_abs_diff_eq!(f.evaluate(&pt).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let f = x1()
            .powi(4)
            .add(&x1().powi(2).mul(&x2().powi(2)).scale(&rat(2.0)))
            .add(&x2().powi(4))
            .add(&p1().mul(&x1()));
        assert_eq!(f.normalize_radial(), f.normalize_radial().normalize_radial());
    }

    #[test]
    fn derivative_of_filament_component() {
        // d(x1 r^-2)/dx1 = r^-2 - 2 x1^2 r^-4
        let f = x1().mul(&PhaseExpression::radial(-1));
        let d = f.partial_derivative(Var::X1);
        let expected = PhaseExpression::radial(-1).sub(
            &x1()
                .powi(2)
                .mul(&PhaseExpression::radial(-2))
                .scale(&rat(2.0)),
        );
        assert_eq!(d, expected);
        // finite-difference cross-check
        let h = 1e-6;
        for pt in sample_points(5, 7) {
            let mut hi = pt;
            let mut lo = pt;
            hi.x[0] += h;
            lo.x[0] -= h;
            let fd = (f.evaluate(&hi).unwrap() - f.evaluate(&lo).unwrap()) / (2.0 * h);
            let ex = d.evaluate(&pt).unwrap();
            assert!((fd - ex).abs() / ex.abs().max(1.0) < 1e-8, "{fd} vs {ex}");
        }
    }

    #[test]
    fn momentum_term_has_no_position_derivative() {
        assert!(p1().powi(2).partial_derivative(Var::X1).is_zero());
    }

    #[test]
    fn harmonic_force() {
        // d(1/2 K (x1^2 + x2^2))/dx1 = K x1 with K = 3
        let v = x1()
            .powi(2)
            .add(&x2().powi(2))
            .scale(&rat(1.5));
        assert_eq!(v.partial_derivative(Var::X1), x1().scale(&rat(3.0)));
    }

    #[test]
    fn canonical_brackets() {
        assert_eq!(poisson_bracket(&x1(), &p1()), PhaseExpression::one());
        assert!(poisson_bracket(&x1(), &x2()).is_zero());
        assert!(poisson_bracket(&p1(), &p2()).is_zero());
        assert_eq!(
            poisson_bracket(&x2(), &p2()),
            PhaseExpression::one()
        );
    }

    #[test]
    fn evaluate_examples() {
        let pt = PhasePoint::new([1.0, 1.0], [0.0, 0.0]);
        assert_abs_diff_eq!(
            PhaseExpression::radial(-1).evaluate(&pt).unwrap(),
            0.5
        );
        let j = x1().mul(&p2()).sub(&x2().mul(&p1()));
        let pt = PhasePoint::new([1.0, 0.0], [0.0, 2.0]);
        assert_abs_diff_eq!(j.evaluate(&pt).unwrap(), 2.0);
        // radial component of k/r at r = 2 with k = 1
        let e1 = x1().mul(&PhaseExpression::radial(-1));
        let pt = PhasePoint::new([2.0, 0.0], [0.0, 0.0]);
        assert_abs_diff_eq!(e1.evaluate(&pt).unwrap(), 0.5);
    }

    #[test]
    fn evaluate_rejects_origin_with_negative_radial() {
        let f = PhaseExpression::radial(-1);
        let origin = PhasePoint::new([0.0, 0.0], [1.0, 1.0]);
        assert!(matches!(f.evaluate(&origin), Err(ExprError::DomainError)));
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
            // degree <= 3, radial_pow >= -2
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

    #[test]
    fn bracket_antisymmetry_on_random_expressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let pts = sample_points(10, 42);
        for _ in 0..30 {
            let f = random_expression(&mut rng);
            let g = random_expression(&mut rng);
            let s = poisson_bracket(&f, &g).add(&poisson_bracket(&g, &f));
            assert!(s.is_zero(), "antisymmetry failed symbolically: {s}");
            assert!(s.vanishes_at(&pts, 1e-9));
        }
    }

    #[test]
    fn jacobi_identity_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pts = sample_points(6, 44);
        for _ in 0..25 {
            let f = random_expression(&mut rng);
            let g = random_expression(&mut rng);
            let h = random_expression(&mut rng);
            let s = poisson_bracket(&f, &poisson_bracket(&g, &h))
                .add(&poisson_bracket(&g, &poisson_bracket(&h, &f)))
                .add(&poisson_bracket(&h, &poisson_bracket(&f, &g)));
            for pt in &pts {
                let v = s.evaluate(pt).unwrap();
                let scale = [&f, &g, &h]
                    .iter()
                    .map(|e| e.evaluate(pt).unwrap().abs())
                    .fold(1.0_f64, f64::max);
                assert!(
                    v.abs() / scale.powi(3).max(1.0) < 1e-9,
                    "jacobi residual {v}"
                );
            }
        }
    }

    #[test]
    fn leibniz_rule_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..25 {
            let f = random_expression(&mut rng);
            let g = random_expression(&mut rng);
            let h = random_expression(&mut rng);
            let lhs = poisson_bracket(&f, &g.mul(&h));
            let rhs = poisson_bracket(&f, &g)
                .mul(&h)
                .add(&g.mul(&poisson_bracket(&f, &h)));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let h = 1e-5;
        for _ in 0..10 {
            let f = random_expression(&mut rng);
            for (var, idx, is_x) in [
                (Var::X1, 0, true),
                (Var::X2, 1, true),
                (Var::P1, 0, false),
                (Var::P2, 1, false),
            ] {
                let d = f.partial_derivative(var);
                for pt in sample_points(4, 47) {
                    let mut hi = pt;
                    let mut lo = pt;
                    if is_x {
                        hi.x[idx] += h;
                        lo.x[idx] -= h;
                    } else {
                        hi.p[idx] += h;
                        lo.p[idx] -= h;
                    }
                    let fd =
                        (f.evaluate(&hi).unwrap() - f.evaluate(&lo).unwrap()) / (2.0 * h);
                    let ex = d.evaluate(&pt).unwrap();
                    assert!(
                        (fd - ex).abs() / ex.abs().max(1.0) < 1e-6,
                        "{var}: {fd} vs {ex}"
                    );
                }
            }
        }
    }

    #[test]
    fn display_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        for _ in 0..40 {
            let f = random_expression(&mut rng);
            let text = f.to_string();
            let back: PhaseExpression = text.parse().unwrap();
            assert_eq!(f, back, "round trip failed for '{text}'");
        }
        assert_eq!("0".parse::<PhaseExpression>().unwrap(), PhaseExpression::zero());
    }

    #[test]
    fn display_readable_forms() {
        let f = x1().powi(2).scale(&rat(0.5));
        assert_eq!(f.to_string(), "1/2*x1^2");
        let g = PhaseExpression::radial(-1).neg();
        assert_eq!(g.to_string(), "-r2^-1");
    }

    #[test]
    fn compiled_matches_exact_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        for _ in 0..10 {
            let f = random_expression(&mut rng);
            let c = f.compile();
            for pt in sample_points(5, 50) {
                assert_abs_diff_eq!(
                    f.evaluate(&pt).unwrap(),
                    c.eval(&pt),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn substitute_momenta_linear_case() {
        // J = x1 p2 - x2 p1 with p1 -> -x2, p2 -> x1 gives x1^2 + x2^2.
        let j = x1().mul(&p2()).sub(&x2().mul(&p1()));
        let sub = j.substitute_momenta(&x2().neg(), &x1());
        assert_eq!(sub.normalize_radial(), PhaseExpression::radial(1));
    }
}
