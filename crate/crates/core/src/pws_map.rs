//! Piecewise-smooth continuous maps built from two polynomial half-maps.
//!
//! Each half-map has the form
//!
//! ```text
//! f(x; mu, eta) = mu b(mu, eta) + A(mu, eta) x + N(x; mu, eta)
//! ```
//!
//! where `N` collects the quadratic and cubic monomials in `x`. Every
//! coefficient is a [`Poly2`] in the parameters. The model is exact: there are
//! no remainder terms. The switching manifold is `s = x[0] = 0`; states with
//! `s <= 0` are mapped by the left half-map.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly2;

pub type State = DVector<f64>;

/// Exponents of `x_1 .. x_n` in a nonlinear monomial.
pub type Monomial = Vec<u8>;

/// Side of the switching manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

impl Side {
    pub fn of(s: f64) -> Side {
        if s <= 0.0 {
            Side::L
        } else {
            Side::R
        }
    }

    /// Whether a point with first coordinate `s` lies on this side (boundary included).
    pub fn admits(self, s: f64) -> bool {
        match self {
            Side::L => s <= 0.0,
            Side::R => s >= 0.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::L => Side::R,
            Side::R => Side::L,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Side::L => 'L',
            Side::R => 'R',
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

fn monomial_label(m: &[u8]) -> String {
    m.iter().map(|e| e.to_string()).collect()
}

/// One smooth component of the map, as an exact polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfMap {
    dim: usize,
    b: Vec<Poly2>,
    a: Vec<Poly2>,
    #[serde(with = "monomial_keys")]
    nonlinear: Vec<BTreeMap<Monomial, Poly2>>,
}

/// Nonlinear terms keyed by their exponent digits (`"20"` for `x_1^2`), so
/// the map serializes to formats that require string keys.
mod monomial_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{monomial_label, Monomial};
    use crate::poly::Poly2;

    pub fn serialize<S: Serializer>(v: &[BTreeMap<Monomial, Poly2>], s: S) -> Result<S::Ok, S::Error> {
        let keyed: Vec<BTreeMap<String, &Poly2>> = v.iter().map(|m| m.iter().map(|(k, p)| (monomial_label(k), p)).collect()).collect();
        keyed.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BTreeMap<Monomial, Poly2>>, D::Error> {
        let keyed = Vec::<BTreeMap<String, Poly2>>::deserialize(d)?;
        keyed
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(k, p)| {
                        let exps = k.chars().map(|c| c.to_digit(10).map(|e| e as u8)).collect::<Option<Monomial>>();
                        exps.map(|e| (e, p)).ok_or_else(|| D::Error::custom(format!("bad monomial key {k:?}")))
                    })
                    .collect()
            })
            .collect()
    }
}

impl HalfMap {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self {
            dim,
            b: vec![Poly2::default(); dim],
            a: vec![Poly2::default(); dim * dim],
            nonlinear: vec![BTreeMap::new(); dim],
        }
    }

    /// Scalar half-map `mu b + a x + p x^2 + q x^3`.
    pub fn one_d(b: Poly2, a: Poly2, p: Poly2, q: Poly2) -> Self {
        let mut h = Self::zero(1);
        h.b[0] = b;
        h.a[0] = a;
        h.set_nonlinear(0, vec![2], p).expect("valid monomial");
        h.set_nonlinear(0, vec![3], q).expect("valid monomial");
        h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b(&self, i: usize) -> &Poly2 {
        &self.b[i]
    }

    pub fn a(&self, i: usize, j: usize) -> &Poly2 {
        &self.a[i * self.dim + j]
    }

    pub fn set_b(&mut self, i: usize, p: Poly2) {
        self.b[i] = p;
    }

    pub fn set_a(&mut self, i: usize, j: usize, p: Poly2) {
        self.a[i * self.dim + j] = p;
    }

    /// Sets the coefficient of monomial `exps` in output `i`. Only quadratic
    /// and cubic monomials are part of the model.
    pub fn set_nonlinear(&mut self, i: usize, exps: Monomial, p: Poly2) -> Result<()> {
        if exps.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: exps.len(),
            });
        }
        let degree: u32 = exps.iter().map(|&e| e as u32).sum();
        if !(2..=3).contains(&degree) {
            return Err(Error::Config(format!(
                "nonlinear monomial x^{} has degree {degree}; only degrees 2 and 3 are modelled",
                monomial_label(&exps)
            )));
        }
        if p.is_zero() {
            self.nonlinear[i].remove(&exps);
        } else {
            self.nonlinear[i].insert(exps, p);
        }
        Ok(())
    }

    pub fn nonlinear(&self, i: usize) -> &BTreeMap<Monomial, Poly2> {
        &self.nonlinear[i]
    }

    /// Coefficient of `x^exps` in output `i` (zero when absent).
    pub fn nonlinear_coeff(&self, i: usize, exps: &[u8]) -> Poly2 {
        self.nonlinear[i].get(exps).cloned().unwrap_or_default()
    }

    /// Scalar view `(b, a, p, q)` of a one-dimensional half-map.
    pub fn as_1d(&self) -> Option<(Poly2, Poly2, Poly2, Poly2)> {
        if self.dim != 1 {
            return None;
        }
        Some((
            self.b[0].clone(),
            self.a[0].clone(),
            self.nonlinear_coeff(0, &[2]),
            self.nonlinear_coeff(0, &[3]),
        ))
    }

    /// Coefficients evaluated at fixed parameters.
    pub fn freeze(&self, mu: f64, eta: f64) -> FrozenHalf {
        let n = self.dim;
        let offset = DVector::from_iterator(n, self.b.iter().map(|p| mu * p.eval(mu, eta)));
        let a = DMatrix::from_fn(n, n, |i, j| self.a(i, j).eval(mu, eta));
        let mut terms = Vec::new();
        for (i, map) in self.nonlinear.iter().enumerate() {
            for (m, p) in map {
                let c = p.eval(mu, eta);
                if c != 0.0 {
                    terms.push(Term {
                        output: i,
                        exps: m.clone(),
                        coeff: c,
                    });
                }
            }
        }
        let scalar = if n == 1 {
            let mut s = [offset[0], a[(0, 0)], 0.0, 0.0];
            for t in &terms {
                s[t.exps[0] as usize] += t.coeff;
            }
            Some(s)
        } else {
            None
        };
        FrozenHalf {
            offset,
            a,
            terms,
            scalar,
        }
    }

    pub fn eval(&self, x: &State, mu: f64, eta: f64) -> State {
        self.freeze(mu, eta).eval(x)
    }

    pub fn jacobian(&self, x: &State, mu: f64, eta: f64) -> DMatrix<f64> {
        self.freeze(mu, eta).jacobian(x)
    }

    /// Exact partial derivatives `(df/dmu, df/deta)` at `(x; mu, eta)`.
    pub fn param_gradient(&self, x: &State, mu: f64, eta: f64) -> (State, State) {
        let n = self.dim;
        let mut dmu = DVector::zeros(n);
        let mut deta = DVector::zeros(n);
        for i in 0..n {
            let b = &self.b[i];
            dmu[i] = b.eval(mu, eta) + mu * b.d_mu().eval(mu, eta);
            deta[i] = mu * b.d_eta().eval(mu, eta);
            for j in 0..n {
                let a = self.a(i, j);
                dmu[i] += a.d_mu().eval(mu, eta) * x[j];
                deta[i] += a.d_eta().eval(mu, eta) * x[j];
            }
            for (m, p) in &self.nonlinear[i] {
                let v = monomial_value(m, x.as_slice());
                dmu[i] += p.d_mu().eval(mu, eta) * v;
                deta[i] += p.d_eta().eval(mu, eta) * v;
            }
        }
        (dmu, deta)
    }

    /// Reparameterization `mu = mu_factor * mu'`, `eta = eta_factor * eta'`,
    /// expressed in the primed parameters.
    pub fn reparameterized(&self, mu_factor: f64, eta_factor: f64) -> Self {
        let map = |p: &Poly2| p.rescaled(mu_factor, eta_factor);
        Self {
            dim: self.dim,
            b: self.b.iter().map(|p| map(p).scaled(mu_factor)).collect(),
            a: self.a.iter().map(map).collect(),
            nonlinear: self
                .nonlinear
                .iter()
                .map(|m| m.iter().map(|(k, p)| (k.clone(), map(p))).collect())
                .collect(),
        }
    }

    /// The same map written in terms of `eta' = eta - eta0`.
    pub fn shifted_eta(&self, eta0: f64) -> Self {
        let map = |p: &Poly2| p.shifted_eta(eta0);
        Self {
            dim: self.dim,
            b: self.b.iter().map(map).collect(),
            a: self.a.iter().map(map).collect(),
            nonlinear: self
                .nonlinear
                .iter()
                .map(|m| m.iter().map(|(k, p)| (k.clone(), map(p))).collect())
                .collect(),
        }
    }

    /// Conjugation by the reflection `x_1 -> -x_1`.
    pub fn reflected(&self) -> Self {
        let sign = |i: usize| if i == 0 { -1.0 } else { 1.0 };
        let n = self.dim;
        let mut out = Self::zero(n);
        for i in 0..n {
            out.b[i] = self.b[i].scaled(sign(i));
            for j in 0..n {
                out.a[i * n + j] = self.a(i, j).scaled(sign(i) * sign(j));
            }
            for (m, p) in &self.nonlinear[i] {
                let s = sign(i) * if m[0] % 2 == 1 { -1.0 } else { 1.0 };
                out.nonlinear[i].insert(m.clone(), p.scaled(s));
            }
        }
        out
    }
}

fn monomial_value(m: &[u8], x: &[f64]) -> f64 {
    m.iter()
        .zip(x)
        .filter(|(&e, _)| e > 0)
        .map(|(&e, &xi)| xi.powi(e as i32))
        .product()
}

#[derive(Clone, Debug)]
struct Term {
    output: usize,
    exps: Monomial,
    coeff: f64,
}

/// A half-map with its parameters fixed; cheap to evaluate repeatedly.
#[derive(Clone, Debug)]
pub struct FrozenHalf {
    offset: State,
    a: DMatrix<f64>,
    terms: Vec<Term>,
    scalar: Option<[f64; 4]>,
}

impl FrozenHalf {
    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// `A` at the frozen parameters.
    pub fn linear_part(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `mu b` at the frozen parameters.
    pub fn offset(&self) -> &State {
        &self.offset
    }

    pub fn eval(&self, x: &State) -> State {
        if let Some(c) = self.scalar {
            return DVector::from_element(1, eval_cubic(&c, x[0]));
        }
        let mut y = &self.offset + &self.a * x;
        for t in &self.terms {
            y[t.output] += t.coeff * monomial_value(&t.exps, x.as_slice());
        }
        y
    }

    pub fn jacobian(&self, x: &State) -> DMatrix<f64> {
        if let Some(c) = self.scalar {
            return DMatrix::from_element(1, 1, c[1] + x[0] * (2.0 * c[2] + 3.0 * c[3] * x[0]));
        }
        let mut j = self.a.clone();
        for t in &self.terms {
            for k in 0..x.len() {
                let e = t.exps[k];
                if e == 0 {
                    continue;
                }
                let mut d = t.coeff * e as f64;
                for (l, (&el, &xl)) in t.exps.iter().zip(x.iter()).enumerate() {
                    let p = if l == k { el - 1 } else { el };
                    if p > 0 {
                        d *= xl.powi(p as i32);
                    }
                }
                j[(t.output, k)] += d;
            }
        }
        j
    }

    /// Scalar coefficients `[mu b, a, p, q]`; `None` unless one-dimensional.
    pub fn scalar_coeffs(&self) -> Option<[f64; 4]> {
        self.scalar
    }

    /// Scalar evaluation; panics for `dim > 1`.
    pub fn eval1(&self, x: f64) -> f64 {
        eval_cubic(&self.scalar.expect("one-dimensional half-map"), x)
    }

    /// Derivatives `(f', f'', f''')` of a scalar half-map.
    pub fn derivs1(&self, x: f64) -> (f64, f64, f64) {
        let c = self.scalar.expect("one-dimensional half-map");
        (
            c[1] + x * (2.0 * c[2] + 3.0 * c[3] * x),
            2.0 * c[2] + 6.0 * c[3] * x,
            6.0 * c[3],
        )
    }
}

#[inline]
fn eval_cubic(c: &[f64; 4], x: f64) -> f64 {
    c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

/// Default `|x|` beyond which orbits are treated as having left the
/// neighbourhood where the local model applies.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1e3;

/// Two half-maps joined continuously on `x[0] = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwsMap {
    left: HalfMap,
    right: HalfMap,
    escape_radius: f64,
}

/// Relative tolerance for coefficient agreement in the continuity check.
const CONTINUITY_TOL: f64 = 1e-12;

impl PwsMap {
    pub fn new(left: HalfMap, right: HalfMap) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::DimensionMismatch {
                expected: left.dim(),
                got: right.dim(),
            });
        }
        let violations = continuity_violations(&left, &right);
        if !violations.is_empty() {
            return Err(Error::ContinuityViolation { monomials: violations });
        }
        Ok(Self {
            left,
            right,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
        })
    }

    pub fn with_escape_radius(mut self, radius: f64) -> Self {
        self.escape_radius = radius;
        self
    }

    pub fn escape_radius(&self) -> f64 {
        self.escape_radius
    }

    pub fn dim(&self) -> usize {
        self.left.dim()
    }

    pub fn left(&self) -> &HalfMap {
        &self.left
    }

    pub fn right(&self) -> &HalfMap {
        &self.right
    }

    pub fn half(&self, side: Side) -> &HalfMap {
        match side {
            Side::L => &self.left,
            Side::R => &self.right,
        }
    }

    pub fn freeze(&self, mu: f64, eta: f64) -> FrozenMap {
        FrozenMap {
            left: self.left.freeze(mu, eta),
            right: self.right.freeze(mu, eta),
            escape_radius: self.escape_radius,
        }
    }

    pub fn eval(&self, x: &State, mu: f64, eta: f64) -> Result<State> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.freeze(mu, eta).eval(x))
    }

    /// `k` iterates starting from `x0`, truncated if the orbit escapes.
    pub fn iterate(&self, x0: &State, mu: f64, eta: f64, k: usize) -> Result<Orbit> {
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x0.len(),
            });
        }
        Ok(self.freeze(mu, eta).iterate(x0, k))
    }

    /// Same map with `x_1 -> -x_1`; the half-maps exchange roles.
    pub fn reflected(&self) -> Self {
        Self {
            left: self.right.reflected(),
            right: self.left.reflected(),
            escape_radius: self.escape_radius,
        }
    }

    /// Same map with the origin of `eta` moved to `eta0`.
    pub fn shifted_eta(&self, eta0: f64) -> Self {
        Self {
            left: self.left.shifted_eta(eta0),
            right: self.right.shifted_eta(eta0),
            escape_radius: self.escape_radius,
        }
    }

    pub fn reparameterized(&self, mu_factor: f64, eta_factor: f64) -> Self {
        Self {
            left: self.left.reparameterized(mu_factor, eta_factor),
            right: self.right.reparameterized(mu_factor, eta_factor),
            escape_radius: self.escape_radius,
        }
    }
}

/// Names of coefficients that break continuity on `x_1 = 0`.
pub fn continuity_violations(left: &HalfMap, right: &HalfMap) -> Vec<String> {
    let n = left.dim();
    let mut out = Vec::new();
    let mut compare = |name: String, l: &Poly2, r: &Poly2| {
        for (i, j) in l.differing_terms(r, CONTINUITY_TOL) {
            out.push(format!("{name} mu^{i} eta^{j}"));
        }
    };
    for i in 0..n {
        compare(format!("b[{i}]"), left.b(i), right.b(i));
        for j in 1..n {
            compare(format!("a[{i}][{j}]"), left.a(i, j), right.a(i, j));
        }
        let keys: std::collections::BTreeSet<&Monomial> = left.nonlinear(i).keys().chain(right.nonlinear(i).keys()).collect();
        for m in keys {
            if m[0] == 0 {
                compare(
                    format!("nonlinear[{i}] x^{}", monomial_label(m)),
                    &left.nonlinear_coeff(i, m),
                    &right.nonlinear_coeff(i, m),
                );
            }
        }
    }
    out
}

/// Result of [`PwsMap::iterate`].
#[derive(Clone, Debug)]
pub struct Orbit {
    pub states: Vec<State>,
    pub escaped: bool,
}

/// Both half-maps frozen at one parameter point.
#[derive(Clone, Debug)]
pub struct FrozenMap {
    pub left: FrozenHalf,
    pub right: FrozenHalf,
    pub escape_radius: f64,
}

impl FrozenMap {
    pub fn half(&self, side: Side) -> &FrozenHalf {
        match side {
            Side::L => &self.left,
            Side::R => &self.right,
        }
    }

    pub fn dim(&self) -> usize {
        self.left.dim()
    }

    pub fn eval(&self, x: &State) -> State {
        let y = self.half(Side::of(x[0])).eval(x);
        if cfg!(debug_assertions) && x[0] == 0.0 {
            let other = self.right.eval(x);
            let gap = (&y - &other).amax();
            debug_assert!(gap <= 1e-12 * (1.0 + y.amax()), "half-maps disagree on the switching manifold by {gap}");
        }
        y
    }

    /// One-sided Jacobian, using the half-map selected by `x[0]`.
    pub fn jacobian(&self, x: &State) -> DMatrix<f64> {
        self.half(Side::of(x[0])).jacobian(x)
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.half(Side::of(x)).eval1(x)
    }

    pub fn deriv1(&self, x: f64) -> f64 {
        self.half(Side::of(x)).derivs1(x).0
    }

    pub fn iterate(&self, x0: &State, k: usize) -> Orbit {
        let mut states = Vec::with_capacity(k + 1);
        states.push(x0.clone());
        let mut x = x0.clone();
        for _ in 0..k {
            x = self.eval(&x);
            if !x.iter().all(|v| v.is_finite()) || x.amax() > self.escape_radius {
                return Orbit { states, escaped: true };
            }
            states.push(x.clone());
        }
        Orbit { states, escaped: false }
    }
}
