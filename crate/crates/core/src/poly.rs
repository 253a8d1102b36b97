//! Bivariate polynomials in the unfolding parameters `(mu, eta)`.

use serde::{Deserialize, Serialize};

/// Dense polynomial `sum c[i][j] mu^i eta^j` over `0 <= i + j <= deg`.
///
/// Coefficients are packed by total degree: degree `d` occupies the slots
/// `d(d+1)/2 .. (d+1)(d+2)/2`, ordered by increasing power of `eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly2 {
    deg: usize,
    coeffs: Vec<f64>,
}

#[inline]
fn slot(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for t in 0..k {
        r = r * (n - t) as f64 / (t + 1) as f64;
    }
    r
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl Poly2 {
    /// Minimum stored degree; lower-degree tables are padded with zeros.
    pub const MIN_DEGREE: usize = 2;

    pub fn zeros(deg: usize) -> Self {
        let deg = deg.max(Self::MIN_DEGREE);
        Self {
            deg,
            coeffs: vec![0.0; (deg + 1) * (deg + 2) / 2],
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zeros(Self::MIN_DEGREE);
        p.coeffs[0] = c;
        p
    }

    /// Builds a polynomial from `(i, j, c)` triples meaning `c mu^i eta^j`.
    /// Repeated exponents accumulate.
    pub fn from_terms(terms: &[(usize, usize, f64)]) -> Self {
        let deg = terms.iter().map(|&(i, j, _)| i + j).max().unwrap_or(0);
        let mut p = Self::zeros(deg);
        for &(i, j, c) in terms {
            p.coeffs[slot(i, j)] += c;
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.deg
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.deg {
            0.0
        } else {
            self.coeffs[slot(i, j)]
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, c: f64) {
        if i + j > self.deg {
            self.raise_degree(i + j);
        }
        self.coeffs[slot(i, j)] = c;
    }

    fn raise_degree(&mut self, deg: usize) {
        let mut p = Self::zeros(deg);
        for (i, j, c) in self.terms() {
            p.coeffs[slot(i, j)] = c;
        }
        *self = p;
    }

    /// All `(i, j, c)` entries, including zeros, ordered by total degree.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.deg).flat_map(move |d| (0..=d).map(move |j| (d - j, j, self.coeffs[slot(d - j, j)])))
    }

    pub fn value_at_origin(&self) -> f64 {
        self.coeffs[0]
    }

    /// `d^{i+j} P / d mu^i d eta^j` at the origin, i.e. `i! j! c[i][j]`.
    pub fn derivative_at_origin(&self, i: usize, j: usize) -> f64 {
        factorial(i) * factorial(j) * self.coeff(i, j)
    }

    /// Nested Horner evaluation: outer in `mu`, inner in `eta`.
    pub fn eval(&self, mu: f64, eta: f64) -> f64 {
        let mut acc = 0.0;
        for i in (0..=self.deg).rev() {
            let mut inner = 0.0;
            for j in (0..=self.deg - i).rev() {
                inner = inner * eta + self.coeffs[slot(i, j)];
            }
            acc = acc * mu + inner;
        }
        acc
    }

    /// Term-by-term summation; kept as an independent route to `eval`.
    pub fn eval_naive(&self, mu: f64, eta: f64) -> f64 {
        self.terms()
            .map(|(i, j, c)| c * mu.powi(i as i32) * eta.powi(j as i32))
            .sum()
    }

    pub fn d_mu(&self) -> Self {
        let mut p = Self::zeros(self.deg.saturating_sub(1));
        for (i, j, c) in self.terms() {
            if i > 0 {
                p.coeffs[slot(i - 1, j)] += i as f64 * c;
            }
        }
        p
    }

    pub fn d_eta(&self) -> Self {
        let mut p = Self::zeros(self.deg.saturating_sub(1));
        for (i, j, c) in self.terms() {
            if j > 0 {
                p.coeffs[slot(i, j - 1)] += j as f64 * c;
            }
        }
        p
    }

    /// Substitutes `mu -> mu_factor * mu`, `eta -> eta_factor * eta`.
    pub fn rescaled(&self, mu_factor: f64, eta_factor: f64) -> Self {
        let mut p = self.clone();
        for (i, j, c) in self.terms() {
            p.coeffs[slot(i, j)] = c * mu_factor.powi(i as i32) * eta_factor.powi(j as i32);
        }
        p
    }

    /// Substitutes `eta -> eta + eta0`.
    pub fn shifted_eta(&self, eta0: f64) -> Self {
        let mut p = Self::zeros(self.deg);
        for (i, j, c) in self.terms() {
            for k in 0..=j {
                p.coeffs[slot(i, k)] += c * binomial(j, k) * eta0.powi((j - k) as i32);
            }
        }
        p
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            deg: self.deg,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = Self::zeros(self.deg.max(other.deg));
        for (i, j, c) in self.terms().chain(other.terms()) {
            p.coeffs[slot(i, j)] += c;
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zeros(self.deg + other.deg);
        for (i, j, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            for (k, l, d) in other.terms() {
                p.coeffs[slot(i + k, j + l)] += c * d;
            }
        }
        p
    }

    /// Drops every term of total degree above `deg`.
    pub fn truncated(&self, deg: usize) -> Self {
        let mut p = Self::zeros(deg);
        for (i, j, c) in self.terms() {
            if i + j <= deg {
                p.coeffs[slot(i, j)] = c;
            }
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Exponent pairs whose coefficients differ by more than `tol`.
    pub fn differing_terms(&self, other: &Self, tol: f64) -> Vec<(usize, usize)> {
        let deg = self.deg.max(other.deg);
        let mut out = Vec::new();
        for d in 0..=deg {
            for j in 0..=d {
                let i = d - j;
                let (a, b) = (self.coeff(i, j), other.coeff(i, j));
                if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

impl Default for Poly2 {
    fn default() -> Self {
        Self::zeros(Self::MIN_DEGREE)
    }
}
