//! Truncated power series in `(s, mu, eta)`.

use serde::{Deserialize, Serialize};

use crate::poly::Poly2;

/// Polynomial in `s`, `mu`, `eta` truncated at a fixed total degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    order: usize,
    /// Dense cube indexed by `(a, j, k)` for `s^a mu^j eta^k`; entries with
    /// `a + j + k > order` stay zero.
    coeffs: Vec<f64>,
}

impl Series {
    pub fn zero(order: usize) -> Self {
        let n = order + 1;
        Self {
            order,
            coeffs: vec![0.0; n * n * n],
        }
    }

    pub fn constant(order: usize, c: f64) -> Self {
        let mut out = Self::zero(order);
        out.set(0, 0, 0, c);
        out
    }

    /// The coordinate `s` (`var = 0`), `mu` (`1`) or `eta` (`2`).
    pub fn var(order: usize, var: usize) -> Self {
        let mut out = Self::zero(order);
        if order >= 1 {
            let mut e = [0; 3];
            e[var] = 1;
            out.set(e[0], e[1], e[2], 1.0);
        }
        out
    }

    /// Embeds a parameter polynomial.
    pub fn from_poly(order: usize, p: &Poly2) -> Self {
        let mut out = Self::zero(order);
        for (i, j, c) in p.terms() {
            if i + j <= order {
                out.set(0, i, j, c);
            }
        }
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn idx(&self, a: usize, j: usize, k: usize) -> usize {
        let n = self.order + 1;
        (a * n + j) * n + k
    }

    pub fn coeff(&self, a: usize, j: usize, k: usize) -> f64 {
        if a + j + k > self.order {
            return 0.0;
        }
        self.coeffs[self.idx(a, j, k)]
    }

    pub fn set(&mut self, a: usize, j: usize, k: usize, c: f64) {
        assert!(a + j + k <= self.order, "monomial beyond truncation order");
        let i = self.idx(a, j, k);
        self.coeffs[i] = c;
    }

    /// Exponent triples of total degree exactly `d`, `s` power descending.
    pub fn monomials_of_degree(d: usize) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for a in (0..=d).rev() {
            for j in (0..=d - a).rev() {
                out.push([a, j, d - a - j]);
            }
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        (0..=self.order).flat_map(Self::monomials_of_degree).map(|[a, j, k]| ([a, j, k], self.coeff(a, j, k)))
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.order, other.order);
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.order);
        for ([a, j, k], x) in self.terms().filter(|t| t.1 != 0.0) {
            for ([b, l, m], y) in other.terms().filter(|t| t.1 != 0.0) {
                if a + j + k + b + l + m <= self.order {
                    let i = out.idx(a + b, j + l, k + m);
                    out.coeffs[i] += x * y;
                }
            }
        }
        out
    }

    pub fn powi(&self, e: usize) -> Self {
        let mut out = Self::constant(self.order, 1.0);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Drops every term of total degree above `d`.
    pub fn truncated(&self, d: usize) -> Self {
        let mut out = self.clone();
        for ([a, j, k], _) in self.terms() {
            if a + j + k > d {
                out.set(a, j, k, 0.0);
            }
        }
        out
    }

    /// Substitutes the series `g` for `s`, keeping `mu` and `eta`.
    pub fn compose_s(&self, g: &Self) -> Self {
        let mut out = Self::zero(self.order);
        for a in (0..=self.order).rev() {
            let mut c = Self::zero(self.order);
            for j in 0..=self.order - a {
                for k in 0..=self.order - a - j {
                    c.set(0, j, k, self.coeff(a, j, k));
                }
            }
            out = out.mul(g).add(&c);
        }
        out
    }

    pub fn eval(&self, s: f64, mu: f64, eta: f64) -> f64 {
        self.terms().map(|([a, j, k], c)| c * s.powi(a as i32) * mu.powi(j as i32) * eta.powi(k as i32)).sum()
    }

    /// Coefficients of `s^a` as a polynomial in `(mu, eta)`.
    pub fn s_coefficient(&self, a: usize) -> Poly2 {
        let mut terms = Vec::new();
        for j in 0..=self.order.saturating_sub(a) {
            for k in 0..=self.order - a - j {
                terms.push((j, k, self.coeff(a, j, k)));
            }
        }
        Poly2::from_terms(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_series(order: usize, vals: &[f64]) -> Series {
        let mut s = Series::zero(order);
        for (([a, j, k], _), v) in Series::zero(order).terms().zip(vals.iter().cycle()) {
            s.set(a, j, k, *v);
        }
        s
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(Series::monomials_of_degree(2).len(), 6);
        assert_eq!(Series::zero(3).terms().count(), 20);
        assert_eq!(Series::monomials_of_degree(2)[0], [2, 0, 0]);
    }

    #[test]
    fn composition_of_linear_maps() {
        // (1 + s)^2 with s -> 2s + mu
        let f = Series::constant(3, 1.0).add(&Series::var(3, 0)).powi(2);
        let g = Series::var(3, 0).scale(2.0).add(&Series::var(3, 1));
        let h = f.compose_s(&g);
        assert_eq!(h.coeff(0, 0, 0), 1.0);
        assert_eq!(h.coeff(1, 0, 0), 4.0);
        assert_eq!(h.coeff(0, 1, 0), 2.0);
        assert_eq!(h.coeff(2, 0, 0), 4.0);
        assert_eq!(h.coeff(1, 1, 0), 4.0);
        assert_eq!(h.coeff(0, 2, 0), 1.0);
    }

    proptest! {
        #[test]
        fn products_and_composition_match_pointwise(
            vals in prop::collection::vec(-1.0f64..1.0, 20),
            wals in prop::collection::vec(-1.0f64..1.0, 20),
            x in prop::array::uniform3(-1.0f64..1.0),
        ) {
            // Exact for order-1 factors; with scale t the truncation error is O(t^4).
            let t = 1e-3;
            let (s, mu, eta) = (x[0] * t, x[1] * t, x[2] * t);
            let f = random_series(3, &vals);
            let mut g = random_series(3, &wals);
            g.set(0, 0, 0, 0.0);
            let prod = f.mul(&g).eval(s, mu, eta);
            prop_assert!((prod - f.eval(s, mu, eta) * g.eval(s, mu, eta)).abs() <= 50.0 * t.powi(4));
            let comp = f.compose_s(&g).eval(s, mu, eta);
            let direct = f.eval(g.eval(s, mu, eta), mu, eta);
            prop_assert!((comp - direct).abs() <= 200.0 * t.powi(4));
        }
    }
}
