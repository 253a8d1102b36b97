//! Center-manifold reduction of an N-dimensional left half-map at a
//! period-doubling point on the switching manifold.
//!
//! The manifold is a graph `x = H(s; mu, eta)` over `s = e_1^T x` with
//! `H = s v + mu zeta + O(2)`, and the reduced map is
//! `s' = e_1^T f_L(H(s; mu, eta); mu, eta)`. `H` is computed to total order
//! three so that the cubic coefficient in `s` of the reduced map is exact;
//! the order-two truncation is exposed separately.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg_bc::{self, EIG_TOL};
use crate::numerics;
use crate::poly::Poly2;
use crate::pws_map::{HalfMap, PwsMap, State};
use crate::second_iterate::{self, RlSign};
use crate::series::Series;
use crate::unfolding1d::{Panel, UnfoldingReport};

/// Truncation order of `H` and of the reduced map.
pub const ORDER: usize = 3;
const RESONANCE_TOL: f64 = 1e-10;

/// Conditions of the reduction at the origin, each with the number it was decided on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// Real eigenvalue of `A_L(0,0)` closest to `-1`.
    pub lambda: f64,
    /// Smallest `||lambda_i| - 1|` over the remaining eigenvalues.
    pub unit_circle_margin: f64,
    pub simple_eigenvalue: bool,
    pub rho_b: f64,
    pub d_lambda_d_eta: f64,
    /// First component of the unit-norm critical eigenvector.
    pub e1_v: f64,
    pub det_i_minus_al_ar: f64,
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    pub iv: bool,
    pub v: bool,
}

impl Conditions {
    pub fn all(&self) -> bool {
        self.i && self.ii && self.iii && self.iv && self.v
    }
}

struct Eigen {
    lambda: f64,
    v: DVector<f64>,
    w: DVector<f64>,
    margin: f64,
    simple: bool,
}

fn critical_eigen(a0: &DMatrix<f64>) -> Eigen {
    let eigs = numerics::eigenvalues(a0);
    let (k, lambda) = eigs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.im.abs() <= EIG_TOL)
        .map(|(k, c)| (k, c.re))
        .min_by(|a, b| (a.1 + 1.0).abs().total_cmp(&(b.1 + 1.0).abs()))
        .unwrap_or((usize::MAX, f64::NAN));
    let others = eigs.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, c)| c);
    let margin = others.clone().map(|c| (c.norm() - 1.0).abs()).fold(f64::INFINITY, f64::min);
    // A double eigenvalue splits by about sqrt(eps) in floating point.
    let simple = others.clone().all(|c| (c.re - lambda).hypot(c.im) > 1e-6);
    let v = numerics::real_eigenvector(a0, lambda);
    let w = numerics::real_eigenvector(&a0.transpose(), lambda);
    Eigen {
        lambda,
        v,
        w,
        margin,
        simple,
    }
}

fn a_eta(half: &HalfMap) -> DMatrix<f64> {
    let n = half.dim();
    DMatrix::from_fn(n, n, |i, j| half.a(i, j).coeff(0, 1))
}

/// Checks conditions (i)-(v) at the origin with threshold `1e-8`.
pub fn check_conditions(map: &PwsMap) -> Conditions {
    let n = map.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let a_l = linalg_bc::linear_part(map.left(), 0.0, 0.0);
    let a_r = linalg_bc::linear_part(map.right(), 0.0, 0.0);
    let b = linalg_bc::offset_direction(map.left(), 0.0, 0.0);
    let eig = critical_eigen(&a_l);
    let rho = linalg_bc::adjugate(&(&id - &a_l)).row(0).transpose();
    let rho_b = rho.dot(&b);
    let wv = eig.w.dot(&eig.v);
    let d_lambda_d_eta = if wv.abs() > EIG_TOL { eig.w.dot(&(a_eta(map.left()) * &eig.v)) / wv } else { f64::NAN };
    let e1_v = eig.v[0] / eig.v.norm();
    let det_v = (&id - &a_l * &a_r).determinant();
    Conditions {
        lambda: eig.lambda,
        unit_circle_margin: eig.margin,
        simple_eigenvalue: eig.simple,
        rho_b,
        d_lambda_d_eta,
        e1_v,
        det_i_minus_al_ar: det_v,
        i: (eig.lambda + 1.0).abs() <= EIG_TOL && eig.simple && eig.margin > EIG_TOL,
        ii: rho_b.abs() > EIG_TOL,
        iii: d_lambda_d_eta.abs() > EIG_TOL,
        iv: e1_v.abs() > EIG_TOL,
        v: det_v.abs() > EIG_TOL,
    }
}

/// A vector coefficient of one monomial `s^a mu^j eta^k` of `H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialVector {
    pub exponents: [usize; 3],
    pub label: String,
    pub coeff: Vec<f64>,
}

pub fn monomial_label([a, j, k]: [usize; 3]) -> String {
    let mut parts = Vec::new();
    for (name, e) in [("s", a), ("mu", j), ("eta", k)] {
        match e {
            0 => {}
            1 => parts.push(name.to_string()),
            _ => parts.push(format!("{name}^{e}")),
        }
    }
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(" ")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenterManifoldResult {
    pub conditions: Conditions,
    pub lambda: f64,
    /// Critical eigenvector scaled so that `v[0] = 1`.
    pub v: Vec<f64>,
    pub d_lambda_d_eta: f64,
    pub phi: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Second-order coefficients of `H`, in the order
    /// `s^2, s mu, s eta, mu^2, mu eta, eta^2`.
    pub h2: Vec<MonomialVector>,
    /// One truncated series per state component.
    pub manifold: Vec<Series>,
    /// Reduced left half-map in the original parameters.
    pub reduced_user: HalfMap,
    /// Reduced left half-map in `(mu_hat, eta_hat) = (mu_hat_scale mu, eta_hat_scale eta)`.
    pub reduced: HalfMap,
    pub mu_hat_scale: f64,
    pub eta_hat_scale: f64,
    /// Largest condition number among the homological systems.
    pub homological_condition: f64,
}

impl CenterManifoldResult {
    /// `H(s; mu, eta)` truncated at total degree `order` (at most 3).
    pub fn manifold_point(&self, order: usize, s: f64, mu: f64, eta: f64) -> State {
        DVector::from_iterator(self.manifold.len(), self.manifold.iter().map(|h| h.truncated(order).eval(s, mu, eta)))
    }

    /// Reduced map in the original parameters.
    pub fn reduced_eval(&self, s: f64, mu: f64, eta: f64) -> f64 {
        self.reduced_user.freeze(mu, eta).eval1(s)
    }

    /// `|H(g(s)) - f_L(H(s))|_inf` for `H` truncated at `order`.
    pub fn invariance_residual(&self, map: &PwsMap, order: usize, s: f64, mu: f64, eta: f64) -> f64 {
        let x = self.manifold_point(order, s, mu, eta);
        let lhs = self.manifold_point(order, self.reduced_eval(s, mu, eta), mu, eta);
        (lhs - map.left().eval(&x, mu, eta)).amax()
    }

    pub fn c0(&self) -> f64 {
        let (_, _, p, q) = self.reduced.as_1d().expect("scalar reduced map");
        p.value_at_origin().powi(2) + q.value_at_origin()
    }
}

fn apply_half(half: &HalfMap, x: &[Series]) -> Vec<Series> {
    let order = x[0].order();
    let mu = Series::var(order, 1);
    (0..half.dim())
        .map(|i| {
            let mut out = mu.mul(&Series::from_poly(order, half.b(i)));
            for (j, xj) in x.iter().enumerate() {
                out = out.add(&Series::from_poly(order, half.a(i, j)).mul(xj));
            }
            for (m, c) in half.nonlinear(i) {
                let mut t = Series::from_poly(order, c);
                for (xl, &e) in x.iter().zip(m) {
                    t = t.mul(&xl.powi(e as usize));
                }
                out = out.add(&t);
            }
            out
        })
        .collect()
}

fn series_to_half(g: &Series) -> HalfMap {
    let order = g.order();
    let mut b = Vec::new();
    for j in 1..=order {
        for k in 0..=order - j {
            b.push((j - 1, k, g.coeff(0, j, k)));
        }
    }
    let q = g.s_coefficient(3).truncated(0);
    HalfMap::one_d(Poly2::from_terms(&b), g.s_coefficient(1), g.s_coefficient(2), q)
}

/// Computes the center manifold and the reduced map; requires conditions (i)-(iv).
pub fn reduce(map: &PwsMap) -> Result<CenterManifoldResult> {
    let conditions = check_conditions(map);
    if (conditions.lambda + 1.0).abs() > EIG_TOL || conditions.lambda.is_nan() {
        return Err(Error::SingularityMissing { value: conditions.lambda });
    }
    for (ok, what) in [
        (conditions.i, "eigenvalue -1 is not simple or another eigenvalue lies on the unit circle"),
        (conditions.ii, "rho^T b vanishes"),
        (conditions.iii, "d lambda / d eta vanishes"),
        (conditions.iv, "critical eigenvector is tangent to the switching manifold"),
    ] {
        if !ok {
            return Err(Error::DegenerateUnfolding(what.into()));
        }
    }
    let n = map.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let a0 = linalg_bc::linear_part(map.left(), 0.0, 0.0);
    let b0 = linalg_bc::offset_direction(map.left(), 0.0, 0.0);
    let eig = critical_eigen(&a0);
    let v = &eig.v / eig.v[0];
    let e1t = DMatrix::from_fn(1, n, |_, j| if j == 0 { 1.0 } else { 0.0 });
    let proj = &id - &v * e1t;
    let phi = numerics::solve(&(&id - &a0), &b0).ok_or(Error::DegenerateUnfolding("I - A_L(0,0) is singular".into()))?;
    let zeta = &phi - &v * phi[0];

    // Homological operators on ker e_1^T, one per parity of the power of s.
    let pa = &proj * &a0;
    let mut blocks = Vec::new();
    let mut homological_condition: f64 = 1.0;
    for parity in [1.0, -1.0] {
        let m = (&id * parity - &pa).view((1, 1), (n - 1, n - 1)).into_owned();
        if n > 1 {
            let sv = m.singular_values();
            let smin = sv.min();
            homological_condition = homological_condition.max(sv.max() / smin);
        }
        blocks.push(m);
    }

    let mut h: Vec<Series> = (0..n)
        .map(|i| {
            let mut s = Series::zero(ORDER);
            s.set(1, 0, 0, v[i]);
            s
        })
        .collect();
    for d in 1..=ORDER {
        for m in Series::monomials_of_degree(d) {
            if m == [1, 0, 0] || n == 1 {
                continue;
            }
            let fh = apply_half(map.left(), &h);
            let g = &fh[0];
            let rhs: Vec<f64> = (1..n)
                .map(|i| {
                    let mut tilde = h[i].clone();
                    tilde.set(1, 0, 0, 0.0);
                    let r = fh[i].sub(&g.scale(v[i])).sub(&tilde.compose_s(g));
                    r.coeff(m[0], m[1], m[2])
                })
                .collect();
            let block = &blocks[m[0] % 2];
            let sigma = numerics::min_singular_value(block);
            if sigma < RESONANCE_TOL {
                return Err(Error::ResonantMonomial {
                    monomial: monomial_label(m),
                    sigma,
                });
            }
            let sol = numerics::solve(block, &DVector::from_vec(rhs)).ok_or(Error::ResonantMonomial {
                monomial: monomial_label(m),
                sigma,
            })?;
            for i in 1..n {
                h[i].set(m[0], m[1], m[2], sol[i - 1]);
            }
        }
    }
    let g = apply_half(map.left(), &h).swap_remove(0);
    let reduced_user = series_to_half(&g);
    let mu_hat_scale = g.coeff(0, 1, 0);
    let eta_hat_scale = g.coeff(1, 0, 1);
    if mu_hat_scale.abs() <= EIG_TOL || eta_hat_scale.abs() <= EIG_TOL {
        return Err(Error::DegenerateUnfolding("reduced map has a vanishing scale".into()));
    }
    let reduced = reduced_user.reparameterized(1.0 / mu_hat_scale, 1.0 / eta_hat_scale);
    let h2 = Series::monomials_of_degree(2)
        .into_iter()
        .map(|m| MonomialVector {
            exponents: m,
            label: monomial_label(m),
            coeff: h.iter().map(|c| c.coeff(m[0], m[1], m[2])).collect(),
        })
        .collect();
    Ok(CenterManifoldResult {
        lambda: eig.lambda,
        d_lambda_d_eta: conditions.d_lambda_d_eta,
        conditions,
        v: v.iter().copied().collect(),
        phi: phi.iter().copied().collect(),
        zeta: zeta.iter().copied().collect(),
        h2,
        manifold: h,
        reduced_user,
        reduced,
        mu_hat_scale,
        eta_hat_scale,
        homological_condition,
    })
}

/// Unfolding of an N-dimensional map through its reduced left half-map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NdUnfolding {
    pub reduction: CenterManifoldResult,
    /// Report for the reduced map; its `mu_scale`/`eta_scale` map the
    /// original parameters to the hatted ones, so `h1_user`/`h2_user` are
    /// the back-mapped curves.
    pub report: UnfoldingReport,
    pub rl_sign: Option<RlSign>,
}

pub fn nd_unfold(map: &PwsMap) -> Result<NdUnfolding> {
    let reduction = reduce(map)?;
    let feigin = linalg_bc::feigin_classify(map, 0.0);
    let c0 = reduction.c0();
    let panel = if map.dim() == 1 {
        let a0r = map.right().a(0, 0).value_at_origin();
        Panel::classify(c0, a0r)
    } else {
        Panel::from_parity(c0, feigin.sigma_plus_r, feigin.sigma_minus_r)
    };
    let a0r = (map.dim() == 1).then(|| map.right().a(0, 0).value_at_origin());
    let report = UnfoldingReport::from_normalized_half(&reduction.reduced, a0r, panel, reduction.mu_hat_scale, reduction.eta_hat_scale)?;
    let rl_sign = second_iterate::rl_admissibility_sign(map).ok();
    Ok(NdUnfolding { reduction, report, rl_sign })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pdmapex_conditions() {
        let c = check_conditions(&fixtures::pdmapex());
        assert!(c.all(), "{c:?}");
        assert!(close(c.lambda, -1.0, 1e-12));
        // Characteristic polynomial l^2 + l/2 - 1/2 has roots -1 and 1/2.
        assert!(close(c.unit_circle_margin, 0.5, 1e-12));
        assert!(close(c.rho_b, -0.5, 1e-12));
        assert!(close(c.det_i_minus_al_ar, 1.0 / 6.0, 1e-12));
        assert!(close(c.d_lambda_d_eta, 1.0, 1e-12));
    }

    #[test]
    fn pdmapex_reduced_map() {
        let r = reduce(&fixtures::pdmapex()).unwrap();
        assert!(close(r.mu_hat_scale, -1.0, 1e-12));
        let (b, a, p, q) = r.reduced.as_1d().unwrap();
        let expect = [
            (b.coeff(0, 0), 1.0),
            (a.coeff(0, 0), -1.0),
            (p.coeff(0, 0), 0.5),
            (a.coeff(1, 0), -2.0 / 3.0),
            (a.coeff(0, 1), 1.0),
            (b.coeff(1, 0), 1.0 / 3.0),
            (b.coeff(0, 1), -2.0),
            (q.coeff(0, 0), -1.0 / 3.0),
            // Higher coefficients from an independent symbolic elimination.
            (a.coeff(2, 0), -4.0 / 27.0),
            (a.coeff(1, 1), -2.0 / 9.0),
            (a.coeff(0, 2), 2.0 / 3.0),
            (p.coeff(1, 0), 1.0 / 3.0),
            (p.coeff(0, 1), 1.0),
        ];
        for (k, (got, want)) in expect.iter().enumerate() {
            assert!(close(*got, *want, 1e-10), "entry {k}: {got} vs {want}");
        }
        assert!(close(r.c0(), -1.0 / 12.0, 1e-10));
        assert!(r.zeta[0].abs() < 1e-15);
        assert_eq!(r.v[0], 1.0);
    }

    #[test]
    fn eta_coefficient_follows_the_eigenvalue() {
        // a(0, eta) of the reduced map is the critical eigenvalue of A_L(0, eta):
        // l^2 + l/2 - 1/2 + 3 eta / 2 = 0 gives l = -1 + eta + 2 eta^2 / 3 + ...
        let r = reduce(&fixtures::pdmapex()).unwrap();
        let (_, a, _, _) = r.reduced_user.as_1d().unwrap();
        assert!(close(a.coeff(0, 1), 1.0, 1e-12));
        assert!(close(a.coeff(0, 2), 2.0 / 3.0, 1e-12));
    }

    #[test]
    fn mu_hat_scale_matches_adjugate_formula() {
        let map = fixtures::pdmapex();
        let r = reduce(&map).unwrap();
        let a_l = linalg_bc::linear_part(map.left(), 0.0, 0.0);
        let a_r = linalg_bc::linear_part(map.right(), 0.0, 0.0);
        let rho = linalg_bc::varrho(&a_l, &a_r).unwrap();
        let b = linalg_bc::offset_direction(map.left(), 0.0, 0.0);
        let formula = 2.0 * rho.dot(&b) / numerics::det_i_minus(&a_l);
        assert!(close(r.mu_hat_scale, formula, 1e-12));
    }

    #[test]
    fn invariance_residual_orders() {
        let map = fixtures::pdmapex();
        let r = reduce(&map).unwrap();
        let dirs = [[1.0, 0.5, -0.3], [-0.7, 0.2, 0.6], [0.3, -0.9, 0.1], [0.6, 0.6, 0.6]];
        let worst = |order: usize, t: f64| dirs.iter().map(|d| r.invariance_residual(&map, order, d[0] * t, d[1] * t, d[2] * t)).fold(0.0, f64::max);
        let ratio2 = worst(2, 1e-2) / worst(2, 1e-3);
        assert!(ratio2 > 250.0 && ratio2 < 4000.0, "{ratio2}");
        let ratio3 = worst(3, 1e-2) / worst(3, 1e-3);
        assert!(ratio3 > 2500.0, "{ratio3}");
    }

    #[test]
    fn reduced_fixed_point_tracks_full_fixed_point() {
        let map = fixtures::pdmapex();
        let r = reduce(&map).unwrap();
        for t in [1e-2, 1e-3] {
            let (mu, eta) = (0.7 * t, -0.4 * t);
            let full = linalg_bc::half_fixed_point(map.left(), crate::Side::L, mu, eta).unwrap();
            let fr = r.reduced_user.freeze(mu, eta);
            let s = numerics::bracketed_root(|s| fr.eval1(s) - s, -1.0, 1.0, 1e-16).unwrap();
            assert!((s - full.x_star[0]).abs() <= 10.0 * t.powi(3), "{t}");
        }
    }

    #[test]
    fn pdmapex_back_mapped_curves() {
        let u = nd_unfold(&fixtures::pdmapex()).unwrap();
        let (l1, q1) = u.report.h1_user_coeffs();
        let (l2, q2) = u.report.h2_user_coeffs();
        assert!(close(l1, -1.0 / 6.0, 1e-10) && close(q1, -1.0 / 48.0, 1e-10), "{l1} {q1}");
        assert!(close(l2, -1.0 / 6.0, 1e-10) && close(q2, 0.0, 1e-10), "{l2} {q2}");
        assert!(close(u.report.h1_lin, 1.0 / 6.0, 1e-10));
        assert_eq!(u.report.admissible_mu_sign(), 1.0);
        assert_eq!(u.report.panel, Panel::C);
        assert_eq!(u.rl_sign.unwrap().sign, 1);
    }

    #[test]
    fn second_codim2_point_by_reflection() {
        let map = fixtures::pdmapex().reflected().shifted_eta(-2.0 / 9.0);
        let u = nd_unfold(&map).unwrap();
        assert!(u.reduction.conditions.all());
        let (l1, _) = u.report.h1_user_coeffs();
        let (l2, _) = u.report.h2_user_coeffs();
        assert!(close(l1, l2, 1e-12));
        assert_eq!(u.report.panel, Panel::A);
    }

    #[test]
    fn scalar_map_reduces_to_itself() {
        let map = fixtures::fig2();
        let r = reduce(&map).unwrap();
        assert_eq!(r.reduced_user.as_1d().unwrap().1.coeff(0, 1), 1.0);
        assert!(close(r.c0(), 2.5, 1e-14));
        let u = nd_unfold(&map).unwrap();
        assert_eq!(u.report.panel, Panel::F);
    }

    #[test]
    fn missing_singularity_and_resonance() {
        let mut half = HalfMap::zero(2);
        half.set_b(0, Poly2::constant(1.0));
        half.set_a(0, 0, Poly2::constant(0.5));
        half.set_a(1, 1, Poly2::constant(0.2));
        let map = PwsMap::new(half.clone(), half).unwrap();
        assert!(matches!(reduce(&map), Err(Error::SingularityMissing { .. })));

        // Second eigenvalue +1 makes the even-power homological operator singular.
        let mut half = HalfMap::zero(2);
        half.set_b(0, Poly2::constant(1.0));
        half.set_a(0, 0, Poly2::from_terms(&[(0, 0, -1.0), (0, 1, 1.0)]));
        half.set_a(1, 1, Poly2::constant(1.0));
        let map = PwsMap::new(half.clone(), half).unwrap();
        let c = check_conditions(&map);
        assert!(!c.i);
        assert!(matches!(reduce(&map), Err(Error::DegenerateUnfolding(_))));
    }
}
