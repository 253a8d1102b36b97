//! Unfolding of a scalar piecewise-smooth map at the codimension-two point.
//!
//! The left half-map is written
//!
//! ```text
//! f(x) = mu b + a x + p x^2 + q x^3
//! a = -1 + alpha1 mu + eta + alpha3 mu^2 + alpha4 mu eta + alpha5 eta^2 + ...
//! b =  1 + beta1 mu + beta2 eta + ...
//! p = gamma0 + gamma1 mu + gamma2 eta + ...
//! q = delta0 + ...
//! ```
//!
//! after the parameters are rescaled so that `b(0,0) = 1` and
//! `da/deta(0,0) = 1`. Near the origin the left fixed point period-doubles on
//! `eta = h1(mu)` and the resulting two-cycle hits the switching point on
//! `eta = h2(mu)`; both curves are returned to second order together with the
//! constants `c0 = p^2 + q` and `a0R = a_R(0,0)` that select the scenario.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg_bc::{self, EIG_TOL};
use crate::numerics;
use crate::poly::Poly2;
use crate::pws_map::{HalfMap, PwsMap, Side};

/// Default radius (in normalized parameters) inside which the quadratic
/// predictors are trusted.
pub const VALIDITY_RADIUS: f64 = 0.1;
const C0_TOL: f64 = 1e-10;

/// Coefficients of the normalized left half-map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCoeffs {
    pub alpha1: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta0: f64,
}

impl NormalizedCoeffs {
    pub fn from_half(half: &HalfMap) -> Result<Self> {
        let (b, a, p, q) = half.as_1d().ok_or(Error::DimensionMismatch {
            expected: 1,
            got: half.dim(),
        })?;
        Ok(Self {
            alpha1: a.coeff(1, 0),
            alpha3: a.coeff(2, 0),
            alpha4: a.coeff(1, 1),
            alpha5: a.coeff(0, 2),
            beta1: b.coeff(1, 0),
            beta2: b.coeff(0, 1),
            gamma0: p.coeff(0, 0),
            gamma1: p.coeff(1, 0),
            gamma2: p.coeff(0, 1),
            delta0: q.coeff(0, 0),
        })
    }

    /// Scalar left half-map carrying exactly these coefficients.
    pub fn to_half(&self) -> HalfMap {
        HalfMap::one_d(
            Poly2::from_terms(&[(0, 0, 1.0), (1, 0, self.beta1), (0, 1, self.beta2)]),
            Poly2::from_terms(&[
                (0, 0, -1.0),
                (1, 0, self.alpha1),
                (0, 1, 1.0),
                (2, 0, self.alpha3),
                (1, 1, self.alpha4),
                (0, 2, self.alpha5),
            ]),
            Poly2::from_terms(&[(0, 0, self.gamma0), (1, 0, self.gamma1), (0, 1, self.gamma2)]),
            Poly2::constant(self.delta0),
        )
    }

    pub fn c0(&self) -> f64 {
        self.gamma0 * self.gamma0 + self.delta0
    }

    pub fn k1(&self) -> f64 {
        self.beta1 / 2.0 + self.alpha1 / 4.0 + self.gamma0 / 8.0
    }

    pub fn k2(&self) -> f64 {
        self.beta2 / 2.0 + 0.25
    }

    /// Shared linear coefficient of `h1` and `h2`.
    pub fn h_lin(&self) -> f64 {
        -(self.alpha1 + self.gamma0)
    }

    pub fn l1(&self) -> f64 {
        let a1 = self.alpha1 + self.gamma0;
        let m11 = self.alpha3 + 2.0 * self.k1() * self.gamma0 + self.gamma1 + 0.75 * self.delta0;
        let m12 = self.alpha4 + 2.0 * self.k2() * self.gamma0 + self.gamma2;
        -m11 + m12 * a1 - self.alpha5 * a1 * a1
    }

    pub fn l2(&self) -> f64 {
        let c = self;
        let a1 = c.alpha1 + c.gamma0;
        -(c.alpha1 * c.beta1 + c.alpha3 + 2.0 * c.beta1 * c.gamma0 + c.gamma1 + c.delta0)
            + (c.beta1 + c.alpha1 * c.beta2 + c.alpha4 + 2.0 * c.beta2 * c.gamma0 + c.gamma2) * a1
            - (c.beta2 + c.alpha5) * a1 * a1
    }
}

/// A scalar map rescaled so that `b(0,0) = 1` and `da_L/deta(0,0) = 1`.
///
/// Normalized parameters relate to user parameters by
/// `mu_n = mu_scale * mu` and `eta_n = eta_scale * eta`.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub map: PwsMap,
    pub mu_scale: f64,
    pub eta_scale: f64,
}

impl Normalized {
    pub fn to_user(&self, mu_n: f64, eta_n: f64) -> (f64, f64) {
        (mu_n / self.mu_scale, eta_n / self.eta_scale)
    }

    pub fn to_normalized(&self, mu: f64, eta: f64) -> (f64, f64) {
        (mu * self.mu_scale, eta * self.eta_scale)
    }
}

pub fn normalize(map: &PwsMap) -> Result<Normalized> {
    let (b, a, _, _) = map.left().as_1d().ok_or(Error::DimensionMismatch {
        expected: 1,
        got: map.dim(),
    })?;
    let a00 = a.value_at_origin();
    if (a00 + 1.0).abs() > EIG_TOL {
        return Err(Error::SingularityMissing { value: a00 });
    }
    let b0 = b.value_at_origin();
    if b0.abs() <= C0_TOL {
        return Err(Error::DegenerateUnfolding("b(0,0) = 0".into()));
    }
    let e0 = a.coeff(0, 1);
    if e0.abs() <= C0_TOL {
        return Err(Error::DegenerateUnfolding("da_L/deta(0,0) = 0".into()));
    }
    Ok(Normalized {
        map: map.reparameterized(1.0 / b0, 1.0 / e0),
        mu_scale: b0,
        eta_scale: e0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Panel {
    A,
    B,
    C,
    D,
    E,
    F,
    Degenerate,
    /// Right-side data is unavailable and the sign counts of `A_R` do not
    /// pin down the range of `a0R`.
    Undetermined,
}

impl Panel {
    /// Panel letter from the sign of `c0` and the position of `a0R`
    /// relative to `+-1`. `c0 < 0` selects A, C, E and `c0 > 0` selects
    /// B, D, F; `a0R < -1` gives A/B, `|a0R| < 1` gives C/D, `a0R > 1` gives E/F.
    pub fn classify(c0: f64, a0r: f64) -> Panel {
        if c0.abs() <= C0_TOL || (a0r.abs() - 1.0).abs() <= EIG_TOL {
            return Panel::Degenerate;
        }
        Self::from_range(c0, if a0r < -1.0 { 0 } else if a0r < 1.0 { 1 } else { 2 })
    }

    fn from_range(c0: f64, range: usize) -> Panel {
        let neg = c0 < 0.0;
        match (range, neg) {
            (0, true) => Panel::A,
            (0, false) => Panel::B,
            (1, true) => Panel::C,
            (1, false) => Panel::D,
            (2, true) => Panel::E,
            _ => Panel::F,
        }
    }

    /// Panel for an N-dimensional map whose right half is summarized by its
    /// eigenvalue counts beyond `+1` and `-1`. The reduced scalar right slope
    /// exceeds `1` exactly when `sigma_plus` is odd and is below `-1` exactly
    /// when `sigma_minus` is odd.
    pub fn from_parity(c0: f64, sigma_plus_r: usize, sigma_minus_r: usize) -> Panel {
        if c0.abs() <= C0_TOL {
            return Panel::Degenerate;
        }
        match (sigma_plus_r % 2, sigma_minus_r % 2) {
            (1, 0) => Self::from_range(c0, 2),
            (0, 1) => Self::from_range(c0, 0),
            (0, 0) => Self::from_range(c0, 1),
            _ => Panel::Undetermined,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdConditions {
    pub singularity_ok: bool,
    pub transversality_ok: bool,
    pub nondegeneracy_ok: bool,
    /// `f_eta f_xx + 2 f_x eta` at the origin; equals 2 for a normalized map.
    pub transversality: f64,
    /// `(f_xx)^2 / 2 + f_xxx / 3` at the origin; equals `2 c0`.
    pub nondegeneracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldingReport {
    /// `a_R(0,0)`; absent when the right half is only known through sign counts.
    pub a0r: Option<f64>,
    pub c0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub h1_lin: f64,
    pub l1: f64,
    pub h2_lin: f64,
    pub l2: f64,
    pub pd_conditions: PdConditions,
    pub panel: Panel,
    /// `mu_normalized = mu_scale * mu_user`.
    pub mu_scale: f64,
    /// `eta_normalized = eta_scale * eta_user`.
    pub eta_scale: f64,
    pub coeffs: NormalizedCoeffs,
}

impl UnfoldingReport {
    /// Builds the report from the normalized left half-map.
    pub fn from_normalized_half(half: &HalfMap, a0r: Option<f64>, panel: Panel, mu_scale: f64, eta_scale: f64) -> Result<Self> {
        let coeffs = NormalizedCoeffs::from_half(half)?;
        let pd_conditions = pd_conditions(half)?;
        let c0 = coeffs.c0();
        Ok(Self {
            a0r,
            c0,
            k1: coeffs.k1(),
            k2: coeffs.k2(),
            k3: 0.0,
            h1_lin: coeffs.h_lin(),
            l1: coeffs.l1(),
            h2_lin: coeffs.h_lin(),
            l2: coeffs.l2(),
            pd_conditions,
            panel,
            mu_scale,
            eta_scale,
            coeffs,
        })
    }

    /// Quadratic `h1` in normalized parameters.
    pub fn h1(&self, mu: f64) -> f64 {
        h1_curve(self, mu)
    }

    pub fn h2(&self, mu: f64) -> f64 {
        h2_curve(self, mu)
    }

    /// Quadratic `h1` in user parameters.
    pub fn h1_user(&self, mu: f64) -> f64 {
        self.h1(mu * self.mu_scale) / self.eta_scale
    }

    pub fn h2_user(&self, mu: f64) -> f64 {
        self.h2(mu * self.mu_scale) / self.eta_scale
    }

    /// `(linear, quadratic)` coefficients of `h1` in user parameters.
    pub fn h1_user_coeffs(&self) -> (f64, f64) {
        self.user_coeffs(self.h1_lin, self.l1)
    }

    pub fn h2_user_coeffs(&self) -> (f64, f64) {
        self.user_coeffs(self.h2_lin, self.l2)
    }

    fn user_coeffs(&self, lin: f64, quad: f64) -> (f64, f64) {
        (lin * self.mu_scale / self.eta_scale, quad * self.mu_scale * self.mu_scale / self.eta_scale)
    }

    pub fn within_validity(&self, mu_user: f64) -> bool {
        (mu_user * self.mu_scale).abs() <= VALIDITY_RADIUS
    }

    /// Admissible side of the left fixed point. In normalized coordinates
    /// `s* = mu/2 + O(2)`, so it is admissible for `mu_n <= 0`.
    pub fn admissible_mu_sign(&self) -> f64 {
        -self.mu_scale.signum()
    }
}

fn pd_conditions(half: &HalfMap) -> Result<PdConditions> {
    let (_, a, p, q) = half.as_1d().ok_or(Error::DimensionMismatch {
        expected: 1,
        got: half.dim(),
    })?;
    // At x = mu = 0: f_eta = 0, f_xx = 2p, f_x eta = a_eta, f_xxx = 6q.
    let f_eta = 0.0;
    let f_xx = 2.0 * p.value_at_origin();
    let f_xeta = a.d_eta().value_at_origin();
    let f_xxx = 6.0 * q.value_at_origin();
    let transversality = f_eta * f_xx + 2.0 * f_xeta;
    let nondegeneracy = 0.5 * f_xx * f_xx + f_xxx / 3.0;
    Ok(PdConditions {
        singularity_ok: (a.value_at_origin() + 1.0).abs() <= EIG_TOL,
        transversality_ok: transversality.abs() > C0_TOL,
        nondegeneracy_ok: nondegeneracy.abs() > C0_TOL,
        transversality,
        nondegeneracy,
    })
}

/// Full unfolding of a scalar map; normalizes first.
pub fn unfold(map: &PwsMap) -> Result<UnfoldingReport> {
    let n = normalize(map)?;
    let (_, a_r, _, _) = n.map.right().as_1d().expect("scalar map");
    let a0r = a_r.value_at_origin();
    let c0 = NormalizedCoeffs::from_half(n.map.left())?.c0();
    UnfoldingReport::from_normalized_half(n.map.left(), Some(a0r), Panel::classify(c0, a0r), n.mu_scale, n.eta_scale)
}

/// `h1_lin mu + l1 mu^2` (normalized parameters).
pub fn h1_curve(report: &UnfoldingReport, mu: f64) -> f64 {
    report.h1_lin * mu + report.l1 * mu * mu
}

/// `h2_lin mu + l2 mu^2` (normalized parameters).
pub fn h2_curve(report: &UnfoldingReport, mu: f64) -> f64 {
    report.h2_lin * mu + report.l2 * mu * mu
}

/// `g(mu, eta) / (mu b) = 1 + a + mu b p + mu^2 b^2 q`, whose zero set is the
/// exact locus where the origin lies on a two-cycle of the left half-map.
pub fn two_cycle_through_origin_residual(half: &HalfMap, mu: f64, eta: f64) -> f64 {
    let (b, a, p, q) = half.as_1d().expect("scalar half-map");
    let bv = b.eval(mu, eta);
    1.0 + a.eval(mu, eta) + mu * bv * p.eval(mu, eta) + mu * mu * bv * bv * q.eval(mu, eta)
}

/// Exact `h2(mu)` for a scalar map (any parameter scaling), by bracketed root
/// finding in `eta` around `eta_guess`.
pub fn h2_exact(map: &PwsMap, mu: f64, eta_guess: f64, radius: f64) -> Result<f64> {
    let half = map.left();
    let f = |eta: f64| two_cycle_through_origin_residual(half, mu, eta);
    let mut width = radius.min(0.01).max(1e-6);
    while width <= radius * (1.0 + 1e-12) {
        let (lo, hi) = (eta_guess - width, eta_guess + width);
        if f(lo).signum() != f(hi).signum() {
            return numerics::bracketed_root(f, lo, hi, 1e-15);
        }
        width *= 2.0;
    }
    Err(Error::NoConvergence {
        what: "h2 root bracketing",
        iterations: 0,
        residual: f(eta_guess).abs(),
    })
}

/// Multiplier of the left fixed point: `f'(x*)` in 1D, the eigenvalue closest
/// to `-1` otherwise.
pub fn multiplier_at_fixed_point(map: &PwsMap, mu: f64, eta: f64) -> Result<f64> {
    let fp = linalg_bc::half_fixed_point(map.left(), Side::L, mu, eta)?;
    let frozen = map.left().freeze(mu, eta);
    if map.dim() == 1 {
        let mut x = fp.x_star[0];
        for _ in 0..2 {
            let r = frozen.eval1(x) - x;
            let d = frozen.derivs1(x).0 - 1.0;
            x -= r / d;
        }
        return Ok(frozen.derivs1(x).0);
    }
    let j = frozen.jacobian(&fp.x_star);
    numerics::eigenvalues(&j)
        .into_iter()
        .filter(|c| c.im.abs() <= 1e-9)
        .map(|c| c.re)
        .min_by(|a, b| (a + 1.0).abs().total_cmp(&(b + 1.0).abs()))
        .ok_or(Error::DegenerateUnfolding("no real multiplier near -1".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fig2_report() -> UnfoldingReport {
        unfold(&fixtures::fig2()).unwrap()
    }

    #[test]
    fn fig2_report_values() {
        let r = fig2_report();
        assert_eq!(r.c0, 2.5);
        assert_eq!(r.a0r, Some(1.5));
        assert_eq!(r.panel, Panel::F);
        assert_eq!((r.mu_scale, r.eta_scale), (1.0, 1.0));
        assert!((r.k1 + 0.125).abs() < 1e-15 && (r.k2 - 0.25).abs() < 1e-15 && r.k3 == 0.0);
        assert_eq!(r.h1_lin, 1.0);
        assert_eq!(r.h2_lin, 1.0);
        assert!(r.pd_conditions.singularity_ok && r.pd_conditions.transversality_ok && r.pd_conditions.nondegeneracy_ok);
        assert_eq!(r.pd_conditions.transversality, 2.0);
        assert_eq!(r.pd_conditions.nondegeneracy, 5.0);
    }

    #[test]
    fn fig2_h2_is_exact_quadratic() {
        // 1 + a + mu p + mu^2 q = eta - mu + 1.5 mu^2, so h2 = mu - 1.5 mu^2 exactly.
        let r = fig2_report();
        assert!((r.l2 + 1.5).abs() < 1e-15);
        for mu in [-0.2, -0.05, 0.03] {
            let exact = h2_exact(&fixtures::fig2(), mu, r.h2(mu), 0.1).unwrap();
            assert!((exact - r.h2(mu)).abs() < 1e-14);
        }
    }

    #[test]
    fn fig2_h1_prediction_near_traced_value() {
        let r = fig2_report();
        let eta = -0.25;
        let disc = r.h1_lin * r.h1_lin + 4.0 * r.l1 * eta;
        let mu = (-r.h1_lin + disc.sqrt()) / (2.0 * r.l1);
        assert!((r.h1(mu) - eta).abs() < 1e-15);
        assert!((mu + 0.2169).abs() < 1e-2, "{mu}");
    }

    #[test]
    fn degenerate_when_c0_vanishes() {
        let left = HalfMap::one_d(Poly2::constant(1.0), Poly2::from_terms(&[(0, 0, -1.0), (0, 1, 1.0)]), Poly2::default(), Poly2::default());
        let right = HalfMap::one_d(Poly2::constant(1.0), Poly2::constant(0.5), Poly2::default(), Poly2::default());
        let r = unfold(&PwsMap::new(left, right).unwrap()).unwrap();
        assert_eq!(r.panel, Panel::Degenerate);
        assert_eq!(r.l1, r.l2);
    }

    #[test]
    fn normalize_gates() {
        let bad = HalfMap::one_d(Poly2::constant(1.0), Poly2::constant(-0.9), Poly2::default(), Poly2::default());
        let map = PwsMap::new(bad.clone(), bad).unwrap();
        assert!(matches!(normalize(&map), Err(Error::SingularityMissing { .. })));
        let flat = HalfMap::one_d(Poly2::constant(1.0), Poly2::constant(-1.0), Poly2::default(), Poly2::default());
        let map = PwsMap::new(flat.clone(), flat).unwrap();
        assert!(matches!(normalize(&map), Err(Error::DegenerateUnfolding(_))));
    }

    fn scaled_fig2(b0: f64, e0: f64) -> PwsMap {
        let left = HalfMap::one_d(
            Poly2::constant(b0),
            Poly2::from_terms(&[(0, 0, -1.0), (0, 1, e0), (1, 0, 0.3)]),
            Poly2::constant(-1.0),
            Poly2::constant(1.5),
        );
        let right = HalfMap::one_d(Poly2::constant(b0), Poly2::constant(1.5), Poly2::default(), Poly2::default());
        PwsMap::new(left, right).unwrap()
    }

    #[test]
    fn normalization_scales_and_panel_invariance() {
        let map = scaled_fig2(2.0, -1.0);
        let n = normalize(&map).unwrap();
        assert_eq!((n.mu_scale, n.eta_scale), (2.0, -1.0));
        let (b, a, _, _) = n.map.left().as_1d().unwrap();
        assert_eq!(b.value_at_origin(), 1.0);
        assert_eq!(a.coeff(0, 1), 1.0);
        let r = unfold(&map).unwrap();
        let r1 = unfold(&scaled_fig2(1.0, 1.0)).unwrap();
        assert_eq!(r.panel, r1.panel);

        // The h2 locus is a property of the map, not of the parameterization.
        for mu in [-0.04, -0.02, 0.01] {
            let exact = h2_exact(&map, mu, r.h2_user(mu), 0.1).unwrap();
            assert!((exact - r.h2_user(mu)).abs() < 50.0 * (mu as f64).abs().powi(3), "{mu}");
        }
        // h1: the multiplier along the back-mapped quadratic curve is -1 + O(mu^3).
        for mu in [-0.01, 0.005] {
            let m = multiplier_at_fixed_point(&map, mu, r.h1_user(mu)).unwrap();
            assert!((m + 1.0).abs() < 50.0 * (mu as f64).abs().powi(3));
        }
    }

    #[test]
    fn multiplier_examples() {
        let map = fixtures::fig2();
        assert_eq!(multiplier_at_fixed_point(&map, 0.0, 0.0).unwrap(), -1.0);
        let m = multiplier_at_fixed_point(&map, 0.0, 0.1).unwrap();
        assert!((m + 0.9).abs() < 1e-12);
    }

    #[test]
    fn l2_matches_root_found_h2() {
        let c = NormalizedCoeffs {
            alpha1: 0.3,
            alpha3: -0.2,
            alpha4: 0.5,
            alpha5: 0.7,
            beta1: -0.4,
            beta2: 0.9,
            gamma0: 0.6,
            gamma1: -0.8,
            gamma2: 0.1,
            delta0: -0.5,
        };
        let half = c.to_half();
        let map = PwsMap::new(half.clone(), {
            let (b, _, _, _) = half.as_1d().unwrap();
            HalfMap::one_d(b, Poly2::constant(0.5), Poly2::default(), Poly2::default())
        })
        .unwrap();
        let mus = [-4e-3, -2e-3, -1e-3, 1e-3, 2e-3, 4e-3];
        let ys: Vec<f64> = mus.iter().map(|&m| h2_exact(&map, m, c.h_lin() * m, 0.05).unwrap()).collect();
        let fit = numerics::fit_cubic_through_origin(&mus, &ys);
        assert!((fit[0] - c.h_lin()).abs() < 1e-7);
        assert!((fit[1] - c.l2()).abs() < 1e-4, "{} vs {}", fit[1], c.l2());
        assert!((c.l2() - c.l1() + c.c0() / 4.0).abs() < 1e-14);
    }
}
