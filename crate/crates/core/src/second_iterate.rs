//! Two-cycles near the codimension-two point and the local form of the
//! second iterate.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg_bc::{self, multipliers, Multiplier};
use crate::numerics::{self, NewtonOptions};
use crate::pws_map::{FrozenMap, PwsMap, Side, State};
use crate::unfolding1d;

/// Boundary tolerance on `s` when checking itineraries.
pub const SIGN_TOL: f64 = 1e-12;
/// An LL solution closer than this to the fixed point is treated as collapsed.
pub const COLLAPSE_TOL: f64 = 1e-9;

/// Symbolic itinerary of a two-cycle. For `RL` the first point lies on the
/// right (`s >= 0`) and is mapped by the right half-map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Itinerary {
    LL,
    RL,
}

impl Itinerary {
    pub fn sides(self) -> [Side; 2] {
        match self {
            Itinerary::LL => [Side::L, Side::L],
            Itinerary::RL => [Side::R, Side::L],
        }
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Itinerary::LL => "LL",
            Itinerary::RL => "RL",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoCycle {
    pub points: [State; 2],
    pub itinerary: Itinerary,
    pub multipliers: Vec<Multiplier>,
    pub admissible: bool,
    pub residual: f64,
}

impl TwoCycle {
    /// The real multiplier of largest modulus.
    pub fn dominant_multiplier(&self) -> f64 {
        self.multipliers
            .iter()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .map(|m| if m.is_real() { m.re } else { m.abs() })
            .unwrap_or(f64::NAN)
    }

    pub fn is_stable(&self) -> bool {
        self.multipliers.iter().all(|m| m.abs() < 1.0)
    }
}

fn word(points: &[State; 2]) -> String {
    points.iter().map(|p| Side::of(p[0]).letter()).collect()
}

fn consistent(points: &[State; 2], it: Itinerary) -> bool {
    let [a, b] = it.sides();
    let ok = |side: Side, s: f64| match side {
        Side::L => s <= SIGN_TOL,
        Side::R => s >= -SIGN_TOL,
    };
    ok(a, points[0][0]) && ok(b, points[1][0])
}

/// `f_{second}(f_{first}(x))` along an itinerary, ignoring the actual signs.
fn branch_composition(fm: &FrozenMap, it: Itinerary, x: &State) -> (State, State, DMatrix<f64>) {
    let [a, b] = it.sides();
    let x1 = fm.half(a).eval(x);
    let x2 = fm.half(b).eval(&x1);
    let j = fm.half(b).jacobian(&x1) * fm.half(a).jacobian(x);
    (x1, x2, j)
}

fn finish(map: &PwsMap, mu: f64, eta: f64, it: Itinerary, x0: State) -> TwoCycle {
    let fm = map.freeze(mu, eta);
    let (x1, x2, j) = branch_composition(&fm, it, &x0);
    let residual = (&x2 - &x0).amax();
    let points = [x0, x1];
    TwoCycle {
        admissible: consistent(&points, it),
        multipliers: multipliers(&j),
        points,
        itinerary: it,
        residual,
    }
}

fn newton_branch(map: &PwsMap, mu: f64, eta: f64, it: Itinerary, seed: State) -> Result<State> {
    let fm = map.freeze(mu, eta);
    let n = map.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let opts = NewtonOptions {
        tol: 1e-13,
        ..NewtonOptions::default()
    };
    let sol = numerics::newton(seed, opts, "two-cycle Newton", |x| {
        let (_, x2, j) = branch_composition(&fm, it, x);
        (x2 - x, j - &id)
    })?;
    Ok(sol.x)
}

/// `(I - A_L A_R)^{-1} (I + A_L) b mu` with the linear parts at `(mu, eta)`.
pub fn rl_linear_predictor(map: &PwsMap, mu: f64, eta: f64) -> Result<State> {
    let a_l = linalg_bc::linear_part(map.left(), mu, eta);
    let a_r = linalg_bc::linear_part(map.right(), mu, eta);
    let n = map.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let rhs = (&id + &a_l) * linalg_bc::offset_direction(map.left(), mu, eta) * mu;
    numerics::solve(&(&id - &a_l * &a_r), &rhs).ok_or(Error::DegenerateUnfolding("I - A_L A_R is singular".into()))
}

/// Seeds `x* +- d v` for the period-doubled cycle of the left fixed point,
/// with `d` from the local cubic normal form along the critical eigenvector.
fn ll_seeds(map: &PwsMap, mu: f64, eta: f64) -> Result<Vec<State>> {
    let fp = linalg_bc::half_fixed_point(map.left(), Side::L, mu, eta)?;
    let fm = map.left().freeze(mu, eta);
    let j = fm.jacobian(&fp.x_star);
    let lambda = numerics::eigenvalues(&j)
        .into_iter()
        .filter(|c| c.im.abs() <= 1e-9)
        .map(|c| c.re)
        .min_by(|a, b| (a + 1.0).abs().total_cmp(&(b + 1.0).abs()))
        .ok_or(Error::DegenerateUnfolding("no real multiplier near -1".into()))?;
    let v = numerics::real_eigenvector(&j, lambda);
    let w = numerics::real_eigenvector(&j.transpose(), lambda);
    let wv = w.dot(&v);
    let phi = |t: f64| w.dot(&(fm.eval(&(&fp.x_star + &v * t)) - &fp.x_star)) / wv;
    let h = 1e-3;
    let (pm2, pm1, p1, p2) = (phi(-2.0 * h), phi(-h), phi(h), phi(2.0 * h));
    let a2 = (p1 + pm1 - 2.0 * phi(0.0)) / (2.0 * h * h);
    let a3 = (p2 - 2.0 * p1 + 2.0 * pm1 - pm2) / (12.0 * h * h * h);
    let c = a2 * a2 + a3;
    let ratio = -(1.0 + lambda) / c;
    let base = if ratio.is_finite() && ratio > 0.0 { ratio.sqrt() } else { (1.0 + lambda).abs().sqrt() };
    let mut seeds = Vec::new();
    for scale in [1.0, 2.0, 0.5, 4.0] {
        for sign in [1.0, -1.0] {
            seeds.push(&fp.x_star + &v * (sign * scale * base.max(1e-6)));
        }
    }
    Ok(seeds)
}

/// Two-cycle with the given itinerary, admissible or virtual, solved by
/// Newton on the branch composition. `seed` overrides the built-in seed.
pub fn solve_two_cycle_branch(map: &PwsMap, mu: f64, eta: f64, itinerary: Itinerary, seed: Option<&State>) -> Result<TwoCycle> {
    match itinerary {
        Itinerary::RL => {
            let s = match seed {
                Some(s) => s.clone(),
                None => rl_linear_predictor(map, mu, eta)?,
            };
            Ok(finish(map, mu, eta, itinerary, newton_branch(map, mu, eta, itinerary, s)?))
        }
        Itinerary::LL => {
            let fp = linalg_bc::half_fixed_point(map.left(), Side::L, mu, eta)?.x_star;
            let seeds = match seed {
                Some(s) => vec![s.clone()],
                None => ll_seeds(map, mu, eta)?,
            };
            let mut last = Error::CollapsedCycle;
            for s in seeds {
                match newton_branch(map, mu, eta, itinerary, s) {
                    Ok(x) => {
                        let cyc = finish(map, mu, eta, itinerary, x);
                        if (&cyc.points[0] - &cyc.points[1]).amax() > COLLAPSE_TOL && (&cyc.points[0] - &fp).amax() > COLLAPSE_TOL {
                            return Ok(cyc);
                        }
                        last = Error::CollapsedCycle;
                    }
                    Err(e) => last = e,
                }
            }
            Err(last)
        }
    }
}

/// Admissible two-cycle with the requested itinerary.
///
/// Fails with [`Error::WrongItinerary`] when the converged cycle's signs do
/// not match the request.
pub fn find_two_cycle(map: &PwsMap, mu: f64, eta: f64, itinerary: Itinerary) -> Result<TwoCycle> {
    if itinerary == Itinerary::RL {
        let a_l = linalg_bc::linear_part(map.left(), 0.0, eta);
        let a_r = linalg_bc::linear_part(map.right(), 0.0, eta);
        let n = map.dim();
        if (DMatrix::<f64>::identity(n, n) - a_l * a_r).determinant().abs() <= linalg_bc::EIG_TOL {
            return Err(Error::DegenerateUnfolding("I - A_L A_R is singular".into()));
        }
    }
    let cyc = solve_two_cycle_branch(map, mu, eta, itinerary, None)?;
    if !cyc.admissible {
        return Err(Error::WrongItinerary {
            requested: itinerary.to_string(),
            found: word(&cyc.points),
        });
    }
    Ok(cyc)
}

/// Slopes of the second iterate on either side of the switching point, at
/// `eta = h2(mu)` (exact), for a scalar map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F2LocalForm {
    pub mu: f64,
    pub eta: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    /// `d f^2(0) / d eta` at `eta = h2(mu)`.
    pub eta_hat_coeff: f64,
}

pub fn f2_local_form(map: &PwsMap, mu: f64) -> Result<F2LocalForm> {
    if map.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: map.dim() });
    }
    let eta = if mu == 0.0 {
        0.0
    } else {
        let report = unfolding1d::unfold(map)?;
        unfolding1d::h2_exact(map, mu, report.h2_user(mu), unfolding1d::VALIDITY_RADIUS)?
    };
    let fm = map.freeze(mu, eta);
    let y = fm.left.eval1(0.0);
    let outer = fm.deriv1(y);
    let left_slope = outer * fm.left.derivs1(0.0).0;
    let right_slope = outer * fm.right.derivs1(0.0).0;
    let h = 1e-6;
    let g = |e: f64| {
        let f = map.freeze(mu, e);
        f.eval1(f.eval1(0.0))
    };
    Ok(F2LocalForm {
        mu,
        eta,
        left_slope,
        right_slope,
        eta_hat_coeff: (g(eta + h) - g(eta - h)) / (2.0 * h),
    })
}

/// `det(I - A_L) d/deta det(I + A_L) / det(I - A_L A_R)` at the origin, and its sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlSign {
    pub value: f64,
    pub sign: i8,
}

pub fn rl_admissibility_sign(map: &PwsMap) -> Result<RlSign> {
    let n = map.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let a_l = |eta: f64| linalg_bc::linear_part(map.left(), 0.0, eta);
    let a_r = linalg_bc::linear_part(map.right(), 0.0, 0.0);
    let h = 1e-6;
    let d_plus = ((&id + a_l(h)).determinant() - (&id + a_l(-h)).determinant()) / (2.0 * h);
    let den = (&id - a_l(0.0) * &a_r).determinant();
    if den.abs() <= linalg_bc::EIG_TOL {
        return Err(Error::DegenerateUnfolding("I - A_L A_R is singular".into()));
    }
    let value = (&id - a_l(0.0)).determinant() * d_plus / den;
    if value.abs() <= 1e-10 {
        return Err(Error::ZeroSign { value });
    }
    Ok(RlSign {
        value,
        sign: if value > 0.0 { 1 } else { -1 },
    })
}

/// Predicted admissibility of the RL cycle in hatted coordinates:
/// `mu_hat <= 0` and `sign * (eta_hat - h2(mu_hat)) <= 0`.
pub fn rl_admissible_predicted(sign: i8, mu_hat: f64, eta_hat: f64, h2_at_mu_hat: f64) -> bool {
    mu_hat <= 0.0 && sign as f64 * (eta_hat - h2_at_mu_hat) <= 0.0
}

/// `det(I + A_L(0, eta))` as a function of `eta`; its zeros are the
/// codimension-two points on the border-collision line.
pub fn det_i_plus_left(map: &PwsMap, eta: f64) -> f64 {
    numerics::det_i_plus(&linalg_bc::linear_part(map.left(), 0.0, eta))
}

/// Spectrum of `D(f o f)` at a point of a cycle, for cross-checking the
/// itinerary-order invariance of multipliers.
pub fn composed_multipliers(map: &PwsMap, mu: f64, eta: f64, first: &State, it: Itinerary) -> Vec<Multiplier> {
    let fm = map.freeze(mu, eta);
    let (_, _, j) = branch_composition(&fm, it, first);
    multipliers(&j)
}

/// Both points of the cycle swapped: the orbit seen from its second point.
pub fn rotated(cycle: &TwoCycle, map: &PwsMap, mu: f64, eta: f64) -> Vec<Multiplier> {
    let fm = map.freeze(mu, eta);
    let [a, b] = cycle.itinerary.sides();
    let j = fm.half(a).jacobian(&cycle.points[0]) * fm.half(b).jacobian(&cycle.points[1]);
    multipliers(&j)
}
