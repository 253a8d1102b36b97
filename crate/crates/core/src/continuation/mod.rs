//! Curve tracing in the `(mu, eta)` plane and one-parameter sweeps.
//!
//! Every curve is the solution set of an underdetermined system
//! `F(u) = 0`, `F: R^{m+1} -> R^m`, with unknowns `u = [mu, eta, state...]`,
//! followed by pseudo-arclength continuation.

mod codim2;
mod curves;
pub mod output;
mod set;
mod sweep;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, NewtonOptions};

pub use codim2::{detect_codim2, Codim2Point};
pub use curves::{
    bc2_seed, pd_seed, sn_emanation_points, sn_emanation_seed, sn_seed, trace_bc_fixed_curve, trace_bc_twocycle_curve, trace_pd_curve,
    trace_sn_twocycle_curve, verify_point, BifurcationCurve, ADMISSIBILITY_TOL, VERIFY_TOL, CurveKind, CurvePoint, CurveStart, SpecialKind, SpecialPoint,
};
pub use set::{bifurcation_set, CurveSet, SEED_OFFSET};
pub use sweep::{sweep_1param, SweepCell, SweepOptions, SweepResult, Transition, TransitionKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PalcOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Residual tolerance of the corrector.
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for PalcOptions {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            min_step: 1e-7,
            max_step: 1e-2,
            max_steps: 20_000,
            tol: 1e-11,
            max_newton: 10,
        }
    }
}

/// Rectangle in the parameter plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub mu: [f64; 2],
    pub eta: [f64; 2],
}

impl Window {
    pub fn contains(&self, mu: f64, eta: f64) -> bool {
        self.mu[0] <= mu && mu <= self.mu[1] && self.eta[0] <= eta && eta <= self.eta[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub palc: PalcOptions,
    pub window: Window,
    /// Continue through admissibility loss instead of stopping there.
    pub allow_virtual: bool,
}

impl TraceOptions {
    pub fn new(window: Window) -> Self {
        Self {
            palc: PalcOptions::default(),
            window,
            allow_virtual: false,
        }
    }
}

/// Initial orientation of a curve, by the sign of the change in its
/// primary parameter (`eta` for fixed-point border collisions, `mu` otherwise).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Increasing => 1.0,
            Direction::Decreasing => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Window,
    MaxSteps,
    AdmissibilityLoss,
    StepFailure,
}

/// Underdetermined system traced by [`trace`].
pub(crate) trait DefiningSystem {
    /// Number of equations; the unknown vector has one more entry.
    fn equations(&self) -> usize;

    fn residual(&self, u: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        numerics::central_jacobian(&mut |v: &DVector<f64>| self.residual(v), u, self.equations())
    }
}

/// Newton on `F(u) = 0` together with `normal . (u - anchor) = 0`.
pub(crate) fn correct<S: DefiningSystem>(sys: &S, anchor: &DVector<f64>, normal: &DVector<f64>, opts: &PalcOptions) -> Option<(DVector<f64>, usize)> {
    let m = sys.equations();
    let newton = NewtonOptions {
        tol: opts.tol,
        max_iter: opts.max_newton,
        max_step: f64::INFINITY,
    };
    let sol = numerics::newton(anchor.clone(), newton, "continuation corrector", |u| {
        let mut r = DVector::zeros(m + 1);
        r.rows_mut(0, m).copy_from(&sys.residual(u));
        r[m] = normal.dot(&(u - anchor));
        let mut j = DMatrix::zeros(m + 1, m + 1);
        j.rows_mut(0, m).copy_from(&sys.jacobian(u));
        j.row_mut(m).copy_from(&normal.transpose());
        (r, j)
    })
    .ok()?;
    Some((sol.x, sol.iterations))
}

/// Newton with the unknown at `fixed` frozen at its current value.
pub(crate) fn correct_fixed<S: DefiningSystem>(sys: &S, u0: &DVector<f64>, fixed: usize, tol: f64) -> Result<DVector<f64>> {
    let mut normal = DVector::zeros(u0.len());
    normal[fixed] = 1.0;
    let opts = PalcOptions {
        tol,
        max_newton: 40,
        ..PalcOptions::default()
    };
    correct(sys, u0, &normal, &opts).map(|(u, _)| u).ok_or_else(|| Error::SeedInvalid("Newton correction of the series prediction failed".into()))
}

pub(crate) fn tangent<S: DefiningSystem>(sys: &S, u: &DVector<f64>) -> DVector<f64> {
    numerics::null_vector(&sys.jacobian(u))
}

pub(crate) struct TraceOutput {
    pub points: Vec<DVector<f64>>,
    pub termination: Termination,
}

/// What the per-step hook asks the tracer to do with a new point.
pub(crate) enum StepVerdict {
    Accept,
    Stop(Termination),
}

/// Pseudo-arclength continuation from `u0` along the tangent closest to `hint`.
pub(crate) fn trace<S, H>(sys: &S, u0: DVector<f64>, hint: &DVector<f64>, opts: &PalcOptions, mut hook: H) -> Result<TraceOutput>
where
    S: DefiningSystem,
    H: FnMut(&DVector<f64>, &DVector<f64>) -> StepVerdict,
{
    let mut t = tangent(sys, &u0);
    if t.dot(hint) < 0.0 {
        t = -t;
    }
    let mut h = opts.initial_step;
    let mut points = vec![u0];
    let mut step = 0;
    while points.len() < opts.max_steps {
        let u = points.last().expect("non-empty").clone();
        let pred = &u + &t * h;
        let accepted = correct(sys, &pred, &t, opts).filter(|(un, _)| {
            let d = un - &u;
            let len = d.norm();
            len > 0.0 && len < 2.0 * h && d.dot(&t) / len > 0.8
        });
        match accepted {
            Some((un, iters)) => {
                step += 1;
                match hook(&u, &un) {
                    StepVerdict::Stop(term) => {
                        return Ok(TraceOutput { points, termination: term })
                    }
                    StepVerdict::Accept => {}
                }
                t = (&un - &u).normalize();
                points.push(un);
                if iters <= 3 {
                    h = (h * 1.5).min(opts.max_step);
                } else if iters >= 6 {
                    h *= 0.7;
                }
            }
            None => {
                h *= 0.5;
                if h < opts.min_step {
                    if points.len() == 1 {
                        return Err(Error::StepFailure {
                            step,
                            min_step: opts.min_step,
                        });
                    }
                    return Ok(TraceOutput {
                        points,
                        termination: Termination::StepFailure,
                    });
                }
            }
        }
    }
    Ok(TraceOutput {
        points,
        termination: Termination::MaxSteps,
    })
}

/// Point on the curve between `a` and `b` where `test` changes sign, found
/// by root finding along the chord with each trial projected onto the curve.
pub(crate) fn locate<S, T>(sys: &S, a: &DVector<f64>, b: &DVector<f64>, mut test: T, opts: &PalcOptions) -> Option<DVector<f64>>
where
    S: DefiningSystem,
    T: FnMut(&DVector<f64>) -> f64,
{
    let d = b - a;
    let normal = d.normalize();
    let project = |theta: f64| correct(sys, &(a + &d * theta), &normal, opts).map(|(u, _)| u);
    let mut g = |theta: f64| project(theta).map(|u| test(&u)).unwrap_or(f64::NAN);
    let (ga, gb) = (g(0.0), g(1.0));
    if !(ga.is_finite() && gb.is_finite()) || ga.signum() == gb.signum() {
        return None;
    }
    let theta = numerics::bracketed_root(g, 0.0, 1.0, 1e-13).ok()?;
    project(theta)
}
