use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{correct_fixed, locate, trace, DefiningSystem, Direction, StepVerdict, Termination, TraceOptions, TraceOutput};
use crate::center_manifold;
use crate::error::{Error, Result};
use crate::linalg_bc;
use crate::numerics;
use crate::pws_map::{HalfMap, PwsMap, Side, State};
use crate::unfolding1d::{self, UnfoldingReport};

/// Slack on the switching-manifold side test of curve solutions.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;
/// Bound on the defining-system residual of every stored curve point.
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    #[serde(rename = "BC_fixed")]
    BcFixed,
    #[serde(rename = "PD_fixed")]
    PdFixed,
    #[serde(rename = "BC_twocycle")]
    BcTwocycle,
    #[serde(rename = "SN_twocycle")]
    SnTwocycle,
}

impl CurveKind {
    pub fn label(self) -> &'static str {
        match self {
            CurveKind::BcFixed => "BC_fixed",
            CurveKind::PdFixed => "PD_fixed",
            CurveKind::BcTwocycle => "BC_twocycle",
            CurveKind::SnTwocycle => "SN_twocycle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub eta: f64,
    /// Fixed point, or the first point of the two-cycle.
    pub state: Vec<f64>,
    /// Second point of the two-cycle.
    pub partner: Option<Vec<f64>>,
    pub multiplier: f64,
    pub admissible: bool,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecialKind {
    #[serde(rename = "Codim2_BCPD")]
    Codim2BcPd,
    Cusp,
    #[serde(rename = "SN_emanation")]
    SnEmanation,
    AdmissibilityLoss,
}

impl SpecialKind {
    pub fn label(self) -> &'static str {
        match self {
            SpecialKind::Codim2BcPd => "Codim2_BCPD",
            SpecialKind::Cusp => "Cusp",
            SpecialKind::SnEmanation => "SN_emanation",
            SpecialKind::AdmissibilityLoss => "AdmissibilityLoss",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub kind: SpecialKind,
    pub mu: f64,
    pub eta: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationCurve {
    pub kind: CurveKind,
    /// Half-maps applied along the orbit, first letter first.
    pub itinerary: String,
    pub points: Vec<CurvePoint>,
    pub special_points: Vec<SpecialPoint>,
    /// Why the trace stopped at the last point.
    pub termination: Termination,
    /// Why the trace stopped at the first point, for curves joined from two
    /// traces.
    pub start_termination: Option<Termination>,
}

impl BifurcationCurve {
    /// Concatenates two traces started from the same point in opposite
    /// directions into one ordered curve.
    pub fn joined(backward: BifurcationCurve, forward: BifurcationCurve) -> BifurcationCurve {
        let mut points: Vec<CurvePoint> = backward.points.into_iter().rev().collect();
        points.extend(forward.points.into_iter().skip(1));
        let mut special_points = backward.special_points;
        for s in forward.special_points {
            if !special_points.iter().any(|t| t.kind == s.kind && (t.mu - s.mu).abs() < 1e-12 && (t.eta - s.eta).abs() < 1e-12) {
                special_points.push(s);
            }
        }
        BifurcationCurve {
            kind: forward.kind,
            itinerary: forward.itinerary,
            points,
            special_points,
            termination: forward.termination,
            start_termination: Some(backward.termination),
        }
    }
}

/// Starting point of a trace; `state` is the fixed point or the first
/// point of the two-cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveStart {
    pub mu: f64,
    pub eta: f64,
    pub state: State,
}

fn split(u: &DVector<f64>, n: usize) -> (f64, f64, State) {
    (u[0], u[1], DVector::from_iterator(n, u.rows(2, n).iter().copied()))
}

fn eigen_nearest(m: &DMatrix<f64>, target: f64) -> f64 {
    numerics::eigenvalues(m)
        .into_iter()
        .min_by(|a, b| (a.re - target).hypot(a.im).total_cmp(&(b.re - target).hypot(b.im)))
        .map(|c| c.re)
        .unwrap_or(f64::NAN)
}

fn dominant_real(m: &DMatrix<f64>) -> f64 {
    numerics::eigenvalues(m)
        .into_iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .map(|c| if c.im.abs() <= 1e-12 { c.re } else { c.norm() })
        .unwrap_or(f64::NAN)
}

fn side_sign(side: Side) -> f64 {
    match side {
        Side::L => -1.0,
        Side::R => 1.0,
    }
}

/// `f(mu z) / mu` evaluated without dividing by `mu`.
fn scaled_eval(half: &HalfMap, z: &State, mu: f64, eta: f64) -> State {
    let n = half.dim();
    DVector::from_fn(n, |i, _| {
        let mut v = half.b(i).eval(mu, eta);
        for j in 0..n {
            v += half.a(i, j).eval(mu, eta) * z[j];
        }
        for (m, c) in half.nonlinear(i) {
            let deg: u32 = m.iter().map(|&e| e as u32).sum();
            let mono: f64 = m.iter().zip(z.iter()).map(|(&e, zl)| zl.powi(e as i32)).product();
            v += c.eval(mu, eta) * mu.powi(deg as i32 - 1) * mono;
        }
        v
    })
}

struct PdSystem<'a>(&'a PwsMap);

impl DefiningSystem for PdSystem<'_> {
    fn equations(&self) -> usize {
        self.0.dim() + 1
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.0.dim();
        let (mu, eta, x) = split(u, n);
        let left = self.0.left();
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&(left.eval(&x, mu, eta) - &x));
        r[n] = numerics::det_i_plus(&left.jacobian(&x, mu, eta));
        r
    }
}

struct BcFixedSystem<'a>(&'a PwsMap);

impl DefiningSystem for BcFixedSystem<'_> {
    fn equations(&self) -> usize {
        self.0.dim() + 1
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.0.dim();
        let (mu, eta, x) = split(u, n);
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&(self.0.left().eval(&x, mu, eta) - &x));
        r[n] = x[0];
        r
    }
}

/// Left-left two-cycle through the switching manifold, in blown-up
/// coordinates `x = mu z` so that the trivial solution `mu = 0` drops out.
struct Bc2System<'a>(&'a PwsMap);

impl Bc2System<'_> {
    fn unpack(&self, u: &DVector<f64>) -> (f64, f64, State, State) {
        let n = self.0.dim();
        let z0 = DVector::from_iterator(n, u.rows(2, n).iter().copied());
        let z1 = DVector::from_iterator(n, u.rows(2 + n, n).iter().copied());
        (u[0], u[1], z0, z1)
    }
}

impl DefiningSystem for Bc2System<'_> {
    fn equations(&self) -> usize {
        2 * self.0.dim() + 1
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.0.dim();
        let (mu, eta, z0, z1) = self.unpack(u);
        let left = self.0.left();
        let mut r = DVector::zeros(2 * n + 1);
        r.rows_mut(0, n).copy_from(&(scaled_eval(left, &z0, mu, eta) - &z1));
        r.rows_mut(n, n).copy_from(&(scaled_eval(left, &z1, mu, eta) - &z0));
        r[2 * n] = z0[0];
        r
    }
}

/// Two-cycle with itinerary `sides` at which a multiplier equals `+1`.
struct SnSystem<'a> {
    map: &'a PwsMap,
    sides: [Side; 2],
}

impl SnSystem<'_> {
    fn second_iterate(&self, x0: &State, mu: f64, eta: f64) -> (State, State, DMatrix<f64>) {
        let [a, b] = self.sides;
        let (ha, hb) = (self.map.half(a), self.map.half(b));
        let x1 = ha.eval(x0, mu, eta);
        let x2 = hb.eval(&x1, mu, eta);
        let j = hb.jacobian(&x1, mu, eta) * ha.jacobian(x0, mu, eta);
        (x1, x2, j)
    }

    fn margin(&self, u: &DVector<f64>) -> f64 {
        let (mu, eta, x0) = split(u, self.map.dim());
        let (x1, _, _) = self.second_iterate(&x0, mu, eta);
        (side_sign(self.sides[0]) * x0[0]).min(side_sign(self.sides[1]) * x1[0])
    }

    /// Quadratic coefficient of the fold, `w^T D^2 G [v, v]`, with `v` and
    /// `w` oriented against the previous call so the sign is continuous.
    fn fold_coefficient(&self, u: &DVector<f64>, refs: &mut Option<(DVector<f64>, DVector<f64>)>) -> f64 {
        let n = self.map.dim();
        let (mu, eta, x0) = split(u, n);
        let (_, _, j) = self.second_iterate(&x0, mu, eta);
        let dg = j - DMatrix::identity(n, n);
        let mut v = numerics::null_vector(&dg);
        let mut w = numerics::null_vector(&dg.transpose());
        if let Some((vr, wr)) = refs.as_ref() {
            if v.dot(vr) < 0.0 {
                v = -v;
            }
            if w.dot(wr) < 0.0 {
                w = -w;
            }
        }
        let g = |x: &State| self.second_iterate(x, mu, eta).1 - x;
        let h = 1e-4 * (1.0 + x0.amax());
        let d2 = (g(&(&x0 + &v * h)) + g(&(&x0 - &v * h)) - g(&x0) * 2.0) / (h * h);
        *refs = Some((v.clone(), w.clone()));
        w.dot(&d2)
    }
}

impl DefiningSystem for SnSystem<'_> {
    fn equations(&self) -> usize {
        self.map.dim() + 1
    }

    fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.map.dim();
        let (mu, eta, x0) = split(u, n);
        let (_, x2, j) = self.second_iterate(&x0, mu, eta);
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&(x2 - &x0));
        r[n] = numerics::det_i_minus(&j);
        r
    }
}

type Test<'a> = Box<dyn FnMut(&DVector<f64>) -> f64 + 'a>;

struct Tests<'a> {
    /// Nonnegative exactly where the solution is admissible.
    margin: Option<Box<dyn Fn(&DVector<f64>) -> f64 + 'a>>,
    event: Option<(SpecialKind, Test<'a>)>,
    /// Label of an admissibility boundary reached on the `eta`-axis.
    on_axis: SpecialKind,
}

fn drive<S: DefiningSystem>(
    sys: &S,
    u0: DVector<f64>,
    hint: DVector<f64>,
    opts: &TraceOptions,
    mut tests: Tests<'_>,
) -> Result<(TraceOutput, Vec<(SpecialKind, DVector<f64>)>)> {
    let mut pending: Vec<(Option<SpecialKind>, DVector<f64>, DVector<f64>)> = Vec::new();
    let start = u0.clone();
    let mut last_event = tests.event.as_mut().map(|(_, f)| f(&u0));
    let mut out = trace(sys, u0, &hint, &opts.palc, |u, un| {
        if !opts.window.contains(un[0], un[1]) {
            return StepVerdict::Stop(Termination::Window);
        }
        if let Some((kind, f)) = tests.event.as_mut() {
            let value = f(un);
            if let Some(prev) = last_event {
                if prev.signum() != value.signum() && prev != 0.0 {
                    pending.push((Some(*kind), u.clone(), un.clone()));
                }
            }
            last_event = Some(value);
        }
        if let Some(m) = tests.margin.as_ref() {
            if m(u) >= -ADMISSIBILITY_TOL && m(un) < -ADMISSIBILITY_TOL {
                pending.push((None, u.clone(), un.clone()));
                if !opts.allow_virtual {
                    return StepVerdict::Stop(Termination::AdmissibilityLoss);
                }
            }
        }
        StepVerdict::Accept
    })?;
    let mut specials = Vec::new();
    for (kind, a, b) in pending {
        match kind {
            Some(kind) => {
                let (_, f) = tests.event.as_mut().expect("event test present");
                if let Some(p) = locate(sys, &a, &b, |u| f(u), &opts.palc) {
                    specials.push((kind, p));
                }
            }
            None => {
                let m = tests.margin.as_ref().expect("margin present");
                let p = if m(&a) <= ADMISSIBILITY_TOL { Some(a.clone()) } else { locate(sys, &a, &b, |u| m(u), &opts.palc) };
                if let Some(p) = p.filter(|p| (p - &start).amax() > 1e-12) {
                    // A curve stopped by admissibility loss ends on the boundary.
                    if out.termination == Termination::AdmissibilityLoss && out.points.last() == Some(&a) && p != a {
                        out.points.push(p.clone());
                    }
                    let kind = if p[0].abs() <= 1e-8 { tests.on_axis } else { SpecialKind::AdmissibilityLoss };
                    specials.push((kind, p));
                }
            }
        }
    }
    Ok((out, specials))
}

fn finish<S: DefiningSystem>(
    sys: &S,
    kind: CurveKind,
    itinerary: &str,
    out: TraceOutput,
    specials: Vec<(SpecialKind, DVector<f64>)>,
    to_point: impl Fn(&DVector<f64>) -> CurvePoint,
) -> BifurcationCurve {
    BifurcationCurve {
        kind,
        itinerary: itinerary.into(),
        points: out.points.iter().map(to_point).collect(),
        special_points: specials
            .into_iter()
            .map(|(k, u)| SpecialPoint {
                kind: k,
                mu: u[0],
                eta: u[1],
                residual: sys.residual(&u).amax(),
            })
            .collect(),
        termination: out.termination,
        start_termination: None,
    }
}

fn hint(len: usize, index: usize, direction: Direction) -> DVector<f64> {
    let mut h = DVector::zeros(len);
    h[index] = direction.sign();
    h
}

fn check_start<S: DefiningSystem>(sys: &S, u0: &DVector<f64>) -> Result<()> {
    let r = sys.residual(u0).amax();
    if !(r <= 1e-8) {
        return Err(Error::SeedInvalid(format!("start point residual {r:.3e} exceeds 1e-8")));
    }
    Ok(())
}

fn pack(mu: f64, eta: f64, parts: &[&State]) -> DVector<f64> {
    let mut v = vec![mu, eta];
    for p in parts {
        v.extend(p.iter().copied());
    }
    DVector::from_vec(v)
}

fn pd_point(map: &PwsMap, u: &DVector<f64>) -> CurvePoint {
    let (mu, eta, x) = split(u, map.dim());
    let j = map.left().jacobian(&x, mu, eta);
    CurvePoint {
        mu,
        eta,
        state: x.iter().copied().collect(),
        partner: None,
        multiplier: eigen_nearest(&j, -1.0),
        admissible: x[0] <= ADMISSIBILITY_TOL,
        residual: PdSystem(map).residual(u).amax(),
    }
}

/// Period-doubling locus of the left fixed point.
pub fn trace_pd_curve(map: &PwsMap, start: &CurveStart, direction: Direction, opts: &TraceOptions) -> Result<BifurcationCurve> {
    let sys = PdSystem(map);
    let u0 = pack(start.mu, start.eta, &[&start.state]);
    check_start(&sys, &u0)?;
    let tests = Tests {
        margin: Some(Box::new(|u: &DVector<f64>| -u[2])),
        event: None,
        on_axis: SpecialKind::Codim2BcPd,
    };
    let (out, specials) = drive(&sys, u0.clone(), hint(u0.len(), 0, direction), opts, tests)?;
    Ok(finish(&sys, CurveKind::PdFixed, "L", out, specials, |u| pd_point(map, u)))
}

/// Border collision of the left fixed point (`s* = 0`), with the points
/// where it meets the period-doubling locus marked.
pub fn trace_bc_fixed_curve(map: &PwsMap, start: &CurveStart, direction: Direction, opts: &TraceOptions) -> Result<BifurcationCurve> {
    let sys = BcFixedSystem(map);
    let u0 = pack(start.mu, start.eta, &[&start.state]);
    check_start(&sys, &u0)?;
    let n = map.dim();
    let tests = Tests {
        margin: None,
        event: Some((
            SpecialKind::Codim2BcPd,
            Box::new(move |u: &DVector<f64>| {
                let (mu, eta, x) = split(u, n);
                numerics::det_i_plus(&map.left().jacobian(&x, mu, eta))
            }),
        )),
        on_axis: SpecialKind::Codim2BcPd,
    };
    let (out, specials) = drive(&sys, u0.clone(), hint(u0.len(), 1, direction), opts, tests)?;
    Ok(finish(&sys, CurveKind::BcFixed, "L", out, specials, |u| {
        let mut p = pd_point(map, u);
        p.residual = sys.residual(u).amax();
        p.admissible = true;
        p
    }))
}

/// Border collision of the left-left two-cycle: one cycle point on `s = 0`.
pub fn trace_bc_twocycle_curve(map: &PwsMap, start: &CurveStart, direction: Direction, opts: &TraceOptions) -> Result<BifurcationCurve> {
    if start.mu == 0.0 {
        return Err(Error::SeedInvalid("two-cycle border collisions are traced from mu != 0".into()));
    }
    let n = map.dim();
    let sys = Bc2System(map);
    let z0 = &start.state / start.mu;
    let z1 = map.left().eval(&start.state, start.mu, start.eta) / start.mu;
    let u0 = pack(start.mu, start.eta, &[&z0, &z1]);
    check_start(&sys, &u0)?;
    let tests = Tests {
        margin: Some(Box::new(move |u: &DVector<f64>| -u[0] * u[2 + n])),
        event: None,
        on_axis: SpecialKind::Codim2BcPd,
    };
    let (out, specials) = drive(&sys, u0.clone(), hint(u0.len(), 0, direction), opts, tests)?;
    Ok(finish(&sys, CurveKind::BcTwocycle, "LL", out, specials, |u| {
        let (mu, eta, z0, z1) = sys.unpack(u);
        let (x0, x1) = (&z0 * mu, &z1 * mu);
        let j = map.left().jacobian(&x1, mu, eta) * map.left().jacobian(&x0, mu, eta);
        CurvePoint {
            mu,
            eta,
            state: x0.iter().copied().collect(),
            partner: Some(x1.iter().copied().collect()),
            multiplier: dominant_real(&j),
            admissible: x1[0] <= ADMISSIBILITY_TOL,
            residual: sys.residual(u).amax(),
        }
    }))
}

/// Saddle-node locus of two-cycles with itinerary `sides` (first point on
/// `sides[0]`), with cusp points marked.
pub fn trace_sn_twocycle_curve(map: &PwsMap, start: &CurveStart, sides: [Side; 2], direction: Direction, opts: &TraceOptions) -> Result<BifurcationCurve> {
    let sys = SnSystem { map, sides };
    let u0 = pack(start.mu, start.eta, &[&start.state]);
    check_start(&sys, &u0)?;
    let mut refs = None;
    let tests = Tests {
        margin: Some(Box::new(|u: &DVector<f64>| sys.margin(u))),
        event: Some((SpecialKind::Cusp, Box::new(|u: &DVector<f64>| sys.fold_coefficient(u, &mut refs)))),
        on_axis: SpecialKind::SnEmanation,
    };
    let (out, specials) = drive(&sys, u0.clone(), hint(u0.len(), 0, direction), opts, tests)?;
    let itinerary: String = sides.iter().map(|s| s.letter()).collect();
    let n = map.dim();
    let mut curve = finish(&sys, CurveKind::SnTwocycle, &itinerary, out, specials, |u| {
        let (mu, eta, x0) = split(u, n);
        let (x1, _, j) = sys.second_iterate(&x0, mu, eta);
        CurvePoint {
            mu,
            eta,
            state: x0.iter().copied().collect(),
            partner: Some(x1.iter().copied().collect()),
            multiplier: eigen_nearest(&j, 1.0),
            admissible: sys.margin(u) >= -ADMISSIBILITY_TOL,
            residual: sys.residual(u).amax(),
        }
    });
    if start.mu == 0.0 && start.state.amax() == 0.0 {
        curve.special_points.insert(
            0,
            SpecialPoint {
                kind: SpecialKind::SnEmanation,
                mu: 0.0,
                eta: start.eta,
                residual: sys.residual(&u0).amax(),
            },
        );
    }
    Ok(curve)
}

/// Defining-system residual of a stored curve point, evaluated directly
/// from the map in unscaled coordinates. Fixed-point and border-collision
/// curves use the half named by the first letter of the itinerary.
pub fn verify_point(map: &PwsMap, curve: &BifurcationCurve, p: &CurvePoint) -> f64 {
    let x = DVector::from_column_slice(&p.state);
    let (mu, eta) = (p.mu, p.eta);
    let sides: Vec<Side> = curve.itinerary.chars().map(|c| if c == 'R' { Side::R } else { Side::L }).collect();
    let half = map.half(sides.first().copied().unwrap_or(Side::L));
    match curve.kind {
        CurveKind::PdFixed => {
            let r = (half.eval(&x, mu, eta) - &x).amax();
            r.max(numerics::det_i_plus(&half.jacobian(&x, mu, eta)).abs())
        }
        CurveKind::BcFixed => (half.eval(&x, mu, eta) - &x).amax().max(x[0].abs()),
        CurveKind::BcTwocycle => {
            let y = DVector::from_column_slice(p.partner.as_deref().unwrap_or(&p.state));
            (half.eval(&x, mu, eta) - &y).amax().max((half.eval(&y, mu, eta) - &x).amax()).max(x[0].abs())
        }
        CurveKind::SnTwocycle => {
            let sys = SnSystem {
                map,
                sides: [sides[0], sides[1]],
            };
            sys.residual(&pack(mu, eta, &[&x])).amax()
        }
    }
}

fn report(map: &PwsMap) -> Result<UnfoldingReport> {
    if map.dim() == 1 {
        unfolding1d::unfold(map)
    } else {
        Ok(center_manifold::nd_unfold(map)?.report)
    }
}

fn seed_error(e: Error) -> Error {
    match e {
        Error::SeedInvalid(_) => e,
        other => Error::SeedInvalid(other.to_string()),
    }
}

/// Point on the period-doubling locus at `mu`, predicted by the quadratic
/// `h1` and corrected by Newton in `(eta, x)`.
pub fn pd_seed(map: &PwsMap, mu: f64) -> Result<CurveStart> {
    let eta = report(map)?.h1_user(mu);
    let fp = linalg_bc::half_fixed_point(map.left(), Side::L, mu, eta).map_err(seed_error)?;
    let u = correct_fixed(&PdSystem(map), &pack(mu, eta, &[&fp.x_star]), 0, 1e-12)?;
    let (mu, eta, x) = split(&u, map.dim());
    Ok(CurveStart { mu, eta, state: x })
}

/// Point on the two-cycle border-collision locus at `mu`, predicted by `h2`.
pub fn bc2_seed(map: &PwsMap, mu: f64) -> Result<CurveStart> {
    if mu == 0.0 {
        return Err(Error::SeedInvalid("mu must be nonzero".into()));
    }
    let rep = report(map)?;
    let mut eta = rep.h2_user(mu);
    if map.dim() == 1 {
        eta = unfolding1d::h2_exact(map, mu, eta, unfolding1d::VALIDITY_RADIUS).unwrap_or(eta);
    }
    let n = map.dim();
    let z0 = DVector::zeros(n);
    let z1 = linalg_bc::offset_direction(map.left(), mu, eta);
    let sys = Bc2System(map);
    let u = correct_fixed(&sys, &pack(mu, eta, &[&z0, &z1]), 0, 1e-12)?;
    let (mu, eta, z0, _) = sys.unpack(&u);
    Ok(CurveStart { mu, eta, state: z0 * mu })
}

/// Values of `eta` in `[lo, hi]` where `I - A_L(0, eta) A_R(0, eta)` is
/// singular: a two-cycle of the piecewise-linear part has multiplier `+1`,
/// and a saddle-node locus of two-cycles leaves the `eta`-axis.
pub fn sn_emanation_points(map: &PwsMap, eta_window: [f64; 2]) -> Vec<f64> {
    let det = |eta: f64| {
        let a_l = linalg_bc::linear_part(map.left(), 0.0, eta);
        let a_r = linalg_bc::linear_part(map.right(), 0.0, eta);
        numerics::det_i_minus(&(a_l * a_r))
    };
    numerics::all_roots(det, eta_window[0], eta_window[1], 400, 1e-15)
}

/// Saddle-node point near a user-supplied guess, corrected by Newton at
/// fixed `eta`. Overrides the series-derived seed.
pub fn sn_seed(map: &PwsMap, sides: [Side; 2], eta: f64, mu_guess: f64, x_guess: &State) -> Result<CurveStart> {
    let sys = SnSystem { map, sides };
    let u = correct_fixed(&sys, &pack(mu_guess, eta, &[x_guess]), 1, 1e-12)?;
    let (mu, eta, x) = split(&u, map.dim());
    Ok(CurveStart { mu, eta, state: x })
}

pub fn sn_emanation_seed(map: &PwsMap, eta: f64) -> CurveStart {
    CurveStart {
        mu: 0.0,
        eta,
        state: DVector::zeros(map.dim()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::Window;
    use crate::fixtures;

    fn opts(mu: [f64; 2], eta: [f64; 2]) -> TraceOptions {
        TraceOptions::new(Window { mu, eta })
    }

    #[test]
    fn fig2_pd_curve_passes_caption_point() {
        let map = fixtures::fig2();
        let start = pd_seed(&map, -0.05).unwrap();
        let c = trace_pd_curve(&map, &start, Direction::Decreasing, &opts([-0.4, 0.1], [-0.4, 0.1])).unwrap();
        let cross: Vec<f64> = c
            .points
            .windows(2)
            .filter(|w| (w[0].eta + 0.25) * (w[1].eta + 0.25) <= 0.0)
            .map(|w| w[0].mu + (w[1].mu - w[0].mu) * (-0.25 - w[0].eta) / (w[1].eta - w[0].eta))
            .collect();
        assert_eq!(cross.len(), 1);
        assert!((cross[0] + 0.2169).abs() < 1e-4, "{}", cross[0]);
        for p in &c.points {
            assert!(verify_point(&map, &c, p) < 1e-9);
            assert!((p.multiplier + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fig2_pd_curve_ends_at_codim2_point() {
        let map = fixtures::fig2();
        let start = pd_seed(&map, -0.05).unwrap();
        let c = trace_pd_curve(&map, &start, Direction::Increasing, &opts([-0.4, 0.1], [-0.4, 0.1])).unwrap();
        assert_eq!(c.termination, Termination::AdmissibilityLoss);
        let s = &c.special_points[0];
        assert_eq!(s.kind, SpecialKind::Codim2BcPd);
        assert!(s.mu.abs() < 1e-10 && s.eta.abs() < 1e-10, "{s:?}");
    }

    #[test]
    fn fig2_bc2_curve_matches_exact_h2() {
        let map = fixtures::fig2();
        let start = bc2_seed(&map, -0.1).unwrap();
        let c = trace_bc_twocycle_curve(&map, &start, Direction::Decreasing, &opts([-0.3, 0.1], [-0.4, 0.1])).unwrap();
        for p in &c.points {
            // h2(mu) = mu - 1.5 mu^2 exactly for this map.
            assert!((p.eta - (p.mu - 1.5 * p.mu * p.mu)).abs() < 1e-10);
            assert!(verify_point(&map, &c, p) < 1e-9);
        }
        assert!(c.points.iter().any(|p| (p.mu + 0.1937).abs() < 5e-3));
    }

    #[test]
    fn pdmapex_bc2_is_a_straight_line() {
        let map = fixtures::pdmapex();
        let start = bc2_seed(&map, 0.1).unwrap();
        let w = opts([-0.1, 0.25], [-0.1, 0.1]);
        let up = trace_bc_twocycle_curve(&map, &start, Direction::Increasing, &w).unwrap();
        let down = trace_bc_twocycle_curve(&map, &start, Direction::Decreasing, &w).unwrap();
        assert_eq!(down.special_points[0].kind, SpecialKind::Codim2BcPd);
        let c = BifurcationCurve::joined(down, up);
        assert!(c.points.first().unwrap().mu.abs() < 1e-12 && c.points.last().unwrap().mu > 0.2);
        for p in &c.points {
            assert!((p.eta + p.mu / 6.0).abs() < 1e-10, "{p:?}");
        }
    }

    #[test]
    fn bc_fixed_marks_codim2_point_of_fig2() {
        let map = fixtures::fig2();
        let start = sn_emanation_seed(&map, 0.05);
        let c = trace_bc_fixed_curve(&map, &start, Direction::Decreasing, &opts([-0.1, 0.1], [-0.3, 0.1])).unwrap();
        let etas: Vec<f64> = c.special_points.iter().map(|s| s.eta).collect();
        assert_eq!(etas.len(), 1);
        assert!(etas[0].abs() < 1e-12);
    }

    #[test]
    fn pdmapex_sn_emanation_root() {
        let roots = sn_emanation_points(&fixtures::pdmapex(), [-0.25, 0.05]);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - (-4.0 + 10f64.sqrt()) / 9.0).abs() < 1e-12);
    }

    #[test]
    fn pdmapex_pd_curve_matches_exact_inverse() {
        let map = fixtures::pdmapex();
        let start = pd_seed(&map, 0.01).unwrap();
        let w = opts([-0.1, 0.25], [-0.05, 0.05]);
        let down = trace_pd_curve(&map, &start, Direction::Decreasing, &w).unwrap();
        assert_eq!(down.special_points[0].kind, SpecialKind::Codim2BcPd);
        let c = BifurcationCurve::joined(down, trace_pd_curve(&map, &start, Direction::Increasing, &w).unwrap());
        assert!(c.points.iter().any(|p| p.eta < -0.03));
        for p in &c.points {
            assert!((p.mu - (-6.0 * p.eta - 4.5 * p.eta * p.eta)).abs() < 1e-6, "{p:?}");
            assert!(verify_point(&map, &c, p) < 1e-9);
        }
    }

    #[test]
    fn pdmapex_sn_curve_has_cusp() {
        let map = fixtures::pdmapex();
        let eta0 = sn_emanation_points(&map, [-0.25, 0.05])[0];
        let start = sn_emanation_seed(&map, eta0);
        let w = opts([-0.35, 0.05], [-0.25, 0.05]);
        let c = trace_sn_twocycle_curve(&map, &start, [Side::R, Side::L], Direction::Decreasing, &w).unwrap();
        assert_eq!(c.special_points[0].kind, SpecialKind::SnEmanation);
        let cusp = c.special_points.iter().find(|s| s.kind == SpecialKind::Cusp).unwrap();
        assert!((cusp.mu + 1.0 / 18.0).abs() < 1e-6 && (cusp.eta + 1.0 / 9.0).abs() < 1e-6, "{cusp:?}");
        assert!(c.points.iter().all(|p| p.admissible && (p.multiplier - 1.0).abs() < 1e-8));
        // Opposite direction leaves admissibility at once.
        let other = trace_sn_twocycle_curve(&map, &start, [Side::R, Side::L], Direction::Increasing, &w).unwrap();
        assert_eq!(other.points.len(), 1);
        assert!(other.special_points.iter().all(|s| s.kind == SpecialKind::SnEmanation));
    }

    #[test]
    fn sn_curve_of_quadratic_composition_matches_discriminant() {
        use crate::poly::Poly2;
        // f_R(x) = mu - 2x + x^2, f_L(x) = mu + eta x. Right-left two-cycles
        // solve eta x^2 - (2 eta + 1) x + mu (1 + eta) = 0, which folds at
        // mu = (2 eta + 1)^2 / (4 eta (1 + eta)), x = (2 eta + 1) / (2 eta).
        let right = HalfMap::one_d(Poly2::constant(1.0), Poly2::constant(-2.0), Poly2::constant(1.0), Poly2::constant(0.0));
        let left = HalfMap::one_d(Poly2::constant(1.0), Poly2::from_terms(&[(0, 1, 1.0)]), Poly2::constant(0.0), Poly2::constant(0.0));
        let map = PwsMap::new(left, right).unwrap();
        let start = sn_seed(&map, [Side::R, Side::L], 0.5, 1.3, &DVector::from_element(1, 1.9)).unwrap();
        let mut w = opts([0.0, 10.0], [0.2, 1.0]);
        w.allow_virtual = true;
        for dir in [Direction::Increasing, Direction::Decreasing] {
            let c = trace_sn_twocycle_curve(&map, &start, [Side::R, Side::L], dir, &w).unwrap();
            assert_eq!(c.termination, Termination::Window);
            for p in &c.points {
                let e = p.eta;
                assert!((p.mu - (2.0 * e + 1.0).powi(2) / (4.0 * e * (1.0 + e))).abs() < 1e-9, "{p:?}");
                assert!((p.state[0] - (2.0 * e + 1.0) / (2.0 * e)).abs() < 1e-6, "{p:?}");
            }
        }
    }

    #[test]
    fn pd_and_bc2_curves_are_tangent_at_the_origin() {
        let map = fixtures::pdmapex();
        let w = opts([-0.01, 0.06], [-0.05, 0.05]);
        let pd = trace_pd_curve(&map, &pd_seed(&map, 0.05).unwrap(), Direction::Decreasing, &w).unwrap();
        let bc = trace_bc_twocycle_curve(&map, &bc2_seed(&map, 0.05).unwrap(), Direction::Decreasing, &w).unwrap();
        let fit = |c: &BifurcationCurve| {
            let (x, y): (Vec<f64>, Vec<f64>) = c.points.iter().map(|p| (p.mu, p.eta)).unzip();
            numerics::fit_cubic_through_origin(&x, &y)
        };
        let (a, b) = (fit(&pd), fit(&bc));
        assert!((a[0] - b[0]).abs() < 1e-6, "{a:?} {b:?}");
        // Quadratic gap h2 - h1 = mu^2 / 48.
        assert!(((b[1] - a[1]) - 1.0 / 48.0).abs() < 1e-3, "{a:?} {b:?}");
    }

    #[test]
    fn seeds_reject_bad_starts() {
        let map = fixtures::fig2();
        let bad = CurveStart {
            mu: -0.1,
            eta: 0.3,
            state: DVector::from_element(1, 0.0),
        };
        let err = trace_pd_curve(&map, &bad, Direction::Increasing, &opts([-1.0, 1.0], [-1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::SeedInvalid(_)));
        assert!(bc2_seed(&map, 0.0).is_err());
    }
}
