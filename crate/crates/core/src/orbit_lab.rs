//! Brute-force dynamics: periodic orbits by itinerary, Lyapunov exponents,
//! attractor classification and a sampled chaos certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg_bc::{multipliers, Multiplier};
use crate::numerics::{self, NewtonOptions};
use crate::pws_map::{FrozenMap, PwsMap, Side, State};
use crate::unfolding1d;

/// Largest period accepted by [`find_periodic_orbits`].
pub const MAX_PERIOD: usize = 12;
pub const SEEDS_PER_WORD: usize = 5;
pub const RECURRENCE_TOL: f64 = 1e-8;
pub const MAX_DETECTED_PERIOD: usize = 64;
pub const INVARIANCE_GRID: usize = 10_000;
pub const INVARIANCE_MARGIN: f64 = 1e-12;
pub const CRITICAL_EXCLUSION: f64 = 1e-9;
/// Distance within which a slowly converging orbit is handed to Newton.
pub const POLISH_RADIUS: f64 = 1e-3;
/// Number of longer transients tried before an orbit is called aperiodic.
pub const EXTENSIONS: usize = 2;
/// Each extended transient is this many times the original budget.
pub const EXTENSION_FACTOR: usize = 4;
/// Smallest Lyapunov exponent labelled chaotic.
pub const CHAOTIC_LYAPUNOV: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<State>,
    pub itinerary: String,
    /// Product of one-sided derivatives (1D) or the eigenvalue of largest
    /// modulus of the composed Jacobian (real part if real, modulus otherwise).
    pub multiplier: f64,
    pub multipliers: Vec<Multiplier>,
    pub residual: f64,
}

impl PeriodicOrbit {
    pub fn is_stable(&self) -> bool {
        self.multipliers.iter().all(|m| m.abs() < 1.0)
    }

    /// Smallest signed distance of a point to the switching manifold,
    /// positive on the side its letter prescribes; negative means virtual.
    pub fn admissibility_margin(&self) -> f64 {
        self.itinerary
            .chars()
            .zip(&self.points)
            .map(|(c, p)| if c == 'L' { -p[0] } else { p[0] })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicSearch {
    pub orbits: Vec<PeriodicOrbit>,
    /// Words for which no seed converged to an admissible orbit or a clear
    /// rejection; absence of orbits with these itineraries is not established.
    pub unconverged_words: Vec<String>,
    pub words_tried: usize,
}

/// Box `|x_i| <= radius` in which orbits are sought.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub radius: f64,
}

/// Binary necklaces (`0 = L`, `1 = R`) of length `1..=n`: one representative,
/// the lexicographically least rotation, per cyclic class of words. Periodic
/// words such as `LL` are kept because an orbit may have an itinerary whose
/// period divides its own.
pub fn necklaces(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for len in 1..=n {
        for bits in 0u32..(1 << len) {
            let rot = |r: usize| ((bits >> r) | (bits << (len - r))) & ((1 << len) - 1);
            if (1..len).all(|r| rot(r) >= bits) {
                out.push((0..len).map(|k| ((bits >> (len - 1 - k)) & 1) as u8).collect());
            }
        }
    }
    out
}

fn side_of_letter(c: u8) -> Side {
    if c == 0 {
        Side::L
    } else {
        Side::R
    }
}

fn word_string(w: &[u8]) -> String {
    w.iter().map(|&c| side_of_letter(c).letter()).collect()
}

/// Multiple-shooting residual `f_{w_k}(x_k) - x_{k+1}` and its Jacobian.
fn shooting_system(fm: &FrozenMap, w: &[u8], z: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = w.len();
    let d = fm.dim();
    let mut r = DVector::zeros(n * d);
    let mut j = DMatrix::zeros(n * d, n * d);
    for k in 0..n {
        let half = fm.half(side_of_letter(w[k]));
        let xk = DVector::from_iterator(d, z.rows(k * d, d).iter().copied());
        let next = (k + 1) % n;
        let fx = half.eval(&xk);
        let jk = half.jacobian(&xk);
        for i in 0..d {
            r[k * d + i] = fx[i] - z[next * d + i];
            j[(k * d + i, next * d + i)] -= 1.0;
            for l in 0..d {
                j[(k * d + i, k * d + l)] += jk[(i, l)];
            }
        }
    }
    (r, j)
}

fn orbit_from(fm: &FrozenMap, w: &[u8], z: &DVector<f64>) -> PeriodicOrbit {
    let n = w.len();
    let d = fm.dim();
    let points: Vec<State> = (0..n).map(|k| DVector::from_iterator(d, z.rows(k * d, d).iter().copied())).collect();
    let mut m = DMatrix::identity(d, d);
    let mut residual: f64 = 0.0;
    for k in 0..n {
        let half = fm.half(side_of_letter(w[k]));
        m = half.jacobian(&points[k]) * m;
        residual = residual.max((half.eval(&points[k]) - &points[(k + 1) % n]).amax());
    }
    let mults = multipliers(&m);
    let multiplier = if d == 1 {
        m[(0, 0)]
    } else {
        mults
            .iter()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .map(|c| if c.is_real() { c.re } else { c.abs() })
            .unwrap_or(f64::NAN)
    };
    PeriodicOrbit {
        period: n,
        points,
        itinerary: word_string(w),
        multiplier,
        multipliers: mults,
        residual,
    }
}

fn letter_consistent(w: &[u8], points: &[State]) -> bool {
    w.iter().zip(points).all(|(&c, p)| match side_of_letter(c) {
        Side::L => p[0] <= 1e-12,
        Side::R => p[0] >= -1e-12,
    })
}

fn has_shorter_period(points: &[State]) -> bool {
    minimal_period(points) < points.len()
}

fn minimal_period(points: &[State]) -> usize {
    let n = points.len();
    (1..n)
        .filter(|d| n % d == 0)
        .find(|&d| (0..n - d).all(|k| (&points[k + d] - &points[k]).amax() <= RECURRENCE_TOL))
        .unwrap_or(n)
}

/// Newton-refined cycle through `seed`, reduced to its minimal period.
fn refined_cycle(map: &PwsMap, mu: f64, eta: f64, seed: &[State]) -> Option<PeriodicOrbit> {
    let orbit = solve_orbit(map, mu, eta, &itinerary_of(seed), seed).ok()?;
    let q = minimal_period(&orbit.points);
    if q == orbit.points.len() {
        return Some(orbit);
    }
    let pts = &orbit.points[..q];
    solve_orbit(map, mu, eta, &itinerary_of(pts), pts).ok()
}

fn same_orbit(a: &PeriodicOrbit, b: &PeriodicOrbit) -> bool {
    a.period == b.period && a.itinerary == b.itinerary && (0..a.period).any(|shift| (0..a.period).all(|k| (&a.points[k] - &b.points[(k + shift) % a.period]).amax() <= RECURRENCE_TOL))
}

fn parse_itinerary(itinerary: &str) -> Result<Vec<u8>> {
    itinerary
        .chars()
        .map(|c| match c {
            'L' => Ok(0),
            'R' => Ok(1),
            _ => Err(Error::Config(format!("itinerary {itinerary:?} may only contain L and R"))),
        })
        .collect()
}

/// Sign word of a sequence of states.
pub fn itinerary_of(points: &[State]) -> String {
    points.iter().map(|p| Side::of(p[0]).letter()).collect()
}

/// Newton solve for the orbit that applies the half-maps in the order of
/// `itinerary`, starting from `seed` (one state per letter). The result may
/// be virtual; see [`PeriodicOrbit::admissibility_margin`].
pub fn solve_orbit(map: &PwsMap, mu: f64, eta: f64, itinerary: &str, seed: &[State]) -> Result<PeriodicOrbit> {
    let w = parse_itinerary(itinerary)?;
    if seed.len() != w.len() || w.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: seed.len(),
        });
    }
    let fm = map.freeze(mu, eta);
    let d = map.dim();
    let z = DVector::from_iterator(w.len() * d, seed.iter().flat_map(|p| p.iter().copied()));
    let opts = NewtonOptions {
        tol: 1e-12,
        max_iter: 40,
        max_step: 1.0,
    };
    let sol = numerics::newton(z, opts, "orbit Newton", |z| shooting_system(&fm, &w, z))?;
    Ok(orbit_from(&fm, &w, &sol.x))
}

/// Itinerary-complete search for admissible periodic orbits of period
/// `1..=n_max` inside `domain`, with multi-start Newton per necklace.
pub fn find_periodic_orbits(map: &PwsMap, mu: f64, eta: f64, n_max: usize, domain: Domain) -> Result<PeriodicSearch> {
    if n_max > MAX_PERIOD {
        return Err(Error::CostGuard {
            n_max,
            limit: MAX_PERIOD,
        });
    }
    let fm = map.freeze(mu, eta);
    let d = map.dim();
    let words = necklaces(n_max);
    let opts = NewtonOptions {
        tol: 1e-12,
        max_iter: 40,
        max_step: domain.radius,
    };
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    let mut unconverged = Vec::new();
    for w in &words {
        let n = w.len();
        let mut any_outcome = false;
        for s in 0..SEEDS_PER_WORD {
            let t = (2 * s + 1) as f64 / (2 * SEEDS_PER_WORD) as f64;
            let mut z = DVector::zeros(n * d);
            for k in 0..n {
                // Stagger the seeds along the orbit so that distinct letters start apart.
                let tk = (t + 0.37 * k as f64).fract().max(0.05);
                z[k * d] = if w[k] == 0 { -tk } else { tk } * domain.radius;
            }
            let Ok(sol) = numerics::newton(z, opts, "periodic-orbit Newton", |z| shooting_system(&fm, w, z)) else {
                continue;
            };
            any_outcome = true;
            let orbit = orbit_from(&fm, w, &sol.x);
            let inside = orbit.points.iter().all(|p| p.amax() <= domain.radius);
            if !inside || orbit.residual > 1e-10 || !letter_consistent(w, &orbit.points) || has_shorter_period(&orbit.points) {
                continue;
            }
            if !orbits.iter().any(|o| same_orbit(o, &orbit)) {
                orbits.push(orbit);
            }
        }
        if !any_outcome {
            unconverged.push(word_string(w));
        }
    }
    Ok(PeriodicSearch {
        orbits,
        unconverged_words: unconverged,
        words_tried: words.len(),
    })
}

/// Largest Lyapunov exponent along the orbit of `x0`.
pub fn lyapunov_exponent(map: &PwsMap, mu: f64, eta: f64, x0: &State, n_transient: usize, n_sample: usize) -> Result<f64> {
    let fm = map.freeze(mu, eta);
    let mut x = x0.clone();
    let escaped = |x: &State, step: usize| -> Result<()> {
        let norm = x.amax();
        if !norm.is_finite() || norm > fm.escape_radius {
            return Err(Error::Escaped { step, norm });
        }
        Ok(())
    };
    for step in 0..n_transient {
        x = fm.eval(&x);
        escaped(&x, step + 1)?;
    }
    let d = map.dim();
    let mut sum = 0.0;
    if d == 1 {
        let mut s = x[0];
        for step in 0..n_sample {
            sum += fm.deriv1(s).abs().ln();
            s = fm.eval1(s);
            if !s.is_finite() || s.abs() > fm.escape_radius {
                return Err(Error::Escaped {
                    step: n_transient + step + 1,
                    norm: s.abs(),
                });
            }
        }
    } else {
        let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
        for step in 0..n_sample {
            v = fm.jacobian(&x) * v;
            let norm = v.norm();
            sum += norm.ln();
            v /= norm;
            x = fm.eval(&x);
            escaped(&x, n_transient + step + 1)?;
        }
    }
    Ok(sum / n_sample as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Fixed,
    Periodic { period: usize },
    Aperiodic { lyapunov: f64 },
    Escaped { step: usize },
}

impl Classification {
    pub fn label(&self) -> String {
        match self {
            Classification::Fixed => "fixed".into(),
            Classification::Periodic { period } => format!("period-{period}"),
            Classification::Aperiodic { lyapunov } if *lyapunov > CHAOTIC_LYAPUNOV => "chaotic".into(),
            Classification::Aperiodic { .. } => "aperiodic".into(),
            Classification::Escaped { .. } => "escaped".into(),
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            Classification::Fixed => Some(1),
            Classification::Periodic { period } => Some(*period),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttractorSample {
    pub states: Vec<State>,
    pub classification: Classification,
}

/// Iterates past a transient, then classifies the attractor by recurrence.
/// An orbit that neither closes up nor approaches a stable cycle is given
/// up to [`EXTENSIONS`] longer transients before it is called aperiodic.
pub fn attractor_sample(map: &PwsMap, mu: f64, eta: f64, x0: &State, n_transient: usize, n_sample: usize) -> AttractorSample {
    let mut x = x0.clone();
    let mut transient = n_transient;
    let mut done = 0;
    let mut attempt = 0;
    loop {
        match settle(map, mu, eta, &x, transient, n_sample) {
            Settled::Escaped(step) => {
                return AttractorSample {
                    states: Vec::new(),
                    classification: Classification::Escaped { step: done + step },
                }
            }
            Settled::Periodic(sample) => return sample,
            Settled::Undecided(states) if attempt == EXTENSIONS => {
                let lyapunov = lyapunov_exponent(map, mu, eta, &states[0], 0, n_sample.max(1)).unwrap_or(f64::NAN);
                return AttractorSample {
                    states,
                    classification: Classification::Aperiodic { lyapunov },
                };
            }
            Settled::Undecided(states) => {
                done += transient + n_sample;
                x = states.last().expect("non-empty sample").clone();
                transient = EXTENSION_FACTOR * (n_transient + n_sample);
                attempt += 1;
            }
        }
    }
}

enum Settled {
    Escaped(usize),
    Periodic(AttractorSample),
    Undecided(Vec<State>),
}

fn settle(map: &PwsMap, mu: f64, eta: f64, x0: &State, n_transient: usize, n_sample: usize) -> Settled {
    let fm = map.freeze(mu, eta);
    let orbit = fm.iterate(x0, n_transient + n_sample);
    if orbit.escaped {
        return Settled::Escaped(orbit.states.len());
    }
    let states: Vec<State> = orbit.states[n_transient + 1..].to_vec();
    let last = states.len() - 1;
    for p in 1..=MAX_DETECTED_PERIOD.min(last / 2) {
        let closes = (0..p).all(|k| (&states[last - k] - &states[last - k - p]).amax() <= RECURRENCE_TOL);
        if closes {
            let pts = states[last + 1 - p..].to_vec();
            // A slowly converging orbit can close up at a multiple of its period.
            let (p, pts) = match refined_cycle(map, mu, eta, &pts) {
                Some(o) if o.period < p && o.is_stable() => (o.period, o.points),
                _ => (p, pts),
            };
            return Settled::Periodic(periodic_sample(pts, p));
        }
    }
    match polish_periodic(map, mu, eta, &states) {
        Some(orbit) => {
            let p = orbit.period;
            Settled::Periodic(periodic_sample(orbit.points, p))
        }
        None => Settled::Undecided(states),
    }
}

fn periodic_sample(states: Vec<State>, p: usize) -> AttractorSample {
    AttractorSample {
        states,
        classification: if p == 1 { Classification::Fixed } else { Classification::Periodic { period: p } },
    }
}

/// Near a bifurcation a stable cycle attracts too slowly for the recurrence
/// test. A stable, admissible cycle found by Newton is accepted when the
/// sample is already close to it or approaches it monotonically.
fn polish_periodic(map: &PwsMap, mu: f64, eta: f64, states: &[State]) -> Option<PeriodicOrbit> {
    let last = states.len() - 1;
    for p in 1..=MAX_DETECTED_PERIOD.min(last / 2) {
        if (&states[last] - &states[last - p]).amax() > POLISH_RADIUS {
            continue;
        }
        let Some(orbit) = refined_cycle(map, mu, eta, &states[last + 1 - p..]) else {
            continue;
        };
        let dist = |x: &State| orbit.points.iter().map(|q| (x - q).amax()).fold(f64::INFINITY, f64::min);
        let checkpoints: Vec<f64> = (0..=4).map(|k| dist(&states[k * last / 4])).collect();
        let approaching = checkpoints.windows(2).all(|w| w[1] < w[0]);
        let near = checkpoints[4] <= POLISH_RADIUS || approaching;
        if near && orbit.is_stable() && orbit.admissibility_margin() >= -1e-12 {
            return Some(orbit);
        }
    }
    None
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChaosCertificate {
    pub mu: f64,
    pub eta: f64,
    pub rho: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub forward_invariant: bool,
    pub expansion_bound: f64,
    pub m: usize,
    pub lyapunov: f64,
    pub grid: usize,
    pub holds: bool,
}

/// Preimage under the left half-map of `target`, on `x <= 0` near the origin.
fn left_preimage(fm: &FrozenMap, target: f64, scale: f64) -> Result<f64> {
    let g = |y: f64| fm.left.eval1(y) - target;
    let g0 = g(0.0);
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let mut step = scale.max(1e-12);
    for _ in 0..60 {
        if g(-step).signum() != g0.signum() {
            return numerics::bracketed_root(g, -step, 0.0, 1e-16);
        }
        step *= 2.0;
        if step > fm.escape_radius {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "left preimage",
        iterations: 60,
        residual: g0.abs(),
    })
}

/// Sampled version of the trapping-set and expansion argument for the
/// second iterate of a scalar map.
pub fn chaos_certificate(map: &PwsMap, mu: f64, eta: f64) -> Result<ChaosCertificate> {
    if map.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: map.dim() });
    }
    let norm = unfolding1d::normalize(map)?;
    let (a_r, _, _, _) = {
        let (_, a, p, q) = norm.map.right().as_1d().expect("scalar");
        (a, p, q, ())
    };
    let a0r = a_r.value_at_origin();
    if !(a0r > 1.0) {
        return Err(Error::PreconditionsNotMet(format!("a0R = {a0r} must exceed 1")));
    }
    let (mu_n, _) = norm.to_normalized(mu, eta);
    if !(mu_n < 0.0) {
        return Err(Error::PreconditionsNotMet(format!("normalized mu = {mu_n} must be negative")));
    }
    let fm = map.freeze(mu, eta);
    let rho = fm.eval1(fm.eval1(0.0));
    if !(rho > 0.0) {
        return Err(Error::PreconditionsNotMet(format!("eta must lie below h2(mu) (f^2(0) = {rho:.3e} <= 0)")));
    }
    let hi = 2.0 * rho;
    let lo = left_preimage(&fm, fm.eval1(hi), rho)?;
    let f2 = |x: f64| fm.eval1(fm.eval1(x));
    for k in 0..=INVARIANCE_GRID {
        let x = lo + (hi - lo) * k as f64 / INVARIANCE_GRID as f64;
        let y = f2(x);
        if !(y > lo + INVARIANCE_MARGIN && y < hi - INVARIANCE_MARGIN) {
            return Err(Error::InvarianceFailed { x, image: y, lo, hi });
        }
    }
    let m = (2.0 * a0r + 2.0).ceil() as usize;
    let mut critical = vec![0.0];
    let mut c = 0.0;
    for _ in 0..m {
        c = f2(c);
        critical.push(c);
    }
    let mut bound = f64::INFINITY;
    for k in 0..=INVARIANCE_GRID {
        let x = lo + (hi - lo) * k as f64 / INVARIANCE_GRID as f64;
        if critical.iter().any(|c| (x - c).abs() < CRITICAL_EXCLUSION) {
            continue;
        }
        let mut y = x;
        let mut d = 1.0;
        for _ in 0..2 * m {
            d *= fm.deriv1(y);
            y = fm.eval1(y);
        }
        bound = bound.min(d.abs());
    }
    let lyapunov = lyapunov_exponent(map, mu, eta, &DVector::from_element(1, rho), 1000, 20_000)?;
    Ok(ChaosCertificate {
        mu,
        eta,
        rho,
        t_lo: lo,
        t_hi: hi,
        forward_invariant: true,
        expansion_bound: bound,
        m,
        lyapunov,
        grid: INVARIANCE_GRID,
        holds: bound > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::poly::Poly2;
    use crate::pws_map::HalfMap;

    fn x(v: f64) -> State {
        DVector::from_element(1, v)
    }

    #[test]
    fn necklace_counts() {
        // Binary necklaces of length n: 2, 3, 4, 6, 8, 14, 20, 36.
        let words = necklaces(8);
        let counts: Vec<usize> = (1..=8).map(|n| words.iter().filter(|w| w.len() == n).count()).collect();
        assert_eq!(counts, vec![2, 3, 4, 6, 8, 14, 20, 36]);
        assert_eq!(word_string(&words[0]), "L");
    }

    #[test]
    fn cost_guard() {
        let err = find_periodic_orbits(&fixtures::fig2(), -0.1, -0.25, 13, Domain { radius: 0.5 }).unwrap_err();
        assert!(matches!(err, Error::CostGuard { .. }));
    }

    #[test]
    fn fig2_two_cycle_only() {
        let map = fixtures::fig2();
        let res = find_periodic_orbits(&map, -0.21, -0.25, 6, Domain { radius: 0.5 }).unwrap();
        let periods: Vec<usize> = res.orbits.iter().map(|o| o.period).collect();
        assert_eq!(periods.iter().filter(|&&p| p == 2).count(), 1, "{periods:?}");
        assert!(periods.iter().all(|&p| p <= 2), "{periods:?}");
        let two = res.orbits.iter().find(|o| o.period == 2).unwrap();
        assert_eq!(two.itinerary, "LL");
        assert!(two.is_stable());
        let cyc = crate::second_iterate::find_two_cycle(&map, -0.21, -0.25, crate::second_iterate::Itinerary::LL).unwrap();
        let matches = two.points.iter().all(|p| cyc.points.iter().any(|q| (p - q).amax() < 1e-9));
        assert!(matches);
    }

    #[test]
    fn fig2_chaotic_strip_has_unstable_even_orbits() {
        let map = fixtures::fig2();
        let res = find_periodic_orbits(&map, -0.15, -0.25, 8, Domain { radius: 0.5 }).unwrap();
        let cycles: Vec<&PeriodicOrbit> = res.orbits.iter().filter(|o| o.period >= 2).collect();
        assert!(!cycles.is_empty());
        assert!(cycles.iter().all(|o| !o.is_stable()));
        assert!(cycles.iter().any(|o| o.period % 2 == 0 && o.period > 2));
    }

    #[test]
    fn multiplier_is_product_of_slopes() {
        let map = fixtures::fig2();
        let res = find_periodic_orbits(&map, -0.15, -0.25, 6, Domain { radius: 0.5 }).unwrap();
        let fm = map.freeze(-0.15, -0.25);
        for o in &res.orbits {
            let prod: f64 = o.points.iter().map(|p| fm.deriv1(p[0])).product();
            assert!((prod - o.multiplier).abs() <= 1e-10 * (1.0 + prod.abs()));
        }
    }

    #[test]
    fn contracting_map_has_only_its_fixed_point() {
        let half = |a: f64| HalfMap::one_d(Poly2::constant(1.0), Poly2::constant(a), Poly2::default(), Poly2::default());
        let map = PwsMap::new(half(0.3), half(0.6)).unwrap();
        let res = find_periodic_orbits(&map, 0.1, 0.0, 6, Domain { radius: 1.0 }).unwrap();
        assert_eq!(res.orbits.len(), 1);
        assert_eq!(res.orbits[0].itinerary, "R");
    }

    #[test]
    fn lyapunov_examples() {
        let map = fixtures::fig2();
        assert!(lyapunov_exponent(&map, -0.21, -0.25, &x(0.01), 2000, 5000).unwrap() < 0.0);
        assert!(lyapunov_exponent(&map, -0.15, -0.25, &x(0.01), 2000, 20000).unwrap() > 0.0);
        let half = HalfMap::one_d(Poly2::constant(1.0), Poly2::constant(-1.0), Poly2::default(), Poly2::default());
        let iso = PwsMap::new(half.clone(), half).unwrap();
        assert_eq!(lyapunov_exponent(&iso, 0.0, 0.0, &x(0.3), 10, 100).unwrap(), 0.0);
        assert!(matches!(lyapunov_exponent(&map, 0.05, -0.25, &x(0.01), 10000, 10), Err(Error::Escaped { .. })));
    }

    #[test]
    fn solve_orbit_continues_into_virtual_territory() {
        let map = fixtures::fig2();
        let a = attractor_sample(&map, -0.2, -0.25, &x(0.01), 5000, 100);
        assert_eq!(a.classification.period(), Some(2));
        let it = itinerary_of(&a.states);
        assert_eq!(it, "LL");
        let here = solve_orbit(&map, -0.2, -0.25, &it, &a.states).unwrap();
        assert!(here.admissibility_margin() > 0.0);
        let there = solve_orbit(&map, -0.19, -0.25, &it, &a.states).unwrap();
        assert!(there.admissibility_margin() < 0.0);
        assert!(solve_orbit(&map, -0.2, -0.25, "LX", &a.states).is_err());
    }

    #[test]
    fn slow_convergence_near_period_doubling_is_polished() {
        // 2e-5 past the period-doubling the cycle contracts at rate close to 1.
        let map = fixtures::fig2();
        let s = attractor_sample(&map, -0.21693, -0.25, &x(0.01), 300, 200);
        assert_eq!(s.classification.period(), Some(2), "{:?}", s.classification);
    }

    #[test]
    fn attractor_classes() {
        let map = fixtures::fig2();
        let s = attractor_sample(&map, -0.21, -0.25, &x(0.01), 5000, 2000);
        assert_eq!(s.classification, Classification::Periodic { period: 2 });
        assert_eq!(s.states.len(), 2);
        let s = attractor_sample(&map, -0.15, -0.25, &x(0.01), 2000, 5000);
        match s.classification {
            Classification::Aperiodic { lyapunov } => assert!(lyapunov > 0.0),
            c => panic!("{c:?}"),
        }
        let s = attractor_sample(&map, -0.25, -0.25, &x(0.01), 5000, 100);
        assert_eq!(s.classification, Classification::Fixed);
        assert_eq!(s.states.len(), 1);
        let s = attractor_sample(&map, 0.02, -0.25, &x(0.01), 5000, 100);
        assert!(matches!(s.classification, Classification::Escaped { .. }));
    }

    #[test]
    fn fig2_certificate() {
        let map = fixtures::fig2();
        let mu = -0.05;
        let h2 = unfolding1d::h2_exact(&map, mu, mu, 0.1).unwrap();
        let cert = chaos_certificate(&map, mu, h2 - 0.002).unwrap();
        assert!(cert.holds && cert.forward_invariant && cert.lyapunov > 0.0, "{cert:?}");
        assert_eq!(cert.m, 5);
        let err = chaos_certificate(&map, mu, h2 + 0.002).unwrap_err();
        assert!(matches!(err, Error::PreconditionsNotMet(ref m) if m.contains("h2")), "{err:?}");
    }

    #[test]
    fn certificate_requires_expanding_right_half() {
        let left = HalfMap::one_d(Poly2::constant(1.0), Poly2::from_terms(&[(0, 0, -1.0), (0, 1, 1.0)]), Poly2::constant(-1.0), Poly2::constant(1.5));
        let right = HalfMap::one_d(Poly2::constant(1.0), Poly2::constant(0.5), Poly2::default(), Poly2::default());
        let map = PwsMap::new(left, right).unwrap();
        let err = chaos_certificate(&map, -0.05, -0.06).unwrap_err();
        assert!(matches!(err, Error::PreconditionsNotMet(ref m) if m.contains("a0R")));
    }
}
