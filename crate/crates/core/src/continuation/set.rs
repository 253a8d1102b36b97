use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bc2_seed, detect_codim2, pd_seed, sn_emanation_points, sn_emanation_seed, trace_bc_fixed_curve, trace_bc_twocycle_curve, trace_pd_curve,
    trace_sn_twocycle_curve, BifurcationCurve, CurveKind, Direction, TraceOptions,
};
use crate::error::Result;
use crate::pws_map::{PwsMap, Side};

/// Distance from the codimension-two point at which curve seeds are placed.
pub const SEED_OFFSET: f64 = 1e-2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveSet {
    pub curves: Vec<BifurcationCurve>,
    /// Curves that could not be seeded or traced, with the reason.
    pub failures: Vec<String>,
}

#[derive(Clone, Debug)]
enum Task {
    Pd { eta0: f64, half: Side, mu: f64 },
    Bc2 { eta0: f64, half: Side, mu: f64 },
    Sn { eta0: f64 },
    BcFixed { half: Side, eta: f64 },
}

impl Task {
    fn describe(&self) -> String {
        match self {
            Task::Pd { eta0, half, .. } => format!("PD_fixed of the {} fixed point from eta = {eta0}", half.letter()),
            Task::Bc2 { eta0, half, .. } => format!("BC_twocycle of the {0}{0} cycle from eta = {eta0}", half.letter()),
            Task::Sn { eta0 } => format!("SN_twocycle from eta = {eta0}"),
            Task::BcFixed { half, .. } => format!("BC_fixed of the {} fixed point", half.letter()),
        }
    }
}

/// Traces every requested kind of curve inside `opts.window`: fixed-point
/// period-doubling and two-cycle border-collision loci from each
/// codimension-two point on the `eta`-axis, saddle-node loci of two-cycles
/// from each emanation point, and the fixed-point border-collision line.
/// Independent curves run in parallel; the output order is fixed.
pub fn bifurcation_set(map: &PwsMap, kinds: &[CurveKind], opts: &TraceOptions) -> CurveSet {
    let w = opts.window;
    let mut tasks = Vec::new();
    let seed_mu = |sign: f64| {
        let mu = sign * SEED_OFFSET.min(0.25 * (w.mu[1] - w.mu[0]));
        (w.mu[0] <= mu && mu <= w.mu[1]).then_some(mu)
    };
    let points = detect_codim2(map, w.eta);
    for p in &points {
        let Some(report) = &p.report else { continue };
        let Some(mu) = seed_mu(report.admissible_mu_sign()) else { continue };
        if kinds.contains(&CurveKind::PdFixed) {
            tasks.push(Task::Pd { eta0: p.eta, half: p.half, mu });
        }
        if kinds.contains(&CurveKind::BcTwocycle) {
            tasks.push(Task::Bc2 { eta0: p.eta, half: p.half, mu });
        }
    }
    if kinds.contains(&CurveKind::SnTwocycle) {
        for eta0 in sn_emanation_points(map, w.eta) {
            tasks.push(Task::Sn { eta0 });
        }
    }
    if kinds.contains(&CurveKind::BcFixed) && w.mu[0] <= 0.0 && 0.0 <= w.mu[1] {
        let eta = 0.5 * (w.eta[0] + w.eta[1]);
        tasks.push(Task::BcFixed { half: Side::L, eta });
        tasks.push(Task::BcFixed { half: Side::R, eta });
    }
    let results: Vec<std::result::Result<BifurcationCurve, String>> =
        tasks.par_iter().map(|t| run(map, t, opts).map_err(|e| format!("{}: {e}", t.describe()))).collect();
    let mut set = CurveSet {
        curves: Vec::new(),
        failures: Vec::new(),
    };
    for r in results {
        match r {
            Ok(c) => set.curves.push(c),
            Err(e) => set.failures.push(e),
        }
    }
    set
}

fn both_ways(f: impl Fn(Direction) -> Result<BifurcationCurve>) -> Result<BifurcationCurve> {
    let back = f(Direction::Decreasing)?;
    let fwd = f(Direction::Increasing)?;
    Ok(BifurcationCurve::joined(back, fwd))
}

fn run(map: &PwsMap, task: &Task, opts: &TraceOptions) -> Result<BifurcationCurve> {
    let oriented = |half: Side| if half == Side::R { map.reflected() } else { map.clone() };
    let mut curve = match *task {
        Task::Pd { eta0, half, mu } | Task::Bc2 { eta0, half, mu } => {
            let local = oriented(half);
            let shifted = local.shifted_eta(eta0);
            let pd = matches!(task, Task::Pd { .. });
            let mut start = if pd { pd_seed(&shifted, mu)? } else { bc2_seed(&shifted, mu)? };
            start.eta += eta0;
            let mut c = both_ways(|d| {
                if pd {
                    trace_pd_curve(&local, &start, d, opts)
                } else {
                    trace_bc_twocycle_curve(&local, &start, d, opts)
                }
            })?;
            if half == Side::R {
                unreflect(&mut c);
            }
            c
        }
        Task::Sn { eta0 } => {
            let start = sn_emanation_seed(map, eta0);
            both_ways(|d| trace_sn_twocycle_curve(map, &start, [Side::R, Side::L], d, opts))?
        }
        Task::BcFixed { half, eta } => {
            let local = oriented(half);
            let start = sn_emanation_seed(&local, eta);
            let mut c = both_ways(|d| trace_bc_fixed_curve(&local, &start, d, opts))?;
            if half == Side::R {
                unreflect(&mut c);
            }
            c
        }
    };
    curve.special_points.sort_by(|a, b| a.eta.total_cmp(&b.eta).then(a.mu.total_cmp(&b.mu)));
    Ok(curve)
}

/// Maps a curve traced on the reflected map back to the original one.
fn unreflect(c: &mut BifurcationCurve) {
    c.itinerary = c.itinerary.chars().map(|ch| if ch == 'L' { 'R' } else { 'L' }).collect();
    for p in &mut c.points {
        p.state[0] = -p.state[0];
        if let Some(q) = p.partner.as_mut() {
            q[0] = -q[0];
        }
    }
}
