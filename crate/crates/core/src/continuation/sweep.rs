use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;
use crate::orbit_lab::{self, Classification, PeriodicOrbit};
use crate::pws_map::{PwsMap, State};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub n_transient: usize,
    pub n_sample: usize,
    /// Largest number of attractor states kept per cell.
    pub keep_states: usize,
    /// Root-find transitions inside their grid bracket.
    pub refine: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            n_transient: 2000,
            n_sample: 2000,
            keep_states: 200,
            refine: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepCell {
    pub mu: f64,
    /// `2 * seed + 0` for the pass in increasing `mu`, `2 * seed + 1` for
    /// the pass in decreasing `mu`.
    pub branch_index: usize,
    pub classification: Classification,
    pub states: Vec<State>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    PeriodDoubling,
    BorderCollision,
    SaddleNode,
    /// Located by bisection on the attractor label only.
    Unresolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Adjacent grid values bracketing the change.
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Refined location, inside `[mu_lo, mu_hi]`.
    pub mu: f64,
    /// Label on the `mu_lo` side.
    pub from: String,
    /// Label on the `mu_hi` side.
    pub to: String,
    pub kind: TransitionKind,
    pub branch_index: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub eta: f64,
    pub mu_grid: Vec<f64>,
    /// Ordered by branch index, then by increasing `mu`.
    pub cells: Vec<SweepCell>,
    /// Deduplicated across branches, ordered by `mu`.
    pub transitions: Vec<Transition>,
}

/// Attractor classification along `mu_grid` at fixed `eta`. Every seed is
/// swept in both directions, each cell starting from the attractor of the
/// previous one.
pub fn sweep_1param(map: &PwsMap, eta: f64, mu_grid: &[f64], seeds: &[State], opts: &SweepOptions) -> Result<SweepResult> {
    if mu_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("mu grid must be strictly increasing".into()));
    }
    if seeds.iter().any(|s| s.len() != map.dim()) {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            got: seeds.iter().map(|s| s.len()).find(|&l| l != map.dim()).unwrap_or(0),
        });
    }
    let branches: Vec<(usize, Vec<SweepCell>, Vec<Transition>)> = (0..2 * seeds.len())
        .into_par_iter()
        .map(|branch| {
            let seed = &seeds[branch / 2];
            let forward = branch % 2 == 0;
            let mut cells = run_pass(map, eta, mu_grid, seed, forward, branch, opts);
            cells.sort_by(|a, b| a.mu.total_cmp(&b.mu));
            let transitions = transitions_of(map, eta, &cells, forward, opts);
            (branch, cells, transitions)
        })
        .collect();
    let mut cells = Vec::new();
    let mut transitions: Vec<Transition> = Vec::new();
    let spacing = mu_grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    for (_, c, t) in branches {
        cells.extend(c);
        for tr in t {
            let duplicate = transitions.iter().any(|o| o.kind == tr.kind && o.from == tr.from && o.to == tr.to && (o.mu - tr.mu).abs() <= spacing);
            if !duplicate {
                transitions.push(tr);
            }
        }
    }
    transitions.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.branch_index.cmp(&b.branch_index)));
    Ok(SweepResult {
        eta,
        mu_grid: mu_grid.to_vec(),
        cells,
        transitions,
    })
}

fn run_pass(map: &PwsMap, eta: f64, grid: &[f64], seed: &State, forward: bool, branch: usize, opts: &SweepOptions) -> Vec<SweepCell> {
    let order: Vec<f64> = if forward { grid.to_vec() } else { grid.iter().rev().copied().collect() };
    let mut x = seed.clone();
    let mut cells = Vec::with_capacity(order.len());
    for mu in order {
        let sample = orbit_lab::attractor_sample(map, mu, eta, &x, opts.n_transient, opts.n_sample);
        x = sample.states.last().cloned().unwrap_or_else(|| seed.clone());
        let keep = sample.states.len().saturating_sub(opts.keep_states);
        cells.push(SweepCell {
            mu,
            branch_index: branch,
            classification: sample.classification,
            states: sample.states[keep..].to_vec(),
        });
    }
    cells
}

fn transitions_of(map: &PwsMap, eta: f64, cells: &[SweepCell], forward: bool, opts: &SweepOptions) -> Vec<Transition> {
    let mut out = Vec::new();
    for w in cells.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let (from, to) = (lo.classification.label(), hi.classification.label());
        if from == to {
            continue;
        }
        // The pass reached `hi` from `lo` when sweeping forward, and vice versa.
        let (start, end) = if forward { (lo, hi) } else { (hi, lo) };
        let refined = if opts.refine { refine(map, eta, start, end, opts) } else { None };
        let (mu, kind) = refined.unwrap_or(((lo.mu + hi.mu) / 2.0, TransitionKind::Unresolved));
        out.push(Transition {
            mu_lo: lo.mu,
            mu_hi: hi.mu,
            mu,
            from,
            to,
            kind,
            branch_index: lo.branch_index,
        });
    }
    out
}

fn periodic_orbit(map: &PwsMap, eta: f64, cell: &SweepCell) -> Option<PeriodicOrbit> {
    let p = cell.classification.period()?;
    let pts = &cell.states[cell.states.len().checked_sub(p)?..];
    orbit_lab::solve_orbit(map, cell.mu, eta, &orbit_lab::itinerary_of(pts), pts).ok()
}

fn refine(map: &PwsMap, eta: f64, start: &SweepCell, end: &SweepCell, opts: &SweepOptions) -> Option<(f64, TransitionKind)> {
    let mut candidates = [start, end];
    candidates.sort_by_key(|c| c.classification.period().unwrap_or(usize::MAX));
    for cell in candidates {
        let other = if std::ptr::eq(cell, start) { end } else { start };
        if let Some(orbit) = periodic_orbit(map, eta, cell) {
            if let Some(hit) = follow_orbit(map, eta, orbit, cell.mu, other.mu) {
                return Some(hit);
            }
        }
    }
    bisect_label(map, eta, start, end, opts).map(|mu| (mu, TransitionKind::Unresolved))
}

fn stability_margin(o: &PeriodicOrbit) -> f64 {
    1.0 - o.multipliers.iter().map(|m| m.abs()).fold(0.0, f64::max)
}

/// Continues a stable admissible cycle from `mu0` towards `mu1` and
/// root-finds the first loss of admissibility or stability.
fn follow_orbit(map: &PwsMap, eta: f64, orbit: PeriodicOrbit, mu0: f64, mu1: f64) -> Option<(f64, TransitionKind)> {
    if !orbit.is_stable() || orbit.admissibility_margin() < -1e-12 {
        return None;
    }
    const SUBSTEPS: usize = 32;
    let solve = |mu: f64, seed: &[State]| orbit_lab::solve_orbit(map, mu, eta, &orbit.itinerary, seed).ok();
    let mut prev = (mu0, orbit.clone());
    for k in 1..=SUBSTEPS {
        let mu = mu0 + (mu1 - mu0) * k as f64 / SUBSTEPS as f64;
        let next = solve(mu, &prev.1.points)?;
        let adm = next.admissibility_margin();
        let stab = stability_margin(&next);
        if adm < 0.0 || stab < 0.0 {
            let test = |o: &PeriodicOrbit| if adm < 0.0 { o.admissibility_margin() } else { stability_margin(o) };
            let seed = prev.1.points.clone();
            let g = |m: f64| solve(m, &seed).map(|o| test(&o)).unwrap_or(f64::NAN);
            let root = numerics::bracketed_root(g, prev.0, mu, 1e-13).ok()?;
            let kind = if adm < 0.0 {
                TransitionKind::BorderCollision
            } else {
                let critical = solve(root, &seed)?.multipliers.into_iter().max_by(|a, b| a.abs().total_cmp(&b.abs()))?;
                if critical.re < 0.0 {
                    TransitionKind::PeriodDoubling
                } else {
                    TransitionKind::SaddleNode
                }
            };
            return Some((root, kind));
        }
        prev = (mu, next);
    }
    None
}

fn bisect_label(map: &PwsMap, eta: f64, start: &SweepCell, end: &SweepCell, opts: &SweepOptions) -> Option<f64> {
    let seed = start.states.last()?.clone();
    let label = |mu: f64| orbit_lab::attractor_sample(map, mu, eta, &seed, opts.n_transient, opts.n_sample).classification.label();
    let start_label = start.classification.label();
    let (mut a, mut b) = (start.mu, end.mu);
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if label(m) == start_label {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}
