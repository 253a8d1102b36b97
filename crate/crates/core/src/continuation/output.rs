//! CSV writers and a gnuplot recipe for traced curves and sweeps.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::{BifurcationCurve, SweepResult};

fn state_header(prefix: &str, n: usize) -> String {
    (0..n).map(|i| format!(",{prefix}{i}")).collect()
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!(",{}", num(*x))).collect()
}

/// One row per curve point:
/// `kind,curve,index,mu,eta,multiplier,admissible,x0..,px0..`, where the
/// `px` columns hold the second cycle point and stay empty for fixed points.
pub fn write_curves_csv<W: Write>(mut w: W, curves: &[BifurcationCurve], dim: usize) -> io::Result<()> {
    writeln!(w, "kind,curve,index,mu,eta,multiplier,admissible{}{}", state_header("x", dim), state_header("px", dim))?;
    for (ci, c) in curves.iter().enumerate() {
        for (i, p) in c.points.iter().enumerate() {
            let partner = match &p.partner {
                Some(q) => join(q),
                None => ",".repeat(dim),
            };
            writeln!(
                w,
                "{},{ci},{i},{},{},{},{}{}{}",
                c.kind.label(),
                num(p.mu),
                num(p.eta),
                num(p.multiplier),
                u8::from(p.admissible),
                join(&p.state),
                partner
            )?;
        }
    }
    Ok(())
}

pub fn write_special_points_csv<W: Write>(mut w: W, curves: &[BifurcationCurve]) -> io::Result<()> {
    writeln!(w, "type,curve,curve_kind,mu,eta,residual")?;
    for (ci, c) in curves.iter().enumerate() {
        for s in &c.special_points {
            writeln!(w, "{},{ci},{},{},{},{}", s.kind.label(), c.kind.label(), num(s.mu), num(s.eta), num(s.residual))?;
        }
    }
    Ok(())
}

/// One row per stored attractor state: `mu,eta,branch_index,x0..,classification`.
pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult, dim: usize) -> io::Result<()> {
    writeln!(w, "mu,eta,branch_index{},classification", state_header("x", dim))?;
    for c in &sweep.cells {
        let label = c.classification.label();
        if c.states.is_empty() {
            writeln!(w, "{},{},{}{},{label}", num(c.mu), num(sweep.eta), c.branch_index, ",".repeat(dim))?;
        }
        for s in &c.states {
            writeln!(w, "{},{},{}{},{label}", num(c.mu), num(sweep.eta), c.branch_index, join(s.as_slice()))?;
        }
    }
    Ok(())
}

pub fn write_transitions_csv<W: Write>(mut w: W, sweep: &SweepResult) -> io::Result<()> {
    writeln!(w, "mu_lo,mu_hi,mu,from,to,kind,branch_index")?;
    for t in &sweep.transitions {
        let kind = serde_json::to_value(t.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        writeln!(w, "{},{},{},{},{},{kind},{}", num(t.mu_lo), num(t.mu_hi), num(t.mu), t.from, t.to, t.branch_index)?;
    }
    Ok(())
}

fn colour(kind: &str) -> &'static str {
    match kind {
        "PD_fixed" => "#1f4fd8",
        "SN_twocycle" => "#d81f1f",
        "BC_twocycle" => "#2a9d3a",
        _ => "#000000",
    }
}

/// gnuplot script drawing every curve of `curves_csv` in the `(mu, eta)`
/// plane: solid where admissible, dashed where virtual.
pub fn curves_plot_recipe(curves_csv: &str, special_csv: &str, curves: &[BifurcationCurve]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key off\nset xlabel 'mu'\nset ylabel 'eta'\n");
    let mut parts = Vec::new();
    for (ci, c) in curves.iter().enumerate() {
        let col = colour(c.kind.label());
        for (adm, dt) in [(1, 1), (0, 2)] {
            parts.push(format!(
                "'{curves_csv}' every ::1 using ($2=={ci} && $7=={adm} ? $4 : NaN):5 with lines dt {dt} lc rgb '{col}'"
            ));
        }
    }
    parts.push(format!("'{special_csv}' every ::1 using 4:5 with points pt 7 lc rgb '#000000'"));
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

/// gnuplot script for a bifurcation diagram: first state coordinate against `mu`.
pub fn sweep_plot_recipe(sweep_csv: &str) -> String {
    format!(
        "set datafile separator ','\nset key off\nset xlabel 'mu'\nset ylabel 'x'\nplot '{sweep_csv}' every ::1 using 1:4 with dots lc rgb '#000000'\n"
    )
}
