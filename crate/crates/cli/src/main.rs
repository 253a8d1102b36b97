use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bcpd::continuation::{self, output, CurveKind, SweepOptions, TraceOptions, Window};
use bcpd::{center_manifold, fixtures, linalg_bc, mapfile, orbit_lab, unfolding1d};
use bcpd::{Error, ErrorKind, PwsMap, State};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde_json::{json, Value};

const OUT_ENV: &str = "BCPD_OUT_DIR";
const DEFAULT_OUT: &str = "bcpd-out";

#[derive(Parser, Debug)]
#[command(name = "bcpd", version, about = "Border-collision / period-doubling analysis of piecewise-smooth maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// `builtin:fig2`, `builtin:pdmapex`, or a path to a TOML map file.
    #[arg(long)]
    map: String,
    /// Output directory (overrides BCPD_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel work.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Feigin classification of the border collision at mu = 0.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        eta: f64,
    },
    /// Unfolding of the codimension-two point at the origin.
    Unfold {
        #[command(flatten)]
        common: Common,
    },
    /// Center-manifold reduction of the left half-map.
    Reduce {
        #[command(flatten)]
        common: Common,
    },
    /// Bifurcation curves in the (mu, eta) plane.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of pd, bc2, sn, bcf.
        #[arg(long, default_value = "pd,bc2,sn")]
        curves: String,
        /// `mu=[lo,hi] eta=[lo,hi]`.
        #[arg(long, num_args = 2, allow_hyphen_values = true, value_names = ["MU", "ETA"])]
        window: Vec<String>,
        #[arg(long)]
        allow_virtual: bool,
        /// Largest pseudo-arclength step.
        #[arg(long)]
        max_step: Option<f64>,
    },
    /// Attractor sweep in mu at fixed eta.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        eta: f64,
        /// `lo:hi:n` grid.
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
        /// Initial states separated by `;`, coordinates by `,`. Default: origin.
        #[arg(long, allow_hyphen_values = true)]
        seeds: Option<String>,
        #[arg(long, default_value_t = 2000)]
        transient: usize,
        #[arg(long, default_value_t = 2000)]
        sample: usize,
    },
    /// Chaos certificate for a scalar map.
    Chaos {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// A number, or `auto-below-h2`.
        #[arg(long, allow_hyphen_values = true)]
        eta: String,
        /// Distance below h2 used by `auto-below-h2`, relative to |mu|.
        #[arg(long, default_value_t = 0.04)]
        below: f64,
    },
    /// Admissible periodic orbits up to a given period.
    Orbits {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        eta: f64,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
}

/// Failure carrying the exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Degenerate => 3,
            ErrorKind::Numerical => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: msg.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    config(format!("cannot write {}: {e}", path.display()))
}

fn load_map(source: &str) -> Result<PwsMap, Failure> {
    match source.strip_prefix("builtin:") {
        Some(name) => fixtures::builtin(name).ok_or_else(|| config(format!("unknown builtin map '{name}'; known: {}", fixtures::BUILTIN_NAMES.join(", ")))),
        None => Ok(mapfile::load(Path::new(source))?),
    }
}

fn out_dir(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn parse_range(text: &str, name: &str) -> Result<[f64; 2], Failure> {
    let body = text
        .strip_prefix(&format!("{name}="))
        .and_then(|r| r.strip_prefix('['))
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| config(format!("expected {name}=[lo,hi], got '{text}'")))?;
    let v: Vec<f64> = body
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| config(format!("{name} range: {e}")))?;
    match v[..] {
        [lo, hi] if lo < hi => Ok([lo, hi]),
        _ => Err(config(format!("{name} range must be [lo,hi] with lo < hi"))),
    }
}

fn parse_window(args: &[String]) -> Result<Window, Failure> {
    let find = |name: &str| {
        args.iter()
            .find(|a| a.starts_with(&format!("{name}=")))
            .ok_or_else(|| config(format!("--window needs {name}=[lo,hi]")))
            .and_then(|a| parse_range(a, name))
    };
    Ok(Window { mu: find("mu")?, eta: find("eta")? })
}

fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(config(format!("--mu expects lo:hi:n, got '{text}'")));
    };
    let lo: f64 = lo.parse().map_err(|e| config(format!("--mu lo: {e}")))?;
    let hi: f64 = hi.parse().map_err(|e| config(format!("--mu hi: {e}")))?;
    let n: usize = n.parse().map_err(|e| config(format!("--mu n: {e}")))?;
    if n < 2 || !(lo < hi) {
        return Err(config("--mu needs lo < hi and n >= 2"));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn parse_seeds(text: Option<&str>, dim: usize) -> Result<Vec<State>, Failure> {
    let Some(text) = text else {
        return Ok(vec![DVector::zeros(dim)]);
    };
    text.split(';')
        .map(|s| {
            let v: Vec<f64> = s.split(',').map(|c| c.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| config(format!("--seeds: {e}")))?;
            if v.len() != dim {
                return Err(config(format!("--seeds: state '{s}' has {} coordinates, map has {dim}", v.len())));
            }
            Ok(DVector::from_vec(v))
        })
        .collect()
}

fn parse_kinds(text: &str) -> Result<Vec<CurveKind>, Failure> {
    text.split(',')
        .map(|k| match k.trim() {
            "pd" => Ok(CurveKind::PdFixed),
            "bc2" => Ok(CurveKind::BcTwocycle),
            "sn" => Ok(CurveKind::SnTwocycle),
            "bcf" => Ok(CurveKind::BcFixed),
            other => Err(config(format!("unknown curve kind '{other}'; use pd, bc2, sn, bcf"))),
        })
        .collect()
}

/// Files written by one run, plus the manifest that describes them.
struct Run {
    dir: PathBuf,
    command: &'static str,
    map_source: String,
    inputs: Value,
    tolerances: Value,
    outputs: Vec<String>,
    failures: Vec<String>,
    started: Instant,
}

impl Run {
    fn new(common: &Common, command: &'static str, inputs: Value, tolerances: Value) -> Result<Self, Failure> {
        let dir = out_dir(common);
        fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        Ok(Self {
            dir,
            command,
            map_source: common.map.clone(),
            inputs,
            tolerances,
            outputs: Vec::new(),
            failures: Vec::new(),
            started: Instant::now(),
        })
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), Failure> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(|e| io_failure(&path, e))?;
        std::io::Write::flush(&mut w).map_err(|e| io_failure(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        self.write_with(name, |w| std::io::Write::write_all(w, text.as_bytes()))
    }

    fn write_json(&mut self, name: &str, value: &impl serde::Serialize) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
        self.write_text(name, &text)
    }

    fn finish(self, map: &PwsMap) -> Result<(), Failure> {
        let manifest = json!({
            "tool": "bcpd",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "map": { "source": self.map_source, "dimension": map.dim(), "definition": mapfile::to_toml(map) },
            "inputs": self.inputs,
            "tolerances": self.tolerances,
            "outputs": self.outputs,
            "partial": !self.failures.is_empty(),
            "failures": self.failures,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| io_failure(&path, e))
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_classify(common: &Common, eta: f64) -> Result<(), Failure> {
    let map = load_map(&common.map)?;
    let report = linalg_bc::feigin_classify(&map, eta);
    let mut run = Run::new(common, "classify", json!({ "eta": eta }), json!({ "eigenvalue": linalg_bc::EIG_TOL }))?;
    run.write_json("classify.json", &report)?;
    run.finish(&map)?;
    print_json(&report);
    if report.degenerate_flags.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: format!("degenerate classification: {}", report.degenerate_flags.join("; ")),
        })
    }
}

fn cmd_unfold(common: &Common) -> Result<(), Failure> {
    let map = load_map(&common.map)?;
    let value = if map.dim() == 1 {
        serde_json::to_value(unfolding1d::unfold(&map)?)
    } else {
        serde_json::to_value(center_manifold::nd_unfold(&map)?)
    }
    .expect("serializable");
    let mut run = Run::new(common, "unfold", json!({}), json!({ "eigenvalue": linalg_bc::EIG_TOL, "validity_radius": unfolding1d::VALIDITY_RADIUS }))?;
    run.write_json("unfold.json", &value)?;
    run.finish(&map)?;
    print_json(&value);
    Ok(())
}

fn cmd_reduce(common: &Common) -> Result<(), Failure> {
    let map = load_map(&common.map)?;
    let result = center_manifold::reduce(&map)?;
    let mut run = Run::new(common, "reduce", json!({}), json!({ "eigenvalue": linalg_bc::EIG_TOL, "order": center_manifold::ORDER }))?;
    run.write_json("reduce.json", &result)?;
    run.finish(&map)?;
    print_json(&json!({
        "c0": result.c0(),
        "mu_hat_scale": result.mu_hat_scale,
        "eta_hat_scale": result.eta_hat_scale,
        "conditions_hold": result.conditions.all(),
    }));
    Ok(())
}

fn cmd_trace(common: &Common, curves: &str, window: &[String], allow_virtual: bool, max_step: Option<f64>) -> Result<(), Failure> {
    let map = load_map(&common.map)?;
    let kinds = parse_kinds(curves)?;
    let mut opts = TraceOptions::new(parse_window(window)?);
    opts.allow_virtual = allow_virtual;
    if let Some(h) = max_step {
        if !(h > opts.palc.min_step) {
            return Err(config("--max-step must exceed the minimum step"));
        }
        opts.palc.max_step = h;
        opts.palc.initial_step = opts.palc.initial_step.min(h);
    }
    let set = continuation::bifurcation_set(&map, &kinds, &opts);
    let tolerances = json!({
        "palc": opts.palc,
        "admissibility": continuation::ADMISSIBILITY_TOL,
        "verify": continuation::VERIFY_TOL,
        "eigenvalue": linalg_bc::EIG_TOL,
    });
    let inputs = json!({ "curves": curves, "window": opts.window, "allow_virtual": allow_virtual });
    let mut run = Run::new(common, "trace", inputs, tolerances)?;
    run.failures = set.failures.clone();
    for c in &set.curves {
        for p in &c.points {
            let r = continuation::verify_point(&map, c, p);
            if !(r <= continuation::VERIFY_TOL) {
                run.failures.push(format!("{} point ({}, {}) residual {r:.3e}", c.kind.label(), p.mu, p.eta));
            }
        }
    }
    let dim = map.dim();
    run.write_with("curves.csv", |w| output::write_curves_csv(w, &set.curves, dim))?;
    run.write_with("special_points.csv", |w| output::write_special_points_csv(w, &set.curves))?;
    run.write_text("curves.gp", &output::curves_plot_recipe("curves.csv", "special_points.csv", &set.curves))?;
    let partial = !run.failures.is_empty();
    for c in &set.curves {
        let ends = match c.start_termination {
            Some(t) => format!("{t:?} / {:?}", c.termination),
            None => format!("{:?}", c.termination),
        };
        println!("{} {}: {} points, {} special, ends: {ends}", c.kind.label(), c.itinerary, c.points.len(), c.special_points.len());
        for s in &c.special_points {
            println!("  {} at mu = {}, eta = {}", s.kind.label(), s.mu, s.eta);
        }
    }
    for f in &run.failures {
        eprintln!("warning: {f}");
    }
    run.finish(&map)?;
    if partial && set.curves.is_empty() {
        return Err(Failure {
            code: 4,
            message: "no curve could be traced".into(),
        });
    }
    Ok(())
}

fn cmd_sweep(common: &Common, eta: f64, mu: &str, seeds: Option<&str>, transient: usize, sample: usize) -> Result<(), Failure> {
    let map = load_map(&common.map)?;
    let grid = parse_grid(mu)?;
    let seeds = parse_seeds(seeds, map.dim())?;
    let opts = SweepOptions {
        n_transient: transient,
        n_sample: sample,
        ..SweepOptions::default()
    };
    let result = continuation::sweep_1param(&map, eta, &grid, &seeds, &opts)?;
    let tolerances = json!({
        "recurrence": orbit_lab::RECURRENCE_TOL,
        "polish_radius": orbit_lab::POLISH_RADIUS,
        "max_detected_period": orbit_lab::MAX_DETECTED_PERIOD,
        "escape_radius": map.escape_radius(),
        "transition_root_xtol": 1e-13,
    });
    let seed_list: Vec<Vec<f64>> = seeds.iter().map(|s| s.iter().copied().collect()).collect();
    let inputs = json!({ "eta": eta, "mu": mu, "seeds": seed_list, "options": opts });
    let mut run = Run::new(common, "sweep", inputs, tolerances)?;
    let dim = map.dim();
    run.write_with("sweep.csv", |w| output::write_sweep_csv(w, &result, dim))?;
    run.write_with("transitions.csv", |w| output::write_transitions_csv(w, &result))?;
    run.write_text("sweep.gp", &output::sweep_plot_recipe("sweep.csv"))?;
    for t in &result.transitions {
        println!("{:?} at mu = {} ({} -> {}, bracket [{}, {}])", t.kind, t.mu, t.from, t.to, t.mu_lo, t.mu_hi);
    }
    run.finish(&map)
}

fn cmd_chaos(common: &Common, mu: f64, eta: &str, below: f64) -> Result<(), Failure> {
    let map = load_map(&common.map)?;
    let eta = if eta == "auto-below-h2" {
        let report = unfolding1d::unfold(&map)?;
        let guess = report.h2_user(mu);
        let h2 = unfolding1d::h2_exact(&map, mu, guess, unfolding1d::VALIDITY_RADIUS).unwrap_or(guess);
        h2 - below * mu.abs() * report.eta_scale.signum()
    } else {
        eta.parse::<f64>().map_err(|e| config(format!("--eta: {e}")))?
    };
    let cert = orbit_lab::chaos_certificate(&map, mu, eta)?;
    let tolerances = json!({
        "invariance_grid": orbit_lab::INVARIANCE_GRID,
        "invariance_margin": orbit_lab::INVARIANCE_MARGIN,
        "critical_exclusion": orbit_lab::CRITICAL_EXCLUSION,
    });
    let mut run = Run::new(common, "chaos", json!({ "mu": mu, "eta": eta }), tolerances)?;
    run.write_json("chaos.json", &cert)?;
    run.finish(&map)?;
    print_json(&cert);
    Ok(())
}

fn cmd_orbits(common: &Common, mu: f64, eta: f64, n_max: usize, radius: f64) -> Result<(), Failure> {
    let map = load_map(&common.map)?;
    let search = orbit_lab::find_periodic_orbits(&map, mu, eta, n_max, orbit_lab::Domain { radius })?;
    let tolerances = json!({ "seeds_per_word": orbit_lab::SEEDS_PER_WORD, "newton": 1e-12 });
    let mut run = Run::new(common, "orbits", json!({ "mu": mu, "eta": eta, "n_max": n_max, "radius": radius }), tolerances)?;
    run.failures = search.unconverged_words.iter().map(|w| format!("no conclusion for itinerary {w}")).collect();
    run.write_json("orbits.json", &search)?;
    run.finish(&map)?;
    for o in &search.orbits {
        println!("period {} {} multiplier {}", o.period, o.itinerary, o.multiplier);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Classify { common, .. }
        | Command::Unfold { common }
        | Command::Reduce { common }
        | Command::Trace { common, .. }
        | Command::Sweep { common, .. }
        | Command::Chaos { common, .. }
        | Command::Orbits { common, .. } => common.clone(),
    };
    let jobs = common.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| config(format!("--jobs: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Classify { eta, .. } => cmd_classify(&common, *eta),
        Command::Unfold { .. } => cmd_unfold(&common),
        Command::Reduce { .. } => cmd_reduce(&common),
        Command::Trace {
            curves,
            window,
            allow_virtual,
            max_step,
            ..
        } => cmd_trace(&common, curves, window, *allow_virtual, *max_step),
        Command::Sweep {
            eta,
            mu,
            seeds,
            transient,
            sample,
            ..
        } => cmd_sweep(&common, *eta, mu, seeds.as_deref(), *transient, *sample),
        Command::Chaos { mu, eta, below, .. } => cmd_chaos(&common, *mu, eta, *below),
        Command::Orbits { mu, eta, n_max, radius, .. } => cmd_orbits(&common, *mu, *eta, *n_max, *radius),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
