//! Acceptance gate. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion does.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};

use bcpd::center_manifold::{nd_unfold, reduce};
use bcpd::continuation::{
    bifurcation_set, detect_codim2, sweep_1param, BifurcationCurve, CurveKind, SpecialKind, SweepOptions, TraceOptions, TransitionKind, Window,
};
use bcpd::linalg_bc::{feigin_classify, half_fixed_point, FixedPointScenario};
use bcpd::numerics::{fit_cubic_through_origin, log_log_slope};
use bcpd::orbit_lab::{attractor_sample, chaos_certificate, find_periodic_orbits, lyapunov_exponent, Classification, Domain};
use bcpd::second_iterate::{rl_admissible_predicted, solve_two_cycle_branch, Itinerary};
use bcpd::unfolding1d::{h2_exact, multiplier_at_fixed_point, unfold, NormalizedCoeffs};
use bcpd::{fixtures, HalfMap, Poly2, PwsMap, Side};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn curves(map: &PwsMap, kinds: &[CurveKind], mu: [f64; 2], eta: [f64; 2]) -> Vec<BifurcationCurve> {
    let set = bifurcation_set(map, kinds, &TraceOptions::new(Window { mu, eta }));
    assert!(set.failures.is_empty(), "{:?}", set.failures);
    set.curves
}

fn criterion_1() -> Outcome {
    let map = fixtures::pdmapex();
    let set = curves(&map, &[CurveKind::PdFixed, CurveKind::BcTwocycle], [-0.05, 0.25], [-0.06, 0.02]);
    let pd = set.iter().find(|c| c.kind == CurveKind::PdFixed && c.itinerary == "L").ok_or("no PD curve")?;
    let bc = set.iter().find(|c| c.kind == CurveKind::BcTwocycle && c.itinerary == "LL").ok_or("no BC curve")?;

    let pd_pts: Vec<_> = pd.points.iter().filter(|p| (-0.03..=0.0).contains(&p.eta)).collect();
    let pd_err = pd_pts.iter().map(|p| (p.mu - (-6.0 * p.eta - 4.5 * p.eta * p.eta)).abs()).fold(0.0, f64::max);
    let pd_span = pd_pts.iter().map(|p| p.eta).fold(0.0, f64::min);
    let bc_pts: Vec<_> = bc.points.iter().filter(|p| (0.0..=0.2).contains(&p.mu)).collect();
    let bc_err = bc_pts.iter().map(|p| (p.eta + p.mu / 6.0).abs()).fold(0.0, f64::max);
    let bc_span = bc_pts.iter().map(|p| p.mu).fold(0.0, f64::max);
    ensure(
        pd_err <= 1e-6 && bc_err <= 1e-6 && pd_span <= -0.03 + 1e-3 && bc_span >= 0.2 - 1e-2,
        format!(
            "PD max|dmu| = {pd_err:.2e} over {} points (eta down to {pd_span:.4}); BC max|deta| = {bc_err:.2e} over {} points (mu up to {bc_span:.4})",
            pd_pts.len(),
            bc_pts.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let r = reduce(&fixtures::pdmapex()).map_err(|e| e.to_string())?;
    let (b, a, p, q) = r.reduced.as_1d().ok_or("reduced map is not scalar")?;
    let expect = [
        ("mu", b.coeff(0, 0), 1.0),
        ("s", a.coeff(0, 0), -1.0),
        ("s^2", p.coeff(0, 0), 0.5),
        ("mu s", a.coeff(1, 0), -2.0 / 3.0),
        ("eta s", a.coeff(0, 1), 1.0),
        ("mu^2", b.coeff(1, 0), 1.0 / 3.0),
        ("mu eta", b.coeff(0, 1), -2.0),
        ("s^3", q.coeff(0, 0), -1.0 / 3.0),
    ];
    let worst = expect.iter().map(|(_, got, want)| (got - want).abs()).fold(0.0, f64::max);
    let c0_err = (r.c0() + 1.0 / 12.0).abs();
    let scale_err = (r.mu_hat_scale + 1.0).abs();
    ensure(
        worst <= 1e-10 && c0_err <= 1e-10 && scale_err <= 1e-12,
        format!("max coefficient error {worst:.1e}, c0 error {c0_err:.1e}, mu_hat scale error {scale_err:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let map = fixtures::pdmapex();
    let set = curves(&map, &[CurveKind::SnTwocycle, CurveKind::BcFixed], [-0.35, 0.05], [-0.25, 0.05]);
    let special: Vec<_> = set.iter().flat_map(|c| c.special_points.iter()).collect();
    let find = |kind: SpecialKind| special.iter().find(|s| s.kind == kind).copied();
    let em = find(SpecialKind::SnEmanation).ok_or("no emanation point")?;
    let cusp = find(SpecialKind::Cusp).ok_or("no cusp")?;
    let em_err = (em.eta - (10f64.sqrt() - 4.0) / 9.0).abs().max(em.mu.abs());
    let cusp_err = (cusp.mu + 1.0 / 18.0).abs().max((cusp.eta + 1.0 / 9.0).abs());
    let second = special
        .iter()
        .filter(|s| s.kind == SpecialKind::Codim2BcPd && s.eta < -0.1)
        .map(|s| (s.eta + 2.0 / 9.0).abs())
        .fold(f64::INFINITY, f64::min);
    let detected = detect_codim2(&map, [-0.25, 0.05]);
    let scan = detected.iter().map(|p| (p.eta + 2.0 / 9.0).abs()).fold(f64::INFINITY, f64::min);
    ensure(
        em_err <= 1e-4 && cusp_err <= 1e-4 && second <= 1e-8 && scan <= 1e-8,
        format!("emanation error {em_err:.1e}, cusp error {cusp_err:.1e}, second codim-2 error {second:.1e} (axis scan {scan:.1e})"),
    )
}

fn criterion_4() -> Outcome {
    let map = fixtures::fig2();
    let eta = -0.25;
    let grid: Vec<f64> = (0..141).map(|i| -0.3 + 0.35 * i as f64 / 140.0).collect();
    let seeds = [DVector::from_element(1, 0.0)];
    let r = sweep_1param(&map, eta, &grid, &seeds, &SweepOptions::default()).map_err(|e| e.to_string())?;
    let at = |k: TransitionKind| r.transitions.iter().find(|t| t.kind == k).map(|t| t.mu).unwrap_or(f64::NAN);
    let (pd, bc) = (at(TransitionKind::PeriodDoubling), at(TransitionKind::BorderCollision));
    let mut ok = (pd + 0.2169).abs() <= 5e-4 && (bc + 0.1937).abs() <= 5e-4;
    let x0 = DVector::from_element(1, 0.0);
    let mut lyap = Vec::new();
    for mu in [-0.15, -0.10, -0.05] {
        let l = lyapunov_exponent(&map, mu, eta, &x0, 2000, 20_000).map_err(|e| e.to_string())?;
        let class = attractor_sample(&map, mu, eta, &x0, 2000, 2000).classification;
        ok &= l > 0.01 && class.label() == "chaotic";
        lyap.push(format!("{l:.3}"));
    }
    let escape = attractor_sample(&map, 0.02, eta, &x0, 2000, 2000).classification;
    ok &= matches!(escape, Classification::Escaped { .. });
    ensure(
        ok,
        format!("PD at {pd:.5}, BC at {bc:.5}, Lyapunov [{}], mu = 0.02 {}", lyap.join(", "), escape.label()),
    )
}

fn random_coeffs(r: &mut ChaCha8Rng) -> NormalizedCoeffs {
    let mut u = || r.gen_range(-1.0..1.0);
    NormalizedCoeffs {
        alpha1: u(),
        alpha3: u(),
        alpha4: u(),
        alpha5: u(),
        beta1: u(),
        beta2: u(),
        gamma0: u(),
        gamma1: u(),
        gamma2: u(),
        delta0: u(),
    }
}

fn normalized_map(c: &NormalizedCoeffs, a0r: f64, p_r: f64) -> PwsMap {
    let left = c.to_half();
    let (b, _, _, _) = left.as_1d().expect("scalar");
    let right = HalfMap::one_d(b, Poly2::constant(a0r), Poly2::constant(p_r), Poly2::default());
    PwsMap::new(left, right).expect("continuous by construction")
}

fn criterion_5a() -> Outcome {
    let mut r = rng(51);
    let worst = (0..100)
        .map(|_| {
            let c = random_coeffs(&mut r);
            (c.l2() - c.l1() + (c.gamma0 * c.gamma0 + c.delta0) / 4.0).abs()
        })
        .fold(0.0, f64::max);
    ensure(worst <= 1e-14, format!("max |l2 - l1 + c0/4| = {worst:.1e} over 100 sets"))
}

fn criterion_5b() -> Outcome {
    let mut r = rng(52);
    let mut maps = vec![fixtures::fig2()];
    maps.extend((0..5).map(|_| normalized_map(&random_coeffs(&mut r), 0.5, 0.0)));
    let mus: Vec<f64> = (0..9).map(|k| -(10f64).powf(-2.0 - 0.25 * k as f64)).collect();
    let mut slopes = Vec::new();
    for map in &maps {
        let report = unfold(map).map_err(|e| e.to_string())?;
        let dev: Vec<f64> = mus
            .iter()
            .map(|&mu| multiplier_at_fixed_point(map, mu, report.h1_user(mu)).map(|m| m + 1.0))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        slopes.push(log_log_slope(&mus, &dev));
    }
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(min >= 2.7, format!("min fit exponent {min:.3} over {} maps, mu in [-1e-2, -1e-4]", slopes.len()))
}

fn away_from_unity(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let a: f64 = r.gen_range(lo..hi);
        if (a.abs() - 1.0).abs() >= 0.2 {
            return a;
        }
    }
}

fn criterion_5c() -> Outcome {
    let mut r = rng(53);
    let mut found = 0;
    let mut unconverged = 0;
    for i in 0..20 {
        let c = random_coeffs(&mut r);
        let (a0r, mu, eta) = match i % 3 {
            0 => (away_from_unity(&mut r, -3.0, 0.8), r.gen_range(-0.01..0.01), r.gen_range(-0.02..0.02)),
            1 => (away_from_unity(&mut r, -3.0, 3.0), r.gen_range(0.002..0.01), r.gen_range(-0.02..0.02)),
            _ => {
                let a0r = r.gen_range(1.2..3.0);
                let mu = -r.gen_range(0.002..0.01);
                (a0r, mu, f64::NAN)
            }
        };
        let map = normalized_map(&c, a0r, r.gen_range(-1.0..1.0));
        let eta = if eta.is_nan() {
            let report = unfold(&map).map_err(|e| e.to_string())?;
            let h2 = h2_exact(&map, mu, report.h2(mu), 0.05).map_err(|e| e.to_string())?;
            h2 + r.gen_range(0.2..1.0) * mu.abs()
        } else {
            eta
        };
        let search = find_periodic_orbits(&map, mu, eta, 8, Domain { radius: 0.1 }).map_err(|e| e.to_string())?;
        found += search.orbits.iter().filter(|o| o.period >= 3).count();
        unconverged += search.unconverged_words.iter().filter(|w| w.len() >= 3).count();
    }
    ensure(found == 0, format!("{found} orbits of period 3-8 over 20 maps ({unconverged} words without a converged seed)"))
}

fn criterion_5d() -> Outcome {
    let mut r = rng(54);
    let mu = -0.03;
    let mut held = 0;
    let mut notes = Vec::new();
    for _ in 0..5 {
        let map = normalized_map(&random_coeffs(&mut r), r.gen_range(1.2..3.0), r.gen_range(-1.0..1.0));
        let report = unfold(&map).map_err(|e| e.to_string())?;
        let h2 = h2_exact(&map, mu, report.h2(mu), 0.05).map_err(|e| e.to_string())?;
        match chaos_certificate(&map, mu, h2 - 0.04 * mu.abs()) {
            Ok(cert) if cert.holds => {
                held += 1;
                notes.push(format!("{:.2}", cert.expansion_bound));
            }
            Ok(cert) => notes.push(format!("bound {:.2}", cert.expansion_bound)),
            Err(e) => notes.push(e.to_string()),
        }
    }
    ensure(held == 5, format!("{held}/5 certificates hold (expansion bounds [{}])", notes.join(", ")))
}

fn criterion_6() -> Outcome {
    let map = fixtures::pdmapex();
    let red = reduce(&map).map_err(|e| e.to_string())?;
    let dirs = [[1.0, 0.5, -0.3], [-0.7, 0.2, 0.6], [0.3, -0.9, 0.1], [0.6, 0.6, 0.6]];
    let worst = |t: f64| dirs.iter().map(|d| red.invariance_residual(&map, 2, d[0] * t, d[1] * t, d[2] * t)).fold(0.0, f64::max);
    let ratio = worst(1e-2) / worst(1e-3);
    let mut ok = (250.0..=4000.0).contains(&ratio);

    let u = nd_unfold(&map).map_err(|e| e.to_string())?;
    let set = curves(&map, &[CurveKind::PdFixed, CurveKind::BcTwocycle], [-0.01, 0.06], [-0.05, 0.05]);
    let fit = |kind: CurveKind| {
        let c = set.iter().find(|c| c.kind == kind && c.itinerary.starts_with('L')).expect("curve");
        let (x, y): (Vec<f64>, Vec<f64>) = c.points.iter().filter(|p| p.mu > 0.0).map(|p| (p.mu, p.eta)).unzip();
        fit_cubic_through_origin(&x, &y)
    };
    let (h1, h2) = (fit(CurveKind::PdFixed), fit(CurveKind::BcTwocycle));
    let rep = &u.report;
    let predicted = -rep.c0 / 4.0 * rep.mu_scale * rep.mu_scale / rep.eta_scale;
    let gap = h2[1] - h1[1];
    ok &= (h1[0] - h2[0]).abs() <= 1e-6 && ((gap - predicted) / predicted).abs() <= 0.2;

    let sign = u.rl_sign.ok_or("no RL sign")?.sign;
    let mut agree = 0;
    let mut total = 0;
    for mu in [-0.02, -0.01, -0.005, 0.005, 0.01, 0.02] {
        let (mu_hat, _) = (mu * rep.mu_scale, 0.0);
        for off in [-0.5, -0.1, 0.1, 0.5] {
            let eta_hat = rep.h2(mu_hat) + off * mu.abs();
            let eta = eta_hat / rep.eta_scale;
            let sampled = solve_two_cycle_branch(&map, mu, eta, Itinerary::RL, None).map(|c| c.admissible).unwrap_or(false);
            total += 1;
            agree += usize::from(sampled == rl_admissible_predicted(sign, mu_hat, eta_hat, rep.h2(mu_hat)));
        }
    }
    ok &= agree == total;
    ensure(
        ok,
        format!(
            "invariance residual ratio {ratio:.0} (t^3 gives 1000), tangency gap {gap:.5} vs {predicted:.5}, RL admissibility {agree}/{total}"
        ),
    )
}

fn random_pl_map(r: &mut ChaCha8Rng) -> PwsMap {
    let mut u = || r.gen_range(-2.0..2.0);
    let (b0, b1, a01, a11) = (u(), u(), u(), u());
    let half = |a00: f64, a10: f64| {
        let mut h = HalfMap::zero(2);
        h.set_b(0, Poly2::constant(b0));
        h.set_b(1, Poly2::constant(b1));
        h.set_a(0, 0, Poly2::constant(a00));
        h.set_a(1, 0, Poly2::constant(a10));
        h.set_a(0, 1, Poly2::constant(a01));
        h.set_a(1, 1, Poly2::constant(a11));
        h
    };
    let (l0, l1, r0, r1) = (u(), u(), u(), u());
    PwsMap::new(half(l0, l1), half(r0, r1)).expect("continuous by construction")
}

fn criterion_7() -> Outcome {
    let mut r = rng(57);
    let (mut agree, mut compared, mut flagged) = (0, 0, 0);
    let mut disagreements = Vec::new();
    for i in 0..50 {
        let map = random_pl_map(&mut r);
        let report = feigin_classify(&map, 0.0);
        if !report.degenerate_flags.is_empty() {
            flagged += 1;
            continue;
        }
        let mut fixed = [0usize; 2];
        let mut rl = [false; 2];
        for (k, mu) in [-1e-3, 1e-3].into_iter().enumerate() {
            fixed[k] = [Side::L, Side::R]
                .into_iter()
                .filter(|&s| half_fixed_point(map.half(s), s, mu, 0.0).map(|f| f.admissible).unwrap_or(false))
                .count();
            let search = find_periodic_orbits(&map, mu, 0.0, 2, Domain { radius: 10.0 }).map_err(|e| e.to_string())?;
            let period_one = search.orbits.iter().filter(|o| o.period == 1).count();
            if period_one != fixed[k] {
                disagreements.push(format!("map {i}: fixed-point count {} vs {period_one}", fixed[k]));
            }
            rl[k] = search.orbits.iter().any(|o| o.period == 2);
        }
        let brute_scenario = match fixed {
            [1, 1] => Some(FixedPointScenario::Persistence),
            [0, 2] | [2, 0] => Some(FixedPointScenario::NonsmoothFold),
            _ => None,
        };
        let brute_two_cycle = rl[0] != rl[1];
        compared += 1;
        if brute_scenario == Some(report.fixed_point_scenario) && brute_two_cycle == report.two_cycle_exists && !(rl[0] && rl[1]) {
            agree += 1;
        } else {
            disagreements.push(format!("map {i}: fixed {fixed:?}, two-cycles {rl:?}, Feigin {:?}", report));
        }
    }
    ensure(
        agree == compared && disagreements.is_empty(),
        format!("{agree}/{compared} agree, {flagged} flagged degenerate{}", if disagreements.is_empty() { String::new() } else { format!("; {}", disagreements.join("; ")) }),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1  pdmapex exact PD and BC curves", criterion_1),
        ("2  pdmapex reduced-map coefficients", criterion_2),
        ("3  pdmapex special points", criterion_3),
        ("4  fig2 sweep at eta = -0.25", criterion_4),
        ("5a l2 - l1 identity", criterion_5a),
        ("5b multiplier along quadratic h1", criterion_5b),
        ("5c no n-cycles outside the chaotic sector", criterion_5c),
        ("5d chaos certificates", criterion_5d),
        ("6  reduction, tangency and RL admissibility", criterion_6),
        ("7  Feigin vs brute force", criterion_7),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let line = match outcome {
            Ok(detail) => format!("PASS [{name}] {detail}\n"),
            Err(detail) => {
                failed.push(name);
                format!("FAIL [{name}] {detail}\n")
            }
        };
        // Written to the raw stream so the gate lines survive output capture.
        std::io::stderr().write_all(line.as_bytes()).expect("stderr");
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
