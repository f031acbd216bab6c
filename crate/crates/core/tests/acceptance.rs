//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use capacitary::functionals::{self, DEFAULT_DT};
use capacitary::geometry::{self, ManifoldModel};
use capacitary::potential::{self, PExponent, PotentialOptions};
use capacitary::rigidity::{self, Outcome, ScenarioConfig, Status};
use capacitary::variational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pe(p: f64) -> PExponent {
    PExponent::new(p).unwrap()
}

fn flat_exactness() -> Check {
    let start = Instant::now();
    let mut worst_u: f64 = 0.0;
    let mut worst_fg: f64 = 0.0;
    for p in [1.2, 1.5, 1.8] {
        let pot = potential::solve_radial(&ManifoldModel::flat(), pe(p), 1.0).map_err(|e| e.to_string())?;
        let k = (3.0 - p) / (p - 1.0);
        for s in pot.samples() {
            let exact = s.r.powf(-k);
            worst_u = worst_u.max((s.u - exact).abs() / exact);
        }
        for t in functionals::sample_levels(&pot, 64, DEFAULT_DT) {
            let l = functionals::LevelState::at_level(&pot, t).map_err(|e| e.to_string())?;
            worst_fg = worst_fg.max((l.f() - 4.0 * PI).abs()).max((l.g() - 4.0 * PI).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst_u < 1e-8 && worst_fg < 1e-8 && secs < 1.0,
        format!("max rel u error {worst_u:.2e}, max |F-4π|,|G-4π| {worst_fg:.2e}, {secs:.3} s"),
    )
}

fn capacity_law() -> Check {
    let mut worst: f64 = 0.0;
    let mut flat_cap0 = f64::NAN;
    for model in geometry::library() {
        let options = PotentialOptions {
            r_max: Some(1e6),
            ..PotentialOptions::default()
        };
        let pot = potential::solve_radial_with(&model, pe(1.5), 1.0, options).map_err(|e| e.to_string())?;
        let cap0 = potential::capacity(&pot, 0.0).map_err(|e| e.to_string())?;
        if model.name == "flat" {
            flat_cap0 = cap0;
        }
        for k in 0..=200 {
            let t = 10.0 * k as f64 / 200.0;
            let c = potential::capacity(&pot, t).map_err(|e| format!("{}: {e}", model.name))?;
            worst = worst.max((c / cap0 / t.exp() - 1.0).abs());
        }
    }
    ensure(
        worst < 1e-6 && (flat_cap0 - 1.0).abs() < 1e-8,
        format!("max |cap(t)/(e^t cap(0)) - 1| = {worst:.2e} on [0, 10]; flat cap(0) = {flat_cap0:.12}"),
    )
}

fn variational_cross_validation() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for model in geometry::library() {
        let start = Instant::now();
        let pot = potential::solve_radial(&model, pe(1.5), 1.0).map_err(|e| e.to_string())?;
        let cap_q = pot.capacity_at_radius(1.0).map_err(|e| e.to_string())?;
        let mut gaps = Vec::new();
        for n in [2048, 4096, 8192] {
            let problem = variational::discretize(&model, pe(1.5), 1.0, n, pot.r_max()).map_err(|e| e.to_string())?;
            let sol = variational::minimize_energy(&problem, variational::DEFAULT_TOL).map_err(|e| e.to_string())?;
            gaps.push((variational::capacity_from_energy(&sol) - cap_q) / cap_q);
        }
        let secs = start.elapsed().as_secs_f64();
        let ratios = [gaps[1] / gaps[0], gaps[2] / gaps[1]];
        let model_ok = gaps[0].abs() < 5e-3
            && gaps[2].abs() < 5e-4
            && ratios.iter().all(|r| *r <= 0.6)
            && gaps.iter().all(|g| *g >= -1e-6)
            && secs < 10.0;
        ok &= model_ok;
        lines.push(format!(
            "{}: gap {:.2e} -> {:.2e} -> {:.2e}, ratios {:.3}/{:.3}, {secs:.2} s",
            model.name, gaps[0], gaps[1], gaps[2], ratios[0], ratios[1]
        ));
    }
    ensure(ok, lines.join("; "))
}

fn monotonicity() -> Check {
    let tol = |f: f64| 1e-9 * (1.0 + f.abs());
    let mut count = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for model in geometry::library() {
        let grid = capacitary::numerics::geomspace(1e-2, 1e4, 256);
        let margin = geometry::pinching_margin(&model, &grid).map_err(|e| e.to_string())?;
        if !margin.nonneg_ricci {
            continue;
        }
        for p in [1.2, 1.5, 1.8] {
            let pot = potential::solve_radial(&model, pe(p), 1.0).map_err(|e| e.to_string())?;
            let levels = functionals::sample_levels(&pot, 64, DEFAULT_DT);
            let rows = functionals::monotone_profile(&pot, &levels, DEFAULT_DT).map_err(|e| e.to_string())?;
            for w in rows.windows(2) {
                worst = worst.max((w[1].f - w[0].f) / tol(w[0].f)).max((w[1].g - w[0].g) / tol(w[0].f));
            }
            for s in &rows {
                worst = worst
                    .max(s.df_fd / tol(s.f))
                    .max(s.dg_fd / tol(s.f))
                    .max(-s.g / tol(s.f))
                    .max((s.g - s.f) / tol(s.f));
            }
            count += 1;
        }
    }
    ensure(
        worst <= 1.0 && count == 9,
        format!("{count} model/p runs; worst violation {worst:.3e} in units of 1e-9(1+|F|)"),
    )
}

fn derivative_audit() -> Check {
    let model = ManifoldModel::power_warp(1.5).unwrap();
    let pot = potential::solve_radial(&model, pe(1.5), 1.0).map_err(|e| e.to_string())?;
    let levels = functionals::sample_levels(&pot, 32, DEFAULT_DT);
    let audit = functionals::constants_audit(&pot, &levels, DEFAULT_DT).map_err(|e| e.to_string())?;
    let mut div_worst: f64 = 0.0;
    for &t in &levels {
        let r = pot.radius_of_level(t).map_err(|e| e.to_string())?;
        let d = functionals::div_fields(&pot, r).map_err(|e| e.to_string())?;
        div_worst = div_worst
            .max((d.div_x - d.claim_x).abs() / d.claim_x.abs())
            .max((d.div_y - d.claim_y).abs() / d.claim_y.abs());
    }
    let documented = audit.findings.len() >= 5
        && audit.findings.iter().take(4).all(|f| {
            f.measured
                .map(|m| (m - f.resolved).abs() <= 1e-4 * f.resolved.abs())
                .unwrap_or(false)
        })
        && audit.findings[1].stated != audit.findings[1].resolved
        && audit.findings[2].stated != audit.findings[2].resolved
        && audit.findings[4].stated > 1e-2
        && audit.findings[4].resolved < 1e-5;
    ensure(
        audit.max_rel_residual_f < 1e-4 && audit.max_rel_residual_g < 1e-4 && div_worst < 1e-5 && documented,
        format!(
            "F' residual {:.2e}, G' residual {:.2e}, div residual {div_worst:.2e}; c_F = {:.6}, c_G = {:.6}, lemma factor {:.6}",
            audit.max_rel_residual_f,
            audit.max_rel_residual_g,
            audit.measured_c_f.unwrap_or(f64::NAN),
            audit.measured_c_g.unwrap_or(f64::NAN),
            audit.findings[2].measured.unwrap_or(f64::NAN),
        ),
    )
}

fn identity_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut gauss: f64 = 0.0;
    let mut gb: f64 = 0.0;
    let models = geometry::fixtures();
    for model in &models {
        let lo = model.r_min.max(1e-3);
        let hi = model.sampling_r_max(1e4) * if model.compact { 1.0 - 1e-6 } else { 1.0 };
        for _ in 0..100 {
            let r = rng.gen_range(lo.ln()..hi.ln()).exp();
            gauss = gauss.max(geometry::gauss_identity_residual(model, r).map_err(|e| e.to_string())?);
            let l = geometry::levelset_geometry(model, r).map_err(|e| e.to_string())?;
            gb = gb.max((l.gauss_bonnet_integral() - 8.0 * PI).abs());
        }
    }
    ensure(
        gauss < 1e-10 && gb < 1e-8,
        format!("{} models x 100 radii: Gauss residual {gauss:.2e}, Gauss-Bonnet error {gb:.2e}", models.len()),
    )
}

fn threshold_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    let mut n = 0;
    while n < 10_000 {
        let p: f64 = rng.gen_range(1.0..2.0);
        let Ok(pp) = PExponent::new(p) else { continue };
        let alpha: f64 = rng.gen_range(0.0..=2.0);
        if alpha <= p - 1.0 {
            continue;
        }
        let report = rigidity::threshold(pp, alpha).map_err(|e| e.to_string())?;
        let brute = (9.0 - p) / ((3.0 - p) * (3.0 - p)) > (1.0 + alpha) / (alpha + 1.0 - p);
        if report.contradiction_possible != (alpha > 4.0 / (5.0 - p)) || brute != report.contradiction_possible {
            mismatches += 1;
        }
        n += 1;
    }
    let f2 = rigidity::f_threshold(2.0);
    ensure(
        mismatches == 0 && (f2 - 4.0 / 3.0).abs() < 1e-12,
        format!("{n} pairs, {mismatches} mismatches; f(2) = {f2:.15}"),
    )
}

fn lemma2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut cases = vec![(1.5, 1.0 / 3.0, 2.0 * PI), (1.5, 0.1, 3.9 * PI)];
    for _ in 0..30 {
        let eps = rng.gen_range(0.02..=1.0 / 3.0);
        let c = rigidity::dichotomy_constant(eps);
        cases.push((rng.gen_range(1.05..1.95), eps, rng.gen_range(1.01 * c..0.999 * 4.0 * PI)));
    }
    for (p, eps, f0) in cases {
        let tr = rigidity::lemma2_dichotomy(pe(p), eps, f0, rigidity::ODE_STEP, 400.0).map_err(|e| e.to_string())?;
        let t0 = tr.t0.ok_or("no crossing within horizon")?;
        worst = worst.max((t0 - tr.closed_form_crossing).abs() / tr.closed_form_crossing);
    }
    let c = rigidity::dichotomy_constant(1.0 / 3.0);
    ensure(
        worst < 1e-6 && (c - PI).abs() < 1e-12,
        format!("max relative crossing-time error {worst:.2e}; constant at eps = 1/3: {c:.15}"),
    )
}

fn small_sphere() -> Check {
    let cap = functionals::small_sphere_expansion(&ManifoldModel::positive_cap(1.0).unwrap()).map_err(|e| e.to_string())?;
    let spline = functionals::small_sphere_expansion(&ManifoldModel::spline_pole_fixture(0.5, 1.0, 41).unwrap())
        .map_err(|e| e.to_string())?;
    let flat = functionals::small_sphere_expansion(&ManifoldModel::flat()).map_err(|e| e.to_string())?;
    let (a, b) = (cap.relative_deviation.unwrap(), spline.relative_deviation.unwrap());
    ensure(
        a < 0.02 && b < 0.02 && flat.coefficient.abs() < 1e-8,
        format!(
            "positive_cap(1) {:.6} vs {:.6} ({a:.2e}); spline k=1/2 {:.6} vs {:.6} ({b:.2e}); flat {:.2e}",
            cap.coefficient, cap.expected, spline.coefficient, spline.expected, flat.coefficient
        ),
    )
}

fn theorem_shadow() -> Check {
    let cfg = ScenarioConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for model in geometry::library() {
        let p = if model.name.starts_with("power_warp") {
            rigidity::select_p(1.5, 0.5).map_err(|e| e.to_string())?
        } else {
            pe(1.5)
        };
        let r = rigidity::run_contradiction_scenario(&model, p, &cfg).map_err(|e| e.to_string())?;
        let expected = if model.name == "flat" { "willmore" } else { "pinching" };
        let pinching_fails = r.stage("pinching").map(|v| v.status == Status::Fail).unwrap_or(false);
        ok &= r.outcome == Outcome::FailedHypothesis(expected.into())
            && (model.name == "flat" || pinching_fails);
        lines.push(format!("{} -> {:?}", model.name, r.outcome));
    }
    let boundary = ManifoldModel::cone(0.8).unwrap().with_boundary(1.0).unwrap();
    let r = rigidity::run_contradiction_scenario(&boundary, pe(1.5), &cfg).map_err(|e| e.to_string())?;
    ok &= r.outcome == Outcome::FailedHypothesis("pinching".into())
        && r.stage("willmore_gate").map(|v| v.status == Status::Pass).unwrap_or(false);
    lines.push(format!("boundary {} -> {:?}", boundary.name, r.outcome));
    ensure(ok, lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("flat-space exactness", flat_exactness),
        ("capacity law", capacity_law),
        ("variational cross-validation", variational_cross_validation),
        ("monotonicity suite", monotonicity),
        ("derivative audit", derivative_audit),
        ("identity suite", identity_suite),
        ("threshold algebra", threshold_algebra),
        ("ODE dichotomy", lemma2),
        ("small-sphere Willmore", small_sphere),
        ("theorem shadow", theorem_shadow),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
