use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, PSpec, RunConfig, ScenarioName};
use crate::functionals::{self, DerivativeConstants, LevelState};
use crate::geometry::{self, ManifoldModel};
use crate::potential::{self, PExponent, PotentialOptions, RadialPotential};
use crate::rigidity::{self, Outcome, ScenarioConfig, Status, Verdict};
use crate::variational;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("stage {stage}: {message}")]
pub struct RunError {
    pub stage: String,
    pub message: String,
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError {
            stage: "config".into(),
            message: e.to_string(),
        }
    }
}

macro_rules! stage {
    ($stage:expr, $e:expr) => {
        $e.map_err(|e| RunError {
            stage: $stage.to_string(),
            message: e.to_string(),
        })
    };
}

/// One CSV row: a level set of the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRow {
    pub t: f64,
    pub r: f64,
    pub area: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub grad_w: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "dF_fd")]
    pub df_fd: f64,
    #[serde(rename = "dF_cf")]
    pub df_cf: f64,
    #[serde(rename = "dG_fd")]
    pub dg_fd: f64,
    #[serde(rename = "dG_cf")]
    pub dg_cf: f64,
    pub cap: f64,
    pub cap_ratio_to_exp_t: f64,
    pub gb: f64,
    pub willmore: f64,
    pub holder_gap: f64,
}

impl LevelRow {
    pub const HEADER: [&'static str; 16] = [
        "t",
        "r",
        "area",
        "H",
        "grad_w",
        "F",
        "G",
        "dF_fd",
        "dF_cf",
        "dG_fd",
        "dG_cf",
        "cap",
        "cap_ratio_to_exp_t",
        "gb",
        "willmore",
        "holder_gap",
    ];

    pub fn values(&self) -> [f64; 16] {
        [
            self.t,
            self.r,
            self.area,
            self.h,
            self.grad_w,
            self.f,
            self.g,
            self.df_fd,
            self.df_cf,
            self.dg_fd,
            self.dg_cf,
            self.cap,
            self.cap_ratio_to_exp_t,
            self.gb,
            self.willmore,
            self.holder_gap,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub config: RunConfig,
    pub model: String,
    pub p: f64,
    pub rows: Vec<LevelRow>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub constants: BTreeMap<String, f64>,
    pub failed_hypothesis: Option<String>,
    pub summary: String,
}

impl ScenarioReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.status != Status::Fail)
    }
}

fn resolve_p(config: &RunConfig, model: &ManifoldModel) -> Result<PExponent, RunError> {
    match config.p {
        PSpec::Value(p) => stage!("config", PExponent::new(p)),
        PSpec::Auto(_) => {
            let r_hi = config.r_max_or_default().min(model.sampling_r_max(f64::INFINITY));
            let fit = stage!("select_p", geometry::growth_exponent(model, (r_hi / 100.0).max(config.r0), r_hi))?;
            stage!("select_p", rigidity::select_p(fit.alpha.min(2.0), config.tolerances.auto_margin))
        }
    }
}

fn solve(config: &RunConfig, model: &ManifoldModel, p: PExponent) -> Result<RadialPotential, RunError> {
    let options = PotentialOptions {
        grid_n: config.grid,
        r_max: config.r_max,
    };
    stage!("potential", potential::solve_radial_with(model, p, config.r0, options))
}

fn levels(config: &RunConfig, pot: &RadialPotential) -> Vec<f64> {
    functionals::sample_levels(pot, config.tolerances.levels, config.tolerances.dt)
}

pub fn level_rows(pot: &RadialPotential, levels: &[f64], dt: f64) -> Result<Vec<LevelRow>, RunError> {
    let cap0 = stage!("rows", potential::capacity(pot, 0.0))?;
    levels
        .iter()
        .map(|&t| {
            let s = stage!("rows", functionals::monotone_sample(pot, t, dt))?;
            let h = stage!("rows", functionals::holder_chain(pot, t))?;
            Ok(LevelRow {
                t,
                r: s.r,
                area: s.area,
                h: s.mean_curvature,
                grad_w: s.grad_w,
                f: s.f,
                g: s.g,
                df_fd: s.df_fd,
                df_cf: s.df_cf,
                dg_fd: s.dg_fd,
                dg_cf: s.dg_cf,
                cap: s.cap,
                cap_ratio_to_exp_t: s.cap / (cap0 * t.exp()),
                gb: s.gb,
                willmore: s.willmore,
                holder_gap: h.equality_gap,
            })
        })
        .collect()
}

struct Builder {
    verdicts: BTreeMap<String, Verdict>,
    constants: BTreeMap<String, f64>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            verdicts: BTreeMap::new(),
            constants: BTreeMap::new(),
        }
    }

    fn verdict(&mut self, key: &str, v: Verdict) {
        self.verdicts.insert(key.to_string(), v);
    }

    fn constant(&mut self, key: &str, v: f64) {
        self.constants.insert(key.to_string(), v);
    }
}

/// Executes the configured scenario. The output depends only on the config.
pub fn run(config: &RunConfig) -> Result<ScenarioReport, RunError> {
    config.validate()?;
    let model = stage!("model", config.manifold())?;
    let mut b = Builder::new();
    let mut rows = Vec::new();
    let mut failed_hypothesis = None;
    let mut p_used = f64::NAN;
    let summary;

    match config.scenario {
        ScenarioName::Solve => {
            let p = resolve_p(config, &model)?;
            p_used = p.value();
            let pot = solve(config, &model, p)?;
            rows = level_rows(&pot, &levels(config, &pot), config.tolerances.dt)?;
            capacity_law_verdict(&mut b, &rows);
            let cap0 = stage!("capacity", pot.capacity_at_radius(config.r0))?;
            b.constant("cap0", cap0);
            b.constant("normalizer", pot.normalizer());
            b.constant("t_max", pot.t_max());
            let r_hi = pot.r_max();
            match geometry::growth_exponent(&model, (r_hi / 100.0).max(config.r0), r_hi)
                .map_err(|e| e.to_string())
                .and_then(|g| potential::decay_check(&pot, g.alpha).map_err(|e| e.to_string()))
            {
                Ok(d) => {
                    b.constant("K_upper_bound", d.constant);
                    b.verdict(
                        "decay_bound",
                        Verdict::from_check(
                            d.pass,
                            format!("u <= K r^-{:.4}", d.exponent),
                            format!("log slope {:.3e}", d.log_slope),
                        ),
                    );
                }
                Err(e) => b.verdict("decay_bound", Verdict::fail(e)),
            }
            let problem = stage!(
                "variational",
                variational::discretize(&model, p, config.r0, variational::DEFAULT_CELLS, pot.r_max())
            )?;
            let sol = stage!("variational", variational::minimize_energy(&problem, config.tolerances.variational))?;
            let cv = stage!("variational", variational::cross_validate(&sol, &pot))?;
            b.constant("cap_energy", cv.capacity_energy);
            b.constant("variational_max_node_error", cv.max_node_error);
            b.constant("variational_capacity_gap", cv.capacity_gap);
            b.verdict(
                "variational_cross_validation",
                Verdict::from_check(
                    cv.pass,
                    format!("max node error {:.2e}, capacity gap {:.2e}", cv.max_node_error, cv.capacity_gap),
                    format!(
                        "routes disagree: max node error {:.2e}, capacity gap {:.2e}",
                        cv.max_node_error, cv.capacity_gap
                    ),
                ),
            );
            summary = format!("{}: potential solved at p = {}", model.name, p.value());
        }
        ScenarioName::Monotone => {
            let p = resolve_p(config, &model)?;
            p_used = p.value();
            let pot = solve(config, &model, p)?;
            let lv = levels(config, &pot);
            rows = level_rows(&pot, &lv, config.tolerances.dt)?;
            monotone_verdicts(&mut b, &rows);
            let consts = DerivativeConstants::resolved(p.value());
            b.constant("c_F", consts.c_f);
            b.constant("c_G", consts.c_g);
            let audit = stage!("audit", functionals::constants_audit(&pot, &lv, config.tolerances.dt))?;
            if let Some(c) = audit.measured_c_f {
                b.constant("c_F_measured", c);
            }
            if let Some(c) = audit.measured_c_g {
                b.constant("c_G_measured", c);
            }
            summary = format!("{}: monotone quantities at {} levels", model.name, rows.len());
        }
        ScenarioName::Contradict => {
            let p = resolve_p(config, &model)?;
            p_used = p.value();
            let sc = ScenarioConfig {
                r0: config.r0,
                eps: None,
                pinch_threshold: config.tolerances.pinch_threshold,
                ode_step: config.tolerances.ode_step,
                horizon: config.tolerances.horizon,
                levels: config.tolerances.levels,
                dt: config.tolerances.dt,
                grid_n: config.grid,
                r_max: config.r_max,
            };
            let report = stage!("contradict", rigidity::run_contradiction_scenario(&model, p, &sc))?;
            for s in &report.stages {
                b.verdict(s.stage, s.verdict.clone());
            }
            b.constants.extend(report.constants.clone());
            failed_hypothesis = match &report.outcome {
                Outcome::FailedHypothesis(h) => Some(h.clone()),
                _ => None,
            };
            if report.failed_hypotheses.iter().all(|h| h != "noncompact") {
                let pot = solve(config, &model, p)?;
                rows = level_rows(&pot, &levels(config, &pot), config.tolerances.dt)?;
            }
            summary = report.summary;
        }
        ScenarioName::CheckIdentities => {
            identity_verdicts(&mut b, config, &model)?;
            if !model.compact {
                let p = resolve_p(config, &model)?;
                p_used = p.value();
                let pot = solve(config, &model, p)?;
                potential_identity_verdicts(&mut b, config, &pot)?;
            } else {
                for key in ["capacity_law", "div_x", "div_y", "f_expansion", "holder_equality"] {
                    b.verdict(key, Verdict::not_applicable("compact model has no exterior potential"));
                }
            }
            summary = format!("{}: identity suite", model.name);
        }
        ScenarioName::WillmoreExpansion => {
            match functionals::small_sphere_expansion(&model) {
                Ok(fit) => {
                    b.constant("coefficient", fit.coefficient);
                    b.constant("quartic", fit.quartic);
                    b.constant("expected", fit.expected);
                    let (ok, what) = match fit.relative_deviation {
                        Some(rel) => (rel < 0.02, format!("relative deviation {rel:.3e}")),
                        None => (
                            fit.absolute_deviation < 1e-8,
                            format!("absolute deviation {:.3e}", fit.absolute_deviation),
                        ),
                    };
                    b.verdict(
                        "small_sphere_coefficient",
                        Verdict::from_check(
                            ok,
                            format!("16π − ∫H² ≈ {:.6} r², expected (8π/3) R(o) = {:.6}; {what}", fit.coefficient, fit.expected),
                            format!("fitted {:.6} versus expected {:.6}; {what}", fit.coefficient, fit.expected),
                        ),
                    );
                }
                Err(e) => b.verdict("small_sphere_coefficient", Verdict::not_applicable(e.to_string())),
            }
            summary = format!("{}: small-sphere Willmore expansion", model.name);
        }
    }

    Ok(ScenarioReport {
        config: config.clone(),
        model: model.name.clone(),
        p: p_used,
        rows,
        verdicts: b.verdicts,
        constants: b.constants,
        failed_hypothesis,
        summary,
    })
}

fn capacity_law_verdict(b: &mut Builder, rows: &[LevelRow]) {
    let dev = rows
        .iter()
        .map(|r| (r.cap_ratio_to_exp_t - 1.0).abs())
        .fold(0.0, f64::max);
    b.constant("capacity_law_max_dev", dev);
    b.verdict(
        "capacity_law",
        Verdict::from_check(
            dev < 1e-6,
            format!("cap(t) = e^t cap(0) to {dev:.2e}"),
            format!("cap(t)/(e^t cap(0)) off by {dev:.2e}"),
        ),
    );
}

fn monotone_verdicts(b: &mut Builder, rows: &[LevelRow]) {
    let tol = |f: f64| 1e-9 * (1.0 + f.abs());
    let f_ok = rows.windows(2).all(|w| w[1].f <= w[0].f + tol(w[0].f)) && rows.iter().all(|r| r.df_fd <= tol(r.f));
    let g_ok = rows.windows(2).all(|w| w[1].g <= w[0].g + tol(w[0].f)) && rows.iter().all(|r| r.dg_fd <= tol(r.f));
    let order = rows.iter().all(|r| r.g >= -tol(r.f) && r.g <= r.f + tol(r.f));
    b.verdict("F_non_increasing", Verdict::from_check(f_ok, "F non-increasing", "F increases somewhere"));
    b.verdict("G_non_increasing", Verdict::from_check(g_ok, "G non-increasing", "G increases somewhere"));
    b.verdict("lemma3_ordering", Verdict::from_check(order, "0 <= G <= F", "ordering 0 <= G <= F violated"));
    let rel = |fd: f64, cf: f64, f: f64| (fd - cf).abs() / cf.abs().max(tol(f) * 1e5);
    let df = rows.iter().map(|r| rel(r.df_fd, r.df_cf, r.f)).fold(0.0, f64::max);
    let dg = rows.iter().map(|r| rel(r.dg_fd, r.dg_cf, r.f)).fold(0.0, f64::max);
    b.constant("dF_max_rel_residual", df);
    b.constant("dG_max_rel_residual", dg);
    b.verdict(
        "derivative_audit_F",
        Verdict::from_check(df < 1e-4, format!("F' matches closed form to {df:.2e}"), format!("F' residual {df:.2e}")),
    );
    b.verdict(
        "derivative_audit_G",
        Verdict::from_check(dg < 1e-4, format!("G' matches closed form to {dg:.2e}"), format!("G' residual {dg:.2e}")),
    );
}

pub const IDENTITY_SAMPLES: usize = 100;

/// Log-uniform radii in the model domain, from the config seed.
pub fn random_radii(config: &RunConfig, model: &ManifoldModel, n: usize) -> Vec<f64> {
    let lo = model.r_min.max(1e-3);
    let hi = model.sampling_r_max(config.r_max_or_default());
    let (a, b) = (lo.ln(), hi.ln());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut radii: Vec<f64> = (0..n).map(|_| rng.gen_range(a..b).exp()).collect();
    // keep closed-up models away from the antipodal point
    if model.compact {
        radii.iter_mut().for_each(|r| *r = r.min(hi * (1.0 - 1e-6)));
    }
    radii
}

fn identity_verdicts(b: &mut Builder, config: &RunConfig, model: &ManifoldModel) -> Result<(), RunError> {
    let radii = random_radii(config, model, IDENTITY_SAMPLES);
    let mut gauss: f64 = 0.0;
    let mut gb: f64 = 0.0;
    for &r in &radii {
        gauss = gauss.max(stage!("identities", geometry::gauss_identity_residual(model, r))?);
        let l = stage!("identities", geometry::levelset_geometry(model, r))?;
        gb = gb.max((l.gauss_bonnet_integral() - 8.0 * PI).abs());
    }
    b.constant("gauss_equation_max_residual", gauss);
    b.constant("gauss_bonnet_max_error", gb);
    b.verdict(
        "gauss_equation",
        Verdict::from_check(
            gauss < 1e-10,
            format!("residual {gauss:.2e} at {} radii", radii.len()),
            format!("residual {gauss:.2e}"),
        ),
    );
    b.verdict(
        "gauss_bonnet",
        Verdict::from_check(gb < 1e-8, format!("∫Sc^T = 8π to {gb:.2e}"), format!("∫Sc^T off by {gb:.2e}")),
    );
    Ok(())
}

fn potential_identity_verdicts(b: &mut Builder, config: &RunConfig, pot: &RadialPotential) -> Result<(), RunError> {
    let lv = levels(config, pot);
    let rows = level_rows(pot, &lv, config.tolerances.dt)?;
    capacity_law_verdict(b, &rows);

    let mut expansion: f64 = 0.0;
    let mut holder: f64 = 0.0;
    let mut dx: f64 = 0.0;
    let mut dy: f64 = 0.0;
    for &t in &lv {
        let l = stage!("identities", LevelState::at_level(pot, t))?;
        expansion = expansion.max((l.f() - l.f_expanded()).abs() / (1.0 + l.f().abs()));
        let h = stage!("identities", functionals::holder_chain(pot, t))?;
        holder = holder.max(h.equality_gap.abs() / h.mid);
        let d = stage!("identities", functionals::div_fields(pot, l.geom.r))?;
        // the closed forms are differences of terms of size H |∇w|²; near
        // cancellation measure against that size instead
        let terms = l.geom.mean_curvature.abs() * l.grad_w().powi(2) + l.geom.ric_normal.abs() * l.grad_w();
        let scale = |claim: f64, _x: f64| claim.abs().max(1e-6 * terms);
        dx = dx.max((d.div_x - d.claim_x).abs() / scale(d.claim_x, d.div_x));
        dy = dy.max((d.div_y - d.claim_y).abs() / scale(d.claim_y, d.div_y));
    }
    b.constant("f_expansion_max_error", expansion);
    b.constant("holder_max_rel_gap", holder);
    b.constant("div_x_max_rel_error", dx);
    b.constant("div_y_max_rel_error", dy);
    b.verdict(
        "f_expansion",
        Verdict::from_check(expansion < 1e-12, "definition and expansion of F agree", format!("off by {expansion:.2e}")),
    );
    b.verdict(
        "holder_equality",
        Verdict::from_check(holder < 1e-8, format!("Hölder chain tight to {holder:.2e}"), format!("gap {holder:.2e}")),
    );
    b.verdict(
        "div_x",
        Verdict::from_check(dx < 1e-5, format!("div X matches its closed form to {dx:.2e}"), format!("div X off by {dx:.2e}")),
    );
    b.verdict(
        "div_y",
        Verdict::from_check(dy < 1e-5, format!("div Y matches its closed form to {dy:.2e}"), format!("div Y off by {dy:.2e}")),
    );
    Ok(())
}
