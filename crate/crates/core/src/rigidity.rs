//! The rigidity argument run forward on a concrete model: threshold algebra,
//! the ODE comparison behind exponential decay of `F`, the ordering
//! `0 ≤ G ≤ F`, and a scenario that walks the whole inequality chain and
//! reports which hypothesis breaks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::functionals::{self, DerivativeConstants, LevelState, MonotoneSample, DEFAULT_DT};
use crate::geometry::{self, ManifoldModel};
use crate::numerics::{fit_line, geomspace, integrate, QuadTolerance};
use crate::potential::{self, PExponent, PotentialOptions, RadialPotential};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RigidityError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

/// `f(p) = 4/(5−p)`, defined on the closed interval `[1, 2]` so that the
/// harmonic endpoint `p = 2` can be evaluated.
pub fn f_threshold(p: f64) -> f64 {
    4.0 / (5.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub p: f64,
    pub alpha: f64,
    pub f_p: f64,
    /// `(9−p)/(3−p)²`
    pub lhs_exponent: f64,
    /// `(1+α)/(α+1−p)`
    pub rhs_exponent: f64,
    pub contradiction_possible: bool,
}

/// Compares the volume growth forced by the capacity chain with the growth
/// allowed by `|B_r| ≲ r^{1+α}`. Requires `α > p − 1`, without which the
/// potential does not exist.
pub fn threshold(p: PExponent, alpha: f64) -> Result<ThresholdReport, RigidityError> {
    let p = p.value();
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(RigidityError::InvalidParameter(format!("alpha = {alpha} must lie in (0, 2]")));
    }
    if alpha <= p - 1.0 {
        return Err(RigidityError::InvalidParameter(format!(
            "alpha = {alpha} must exceed p - 1 = {}",
            p - 1.0
        )));
    }
    let lhs_exponent = (9.0 - p) / ((3.0 - p) * (3.0 - p));
    let rhs_exponent = (1.0 + alpha) / (alpha + 1.0 - p);
    Ok(ThresholdReport {
        p,
        alpha,
        f_p: f_threshold(p),
        lhs_exponent,
        rhs_exponent,
        contradiction_possible: lhs_exponent > rhs_exponent,
    })
}

/// `p = 1 + (1 − margin) · min(1, 4 − 4/α)`, the exponent used for growth `α`.
pub fn select_p(alpha: f64, margin: f64) -> Result<PExponent, RigidityError> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(RigidityError::InvalidParameter(format!(
            "alpha = {alpha} admits no p: need 1 < alpha <= 2"
        )));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(RigidityError::InvalidParameter(format!("margin = {margin} must lie in (0, 1)")));
    }
    let p = 1.0 + (1.0 - margin) * (4.0 - 4.0 / alpha).min(1.0);
    let p = PExponent::new(p).map_err(|e| RigidityError::InvalidParameter(e.to_string()))?;
    let report = threshold(p, alpha)?;
    if !(report.contradiction_possible && alpha > report.f_p) {
        return Err(RigidityError::InvalidParameter(format!(
            "selected p = {} does not satisfy alpha > f(p) = {}",
            p.value(),
            report.f_p
        )));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DichotomyBranch {
    /// The envelope fell below `8πε/(2+2ε)` and decays exponentially.
    Decay,
    /// Still above the constant at the horizon.
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyTrajectory {
    pub p: f64,
    pub eps: f64,
    pub f0: f64,
    pub step: f64,
    pub horizon: f64,
    /// `8πε/(2+2ε)`
    pub dichotomy_constant: f64,
    pub times: Vec<f64>,
    pub envelope: Vec<f64>,
    pub branch: DichotomyBranch,
    /// First time the envelope is at or below the dichotomy constant.
    pub t0: Option<f64>,
    /// Crossing time of `F′ = −(ε/(3−p))(8π − 2F)` in closed form.
    pub closed_form_crossing: f64,
    /// `K` with `envelope ≤ K e^{−2t/(3−p)}` for `t ≥ T0`.
    pub k: Option<f64>,
}

pub const ODE_STEP: f64 = 1e-3;
pub const ODE_HORIZON: f64 = 20.0;

pub fn dichotomy_constant(eps: f64) -> f64 {
    8.0 * PI * eps / (2.0 + 2.0 * eps)
}

/// Integrates the comparison ODE `F′ = max(−2F/(3−p), −(ε/(3−p))(8π − 2F))`
/// with classical RK4. The step that crosses the dichotomy constant is split
/// at the crossing, found by bisection on the sub-step.
pub fn lemma2_dichotomy(
    p: PExponent,
    eps: f64,
    f0: f64,
    step: f64,
    horizon: f64,
) -> Result<DichotomyTrajectory, RigidityError> {
    let pv = p.value();
    if !(eps > 0.0 && eps <= 1.0 / 3.0) {
        return Err(RigidityError::InvalidParameter(format!("eps = {eps} must lie in (0, 1/3]")));
    }
    if !(f0 > 0.0 && f0 < 4.0 * PI) {
        return Err(RigidityError::InvalidParameter(format!(
            "F(0) = {f0} must lie in (0, 4π): the initial Willmore bound fails"
        )));
    }
    if !(step > 0.0 && horizon > 0.0 && step < horizon) {
        return Err(RigidityError::InvalidParameter(format!("need 0 < step = {step} < horizon = {horizon}")));
    }
    let c_star = dichotomy_constant(eps);
    let rate = 2.0 / (3.0 - pv);
    let rhs = |f: f64| (-rate * f).max(-(eps / (3.0 - pv)) * (8.0 * PI - 2.0 * f));
    let rk4 = |f: f64, h: f64| {
        let k1 = rhs(f);
        let k2 = rhs(f + 0.5 * h * k1);
        let k3 = rhs(f + 0.5 * h * k2);
        let k4 = rhs(f + h * k3);
        f + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };

    let closed_form_crossing = if f0 <= c_star {
        0.0
    } else {
        (3.0 - pv) / (2.0 * eps) * ((4.0 * PI - c_star) / (4.0 * PI - f0)).ln()
    };

    let n_steps = (horizon / step).round() as usize;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut envelope = Vec::with_capacity(n_steps + 1);
    let mut t = 0.0;
    let mut f = f0;
    times.push(t);
    envelope.push(f);
    let mut t0 = (f0 <= c_star).then_some(0.0);
    for k in 1..=n_steps {
        let t_next = k as f64 * step;
        let h = t_next - t;
        let mut next = rk4(f, h);
        if t0.is_none() && next <= c_star {
            // bisection for the sub-step landing on c_star
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if rk4(f, mid) > c_star {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-16 * t_next.max(1.0) {
                    break;
                }
            }
            let tau = 0.5 * (lo + hi);
            t0 = Some(t + tau);
            next = rk4(c_star, h - tau);
        }
        t = t_next;
        f = next;
        times.push(t);
        envelope.push(f);
    }

    let k = t0.map(|t0| if t0 == 0.0 { f0 } else { c_star * (rate * t0).exp() });
    Ok(DichotomyTrajectory {
        p: pv,
        eps,
        f0,
        step,
        horizon,
        dichotomy_constant: c_star,
        times,
        envelope,
        branch: if t0.is_some() {
            DichotomyBranch::Decay
        } else {
            DichotomyBranch::Stuck
        },
        t0,
        closed_form_crossing,
        k,
    })
}

impl DichotomyTrajectory {
    pub fn is_non_increasing(&self) -> bool {
        self.envelope.windows(2).all(|w| w[1] <= w[0])
    }

    /// Largest `envelope / (K e^{−2t/(3−p)})` for `t ≥ T0`; at most 1 up to
    /// integration error in the decay branch.
    pub fn bound_ratio(&self) -> Option<f64> {
        let (t0, k) = (self.t0?, self.k?);
        let rate = 2.0 / (3.0 - self.p);
        Some(
            self.times
                .iter()
                .zip(&self.envelope)
                .filter(|(t, _)| **t >= t0)
                .map(|(t, f)| f / (k * (-rate * t).exp()))
                .fold(0.0, f64::max),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma3Report {
    pub levels: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `0 ≤ G ≤ F` at every level, to `1e−9 (1 + |F|)`.
    pub ordering_holds: bool,
    pub max_violation: f64,
    pub f_non_increasing: bool,
    pub g_non_increasing: bool,
    /// Least-squares `k` in `G′ = k (G − F)`; `None` when `G ≡ F`.
    pub fitted_factor: Option<f64>,
    /// `(3−p)²/(p−1)`
    pub stated_factor: f64,
    /// `1/(p−1)`
    pub resolved_factor: f64,
    pub f_last: f64,
    pub g_last: f64,
}

pub const ORDERING_TOL: f64 = 1e-9;

pub fn lemma3_check(pot: &RadialPotential, levels: &[f64]) -> Result<Lemma3Report, RigidityError> {
    let stage = "lemma3";
    let samples = functionals::monotone_profile(pot, levels, DEFAULT_DT).map_err(|e| stage_err(stage, e))?;
    let p = pot.p().value();
    let tol = |f: f64| ORDERING_TOL * (1.0 + f.abs());
    let mut max_violation: f64 = 0.0;
    for s in &samples {
        max_violation = max_violation.max(-s.g).max(s.g - s.f);
    }
    let ordering_holds = samples.iter().all(|s| s.g >= -tol(s.f) && s.g <= s.f + tol(s.f));
    let non_increasing = |get: fn(&MonotoneSample) -> f64, d: fn(&MonotoneSample) -> f64| {
        samples.windows(2).all(|w| get(&w[1]) <= get(&w[0]) + tol(w[0].f))
            && samples.iter().all(|s| d(s) <= tol(s.f))
    };
    let xs: Vec<f64> = samples.iter().map(|s| s.g - s.f).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.dg_fd).collect();
    let den: f64 = xs.iter().map(|x| x * x).sum();
    let fitted_factor = (den > 1e-20).then(|| xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / den);
    let last = samples.last().copied();
    Ok(Lemma3Report {
        levels: levels.to_vec(),
        f: samples.iter().map(|s| s.f).collect(),
        g: samples.iter().map(|s| s.g).collect(),
        ordering_holds,
        max_violation,
        f_non_increasing: non_increasing(|s| s.f, |s| s.df_fd),
        g_non_increasing: non_increasing(|s| s.g, |s| s.dg_fd),
        fitted_factor,
        stated_factor: (3.0 - p) * (3.0 - p) / (p - 1.0),
        resolved_factor: 1.0 / (p - 1.0),
        f_last: last.map_or(f64::NAN, |s| s.f),
        g_last: last.map_or(f64::NAN, |s| s.g),
    })
}

fn stage_err(stage: &'static str, e: impl fmt::Display) -> RigidityError {
    RigidityError::Stage {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub reason: String,
}

impl Verdict {
    pub fn pass(reason: impl Into<String>) -> Self {
        Verdict {
            status: Status::Pass,
            reason: reason.into(),
        }
    }

    pub fn fail(reason: impl Into<String>) -> Self {
        Verdict {
            status: Status::Fail,
            reason: reason.into(),
        }
    }

    pub fn not_applicable(reason: impl Into<String>) -> Self {
        Verdict {
            status: Status::NotApplicable,
            reason: reason.into(),
        }
    }

    pub fn from_check(ok: bool, pass: impl Into<String>, fail: impl Into<String>) -> Self {
        if ok {
            Self::pass(pass)
        } else {
            Self::fail(fail)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub r0: f64,
    /// Pinching constant; `None` uses the measured margin, clamped to
    /// `[1e−3, 1/3]` and labelled hypothetical.
    pub eps: Option<f64>,
    /// The pinching hypothesis is taken to hold when the margin is at least this.
    pub pinch_threshold: f64,
    pub ode_step: f64,
    pub horizon: f64,
    pub levels: usize,
    pub dt: f64,
    pub grid_n: usize,
    pub r_max: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            r0: 1.0,
            eps: None,
            pinch_threshold: 0.01,
            ode_step: ODE_STEP,
            horizon: ODE_HORIZON,
            levels: 64,
            dt: DEFAULT_DT,
            grid_n: 4096,
            r_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "hypothesis")]
pub enum Outcome {
    /// The first hypothesis that does not hold, by label.
    FailedHypothesis(String),
    /// Every hypothesis held and the chain closed without contradiction.
    NoContradiction,
    /// Every hypothesis held and the volume bounds are incompatible.
    Contradiction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageVerdict {
    pub stage: &'static str,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub model: String,
    pub p: f64,
    pub r0: f64,
    pub eps: f64,
    pub eps_hypothetical: bool,
    pub stages: Vec<StageVerdict>,
    pub constants: BTreeMap<String, f64>,
    pub failed_hypotheses: Vec<String>,
    pub outcome: Outcome,
    pub summary: String,
}

impl ScenarioReport {
    pub fn stage(&self, name: &str) -> Option<&Verdict> {
        self.stages.iter().find(|s| s.stage == name).map(|s| &s.verdict)
    }
}

pub const STAGES: [&str; 12] = [
    "noncompact",
    "willmore_gate",
    "pinching",
    "growth",
    "capacity_law",
    "holder_chain",
    "decay_bound",
    "lemma2_decay",
    "lemma3_ordering",
    "coarea_identity",
    "coarea_bound",
    "volume_inequality",
];

const CAPACITY_LAW_TOL: f64 = 1e-6;

struct Scenario {
    stages: Vec<StageVerdict>,
    constants: BTreeMap<String, f64>,
    failed: Vec<String>,
}

impl Scenario {
    fn record(&mut self, stage: &'static str, verdict: Verdict) {
        self.stages.push(StageVerdict { stage, verdict });
    }

    fn constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }
}

/// Runs the chain stage by stage. Hypothesis stages (`noncompact`,
/// `willmore_gate`, `pinching`, `growth`) name what fails; the others record
/// whether each link is numerically observed on this model.
pub fn run_contradiction_scenario(
    model: &ManifoldModel,
    p: PExponent,
    config: &ScenarioConfig,
) -> Result<ScenarioReport, RigidityError> {
    let pv = p.value();
    let r0 = config.r0;
    let mut sc = Scenario {
        stages: Vec::new(),
        constants: BTreeMap::new(),
        failed: Vec::new(),
    };

    let noncompact = !model.compact && model.r_max.is_infinite();
    sc.record(
        "noncompact",
        Verdict::from_check(
            noncompact,
            "complete noncompact end",
            if model.compact {
                "model closes up at finite radius"
            } else {
                "model is truncated at finite radius"
            },
        ),
    );
    if !noncompact {
        sc.failed.push("noncompact".into());
    }

    // (i) the initial Willmore bound on the starting sphere
    let w0 = functionals::willmore(model, r0).map_err(|e| stage_err("willmore_gate", e))?;
    sc.constant("willmore_r0", w0);
    let gate = w0 < 16.0 * PI * (1.0 - 1e-12);
    sc.record(
        "willmore_gate",
        Verdict::from_check(
            gate,
            format!("∫H² = {w0:.6} < 16π at r0"),
            format!("∫H² = {w0:.6} is not below 16π, so F(0) < 4π is unobtainable"),
        ),
    );
    if !gate {
        sc.failed.push("willmore".into());
    }

    // (ii) pinching
    let r_hi = config
        .r_max
        .unwrap_or(potential::DEFAULT_RANGE_FACTOR * r0)
        .min(model.sampling_r_max(f64::INFINITY));
    let r_lo = if model.r_min > 0.0 { model.r_min } else { 1e-2 * r0.min(1.0) };
    let grid = geomspace(r_lo, r_hi, 512);
    let margin = geometry::pinching_margin(model, &grid).map_err(|e| stage_err("pinching", e))?;
    sc.constant("pinching_margin", margin.epsilon);
    let pinched = margin.nonneg_ricci && margin.epsilon >= config.pinch_threshold;
    sc.record(
        "pinching",
        Verdict::from_check(
            pinched,
            format!("Ric >= eps R g with eps = {:.4}", margin.epsilon),
            if margin.nonneg_ricci {
                format!(
                    "hypothesis Ric >= eps R g fails: margin {:.3e} at r = {:.4e} is below {}",
                    margin.epsilon, margin.worst_radius, config.pinch_threshold
                )
            } else {
                format!("Ricci curvature is negative (min eigenvalue {:.3e})", margin.min_eigenvalue)
            },
        ),
    );
    if !pinched {
        sc.failed.push("pinching".into());
    }
    let (eps, eps_hypothetical) = match config.eps {
        Some(e) => (e, false),
        None => (margin.epsilon.clamp(1e-3, 1.0 / 3.0), !pinched),
    };
    sc.constant("eps", eps);

    let finish = |sc: Scenario, summary: String| -> ScenarioReport {
        let outcome = match sc.failed.first() {
            Some(f) => Outcome::FailedHypothesis(f.clone()),
            None => Outcome::NoContradiction,
        };
        ScenarioReport {
            model: model.name.clone(),
            p: pv,
            r0,
            eps,
            eps_hypothetical,
            stages: sc.stages,
            constants: sc.constants,
            failed_hypotheses: sc.failed,
            outcome,
            summary,
        }
    };

    if !noncompact {
        sc.record("growth", Verdict::not_applicable("no noncompact end"));
        for stage in &STAGES[4..] {
            sc.record(stage, Verdict::not_applicable("no exterior potential on a model without a noncompact end"));
        }
        let summary = format!("{}: hypothesis noncompact fails; the exterior problem is not posed", model.name);
        return Ok(finish(sc, summary));
    }

    // growth exponent over the outer two decades
    let growth = geometry::growth_exponent(model, (r_hi / 100.0).max(r0), r_hi).map_err(|e| stage_err("growth", e))?;
    let alpha = growth.alpha;
    sc.constant("alpha_hat", alpha);
    let thr = threshold(p, alpha.min(2.0)).ok();
    let superquadratic = alpha > 1.0 && alpha <= 2.0 + 1e-3;
    let grows = superquadratic && thr.is_some_and(|t| t.contradiction_possible);
    if let Some(t) = thr {
        sc.constant("threshold_f_p", t.f_p);
        sc.constant("lambda", t.lhs_exponent);
    }
    sc.record(
        "growth",
        Verdict::from_check(
            grows,
            format!("|B_r| ~ r^(1+alpha), alpha = {alpha:.4} > f(p) = {:.4}", f_threshold(pv)),
            format!("alpha = {alpha:.4} does not exceed max(1, f(p) = {:.4})", f_threshold(pv)),
        ),
    );
    if !grows {
        sc.failed.push("growth".into());
    }

    let options = PotentialOptions {
        grid_n: config.grid_n,
        r_max: config.r_max,
    };
    let pot = potential::solve_radial_with(model, p, r0, options).map_err(|e| stage_err("capacity_law", e))?;
    let t_max = pot.t_max();
    let t_hi = (0.95 * t_max).min(10.0);
    let levels: Vec<f64> = (0..config.levels)
        .map(|k| t_hi * k as f64 / (config.levels.max(2) - 1) as f64)
        .collect();

    // (iii) capacity law
    let cap0 = potential::capacity(&pot, 0.0).map_err(|e| stage_err("capacity_law", e))?;
    let mut cap_dev: f64 = 0.0;
    for &t in &levels {
        let c = potential::capacity(&pot, t).map_err(|e| stage_err("capacity_law", e))?;
        cap_dev = cap_dev.max((c / cap0 / t.exp() - 1.0).abs());
    }
    sc.constant("cap0", cap0);
    sc.constant("capacity_law_max_dev", cap_dev);
    sc.record(
        "capacity_law",
        Verdict::from_check(
            cap_dev < CAPACITY_LAW_TOL,
            format!("cap(t) = e^t cap(0) to {cap_dev:.2e} on [0, {t_hi:.3}]"),
            format!("cap(t)/cap(0) deviates from e^t by {cap_dev:.2e}"),
        ),
    );

    // (iv) Hölder chain
    let mut holder_worst: f64 = f64::INFINITY;
    for &t in &levels {
        let h = functionals::holder_chain(&pot, t).map_err(|e| stage_err("holder_chain", e))?;
        holder_worst = holder_worst.min(h.equality_gap / h.mid);
    }
    sc.constant("holder_min_rel_gap", holder_worst);
    sc.record(
        "holder_chain",
        Verdict::from_check(
            holder_worst >= -1e-8,
            format!("e^t cap(0) = cap(t) <= Hölder bound (min relative gap {holder_worst:.2e})"),
            format!("Hölder bound undercuts the capacity by {:.2e}", -holder_worst),
        ),
    );

    // decay of u against the fitted growth
    match potential::decay_check(&pot, alpha) {
        Ok(d) => {
            sc.constant("K_upper_bound", d.constant);
            sc.record(
                "decay_bound",
                Verdict::from_check(
                    d.pass,
                    format!("u <= K r^-{:.4} with K = {:.6}", d.exponent, d.constant),
                    format!("scaled potential still drifts (log slope {:.3e})", d.log_slope),
                ),
            );
        }
        Err(e) => sc.record("decay_bound", Verdict::fail(e.to_string())),
    }

    let consts = DerivativeConstants::resolved(pv);
    sc.constant("c_F", consts.c_f);
    sc.constant("c_G", consts.c_g);

    // comparison envelope against the actual F
    let state0 = LevelState::at_level(&pot, 0.0).map_err(|e| stage_err("lemma2_decay", e))?;
    let f0 = state0.f();
    sc.constant("F0", f0);
    let rate = 2.0 / (3.0 - pv);
    let f_rate = log_slope(&pot, &levels, |l| l.f()).map_err(|e| stage_err("lemma2_decay", e))?;
    sc.constant("F_log_slope", f_rate);
    let mut k_lemma2 = None;
    let mut t0_lemma2 = 0.0;
    if f0 < 4.0 * PI * (1.0 - 1e-12) && f0 > 0.0 {
        let traj = lemma2_dichotomy(p, eps, f0, config.ode_step, config.horizon).map_err(|e| stage_err("lemma2_decay", e))?;
        sc.constant("dichotomy_constant", traj.dichotomy_constant);
        sc.constant("lemma2_crossing", traj.closed_form_crossing);
        match (traj.t0, traj.k) {
            (Some(t0), Some(k)) => {
                sc.constant("T0", t0);
                sc.constant("K_lemma2", k);
                k_lemma2 = Some(k);
                t0_lemma2 = t0;
                let mut worst: f64 = 0.0;
                let mut last_ratio = f64::NAN;
                for &t in levels.iter().filter(|t| **t >= t0) {
                    let f = LevelState::at_level(&pot, t).map_err(|e| stage_err("lemma2_decay", e))?.f();
                    last_ratio = f / (k * (-rate * t).exp());
                    worst = worst.max(last_ratio);
                }
                sc.constant("lemma2_max_ratio", worst);
                sc.record(
                    "lemma2_decay",
                    Verdict::from_check(
                        worst <= 1.0 + 1e-9,
                        format!("F(t) <= K e^(-{rate:.4} t) with K = {k:.6} from T0 = {t0:.4}"),
                        format!(
                            "F does not decay like e^(-{rate:.4} t): F / (K e^(-{rate:.4} t)) reaches {worst:.3e} (last {last_ratio:.3e})"
                        ),
                    ),
                );
            }
            _ => sc.record(
                "lemma2_decay",
                Verdict::fail(format!(
                    "comparison envelope still above 8πε/(2+2ε) at the horizon {} (crossing at t = {:.4}); F decays at rate {:.4}, not {rate:.4}",
                    config.horizon, traj.closed_form_crossing, -f_rate
                )),
            ),
        }
    } else {
        sc.record(
            "lemma2_decay",
            Verdict::not_applicable(format!("F(0) = {f0:.6} is not below 4π")),
        );
    }

    // ordering F >= G and monotonicity
    let inner: Vec<f64> = levels.iter().copied().filter(|&t| t >= 2.0 * config.dt && t + config.dt <= t_max).collect();
    let l3 = lemma3_check(&pot, &inner)?;
    if let Some(k) = l3.fitted_factor {
        sc.constant("lemma3_factor", k);
    }
    sc.record(
        "lemma3_ordering",
        Verdict::from_check(
            l3.ordering_holds && l3.f_non_increasing && l3.g_non_increasing,
            "0 <= G <= F with both non-increasing",
            format!(
                "ordering or monotonicity violated (max violation {:.3e})",
                l3.max_violation
            ),
        ),
    );

    // (v) coarea: d/dt Vol{w <= t} = ∫|∇w|^-1
    let vol_tol = QuadTolerance {
        abs: 0.0,
        rel: 1e-12,
        ..QuadTolerance::default()
    };
    let shell = |a: f64, b: f64| integrate(|s| 4.0 * PI * model.warp.jet(s).h.powi(2), a, b, vol_tol);
    let mut coarea_dev: f64 = 0.0;
    for &t in &inner {
        let h = config.dt;
        let ra = pot.radius_of_level(t - h).map_err(|e| stage_err("coarea_identity", e))?;
        let rb = pot.radius_of_level(t + h).map_err(|e| stage_err("coarea_identity", e))?;
        let rm = pot.radius_of_level(t).map_err(|e| stage_err("coarea_identity", e))?;
        let ra2 = pot.radius_of_level(t - 0.5 * h).map_err(|e| stage_err("coarea_identity", e))?;
        let rb2 = pot.radius_of_level(t + 0.5 * h).map_err(|e| stage_err("coarea_identity", e))?;
        let coarse = shell(ra, rb).map_err(|e| stage_err("coarea_identity", e))? / (2.0 * h);
        let fine = shell(ra2, rb2).map_err(|e| stage_err("coarea_identity", e))? / h;
        let fd = (4.0 * fine - coarse) / 3.0;
        let l = LevelState::at_radius(&pot, rm).map_err(|e| stage_err("coarea_identity", e))?;
        let exact = l.geom.area / l.grad_w();
        coarea_dev = coarea_dev.max((fd / exact - 1.0).abs());
    }
    sc.constant("coarea_max_dev", coarea_dev);
    sc.record(
        "coarea_identity",
        Verdict::from_check(
            coarea_dev < 1e-6,
            format!("d/dt Vol{{w <= t}} = ∫|∇w|^-1 to {coarea_dev:.2e}"),
            format!("coarea identity off by {coarea_dev:.2e}"),
        ),
    );

    // coarea lower bound driven by the comparison decay of G
    let lambda = (9.0 - pv) / ((3.0 - pv) * (3.0 - pv));
    let observed = log_slope(&pot, &levels, |l| l.geom.area / l.grad_w()).map_err(|e| stage_err("coarea_bound", e))?;
    sc.constant("coarea_log_slope", observed);
    let mut predicted = None;
    match k_lemma2 {
        Some(k) => {
            let c = (4.0 * PI * (3.0 - pv).powf(pv - 1.0) * cap0).powf(3.0 / (3.0 - pv))
                / ((3.0 - pv).powi(2) * k).powf(pv / (3.0 - pv));
            sc.constant("coarea_envelope_C", c);
            predicted = Some(c);
            let mut worst: f64 = f64::INFINITY;
            for &t in levels.iter().filter(|t| **t >= t0_lemma2) {
                let l = LevelState::at_level(&pot, t).map_err(|e| stage_err("coarea_bound", e))?;
                worst = worst.min((l.geom.area / l.grad_w()) / (c * (lambda * t).exp()));
            }
            sc.constant("coarea_min_ratio", worst);
            sc.record(
                "coarea_bound",
                Verdict::from_check(
                    worst >= 1.0 - 1e-9,
                    format!("∫|∇w|^-1 >= C e^({lambda:.4} t)"),
                    format!(
                        "∫|∇w|^-1 grows at rate {observed:.4}, below the predicted {lambda:.4} (min ratio {worst:.3e})"
                    ),
                ),
            );
        }
        None => sc.record(
            "coarea_bound",
            Verdict::not_applicable(format!(
                "no decay constant for G; observed growth rate {observed:.4} versus {lambda:.4}"
            )),
        ),
    }

    // (vi) both sides of the volume inequality at the largest level
    let t1 = t_hi;
    let r_t1 = pot.radius_of_level(t1).map_err(|e| stage_err("volume_inequality", e))?;
    let vol_r0 = geometry::ball_volume(model, r0).map_err(|e| stage_err("volume_inequality", e))?;
    let vol_t1 = vol_r0 + shell(r0, r_t1).map_err(|e| stage_err("volume_inequality", e))?;
    let k_vol = growth
        .radii
        .iter()
        .zip(&growth.volumes)
        .map(|(r, v)| v / r.powf(1.0 + alpha))
        .fold(0.0, f64::max);
    let upper = k_vol * r_t1.powf(1.0 + alpha);
    sc.constant("R_T1", r_t1);
    sc.constant("T1", t1);
    sc.constant("vol_actual", vol_t1);
    sc.constant("K_vol", k_vol);
    sc.constant("vol_upper", upper);
    let mut contradiction = false;
    match predicted {
        Some(c) => {
            let lower = vol_r0 + c * ((lambda * t1).exp() - 1.0) / lambda;
            sc.constant("vol_lower_predicted", lower);
            contradiction = lower > upper;
            sc.record(
                "volume_inequality",
                Verdict::from_check(
                    vol_t1 >= lower,
                    format!("Vol(B_R) = {vol_t1:.6e} >= predicted lower bound {lower:.6e}"),
                    format!(
                        "predicted lower bound {lower:.6e} exceeds the actual Vol(B_R) = {vol_t1:.6e}; the chain's premises fail here"
                    ),
                ),
            );
        }
        None => sc.record(
            "volume_inequality",
            Verdict::not_applicable(format!(
                "no predicted lower bound; Vol(B_R) = {vol_t1:.6e} <= K_vol R^(1+alpha) = {upper:.6e}"
            )),
        ),
    }

    let hypotheses_hold = sc.failed.is_empty();
    let summary = match sc.failed.first().map(String::as_str) {
        Some("willmore") => format!(
            "{}: the initial Willmore bound ∫H² < 16π is unobtainable, so no contradiction materializes",
            model.name
        ),
        Some("pinching") => format!(
            "{}: hypothesis Ric >= eps R g fails (margin {:.3e}); F decays at rate {:.4} instead of {:.4}",
            model.name, margin.epsilon, -f_rate, rate
        ),
        Some(other) => format!("{}: hypothesis {other} fails", model.name),
        None if contradiction => format!("{}: all hypotheses hold and the volume bounds conflict", model.name),
        None => format!("{}: all hypotheses hold; no contradiction at T1 = {t1:.3}", model.name),
    };
    let mut report = finish(sc, summary);
    if hypotheses_hold && contradiction {
        report.outcome = Outcome::Contradiction;
    }
    Ok(report)
}

// Least-squares slope of ln q(t) over the upper half of `levels`.
fn log_slope(
    pot: &RadialPotential,
    levels: &[f64],
    q: impl Fn(&LevelState) -> f64,
) -> Result<f64, functionals::FunctionalError> {
    let half = &levels[levels.len() / 2..];
    let mut ys = Vec::with_capacity(half.len());
    for &t in half {
        ys.push(q(&LevelState::at_level(pot, t)?).ln());
    }
    Ok(fit_line(half, &ys).map_or(0.0, |f| f.slope))
}
