//! Radial p-harmonic capacitary potential of `Ω = {r ≤ r0}`.
//!
//! For a radial `u`, `Δ_p u = 0` reduces to `(h² |u′|^{p−2} u′)′ = 0`, so
//! `|u′| ∝ h^{−2/(p−1)}` and the exterior solution with `u(r0) = 1`,
//! `u → 0` at infinity is
//!
//! ```text
//! u(r) = I(r) / I(r0),    I(r) = ∫_r^∞ h(s)^{−2/(p−1)} ds.
//! ```
//!
//! `I` is tabulated on a geometric grid and the part beyond the grid is
//! closed with a fitted power law. Between nodes the integral is completed
//! exactly from the neighbouring node, so every query is accurate to
//! quadrature precision.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, GeometryError, ManifoldModel};
use crate::numerics::{self, fit_line, geomspace, NeumaierSum, QuadError, QuadTolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("p = {0} must lie in the open interval (1, 2)")]
    InvalidExponent(f64),
    #[error("initial radius r0 = {r0} must satisfy r_min <= r0 < r_max ({r_min}, {r_max})")]
    InitialRadius { r0: f64, r_min: f64, r_max: f64 },
    #[error("model {0} is compact; the exterior problem needs a noncompact end")]
    CompactModel(String),
    #[error(
        "divergent tail: fitted growth alpha = {alpha:.4} but the potential needs alpha > p - 1 = {threshold:.4}"
    )]
    DivergentTail { alpha: f64, threshold: f64 },
    #[error("radius {r} outside the solved range [{r0}, {r_max}]")]
    RadiusOutOfRange { r: f64, r0: f64, r_max: f64 },
    #[error("level t = {t} outside the solved range [0, {t_max}]")]
    LevelOutOfRange { t: f64, t_max: f64 },
    #[error("alpha = {alpha} is inconsistent with the fitted growth exponent {fitted:.4}")]
    InconsistentAlpha { alpha: f64, fitted: f64 },
    #[error("grid too coarse: {0}")]
    InsufficientGrid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Exponent of the p-Laplacian, restricted to `1 < p < 2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct PExponent(f64);

impl PExponent {
    pub fn new(p: f64) -> Result<Self, PotentialError> {
        if p.is_finite() && p > 1.0 && p < 2.0 {
            Ok(PExponent(p))
        } else {
            Err(PotentialError::InvalidExponent(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `2/(p−1)`, the decay exponent of `|u′|` in terms of `h`.
    pub fn flux_exponent(self) -> f64 {
        2.0 / (self.0 - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialOptions {
    pub grid_n: usize,
    /// Outer radius of the grid; defaults to `1e4 · r0`.
    pub r_max: Option<f64>,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        PotentialOptions {
            grid_n: 4096,
            r_max: None,
        }
    }
}

pub const DEFAULT_RANGE_FACTOR: f64 = 1e4;

/// Values of the potential and its Moser transform `w = −(p−1) log u` at a
/// radius. The level parameter is `t = w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialSample {
    pub r: f64,
    pub u: f64,
    pub u_prime: f64,
    pub w: f64,
    pub w_prime: f64,
}

impl PotentialSample {
    pub fn t(&self) -> f64 {
        self.w
    }
}

#[derive(Debug, Clone)]
pub struct RadialPotential {
    model: ManifoldModel,
    p: PExponent,
    r0: f64,
    r_max: f64,
    radii: Vec<f64>,
    // I(r_i) = ∫_{r_i}^∞ h^{-q}
    remaining: Vec<f64>,
    // J(r_i) = ∫_{r0}^{r_i} h^{-q}
    partial: Vec<f64>,
    samples: Vec<PotentialSample>,
    tail: f64,
    tail_exponent: f64,
}

const SEGMENT_TOL: QuadTolerance = QuadTolerance {
    abs: 0.0,
    rel: 1e-13,
    max_panels: 64,
};

pub fn solve_radial(model: &ManifoldModel, p: PExponent, r0: f64) -> Result<RadialPotential, PotentialError> {
    solve_radial_with(model, p, r0, PotentialOptions::default())
}

pub fn solve_radial_with(
    model: &ManifoldModel,
    p: PExponent,
    r0: f64,
    options: PotentialOptions,
) -> Result<RadialPotential, PotentialError> {
    if model.compact {
        return Err(PotentialError::CompactModel(model.name.clone()));
    }
    let requested = options.r_max.unwrap_or(DEFAULT_RANGE_FACTOR * r0);
    let r_max = requested.min(model.r_max);
    if !(r0.is_finite() && r0 > 0.0 && r0 >= model.r_min && r0 < r_max) {
        return Err(PotentialError::InitialRadius {
            r0,
            r_min: model.r_min,
            r_max,
        });
    }
    if options.grid_n < 16 {
        return Err(PotentialError::InsufficientGrid(format!(
            "{} nodes (minimum 16)",
            options.grid_n
        )));
    }
    if r_max < 10.0 * r0 {
        return Err(PotentialError::InsufficientGrid(format!(
            "r_max = {r_max} is less than a decade beyond r0 = {r0}"
        )));
    }
    model.check_radius(r0)?;
    model.check_radius(r_max)?;

    let q = p.flux_exponent();
    let radii = geomspace(r0, r_max, options.grid_n);
    let density = |s: f64| model.warp.jet(s).h.powf(-q);

    // Tail: h ≈ c r^β on the last decade, anchored at h(r_max).
    let tail_radii = geomspace(r_max / 10.0, r_max, 16);
    let mut log_h = Vec::with_capacity(tail_radii.len());
    for &r in &tail_radii {
        log_h.push(model.check_radius(r)?.h.ln());
    }
    let log_r: Vec<f64> = tail_radii.iter().map(|r| r.ln()).collect();
    let beta = fit_line(&log_r, &log_h)
        .ok_or_else(|| PotentialError::InsufficientGrid("degenerate tail fit".into()))?
        .slope;
    let tail_exponent = q * beta - 1.0;
    if !(tail_exponent > 1e-3) {
        return Err(PotentialError::DivergentTail {
            alpha: 2.0 * beta,
            threshold: p.value() - 1.0,
        });
    }
    let tail = density(r_max) * r_max / tail_exponent;

    let n = radii.len();
    let mut segments = Vec::with_capacity(n - 1);
    for w in radii.windows(2) {
        segments.push(numerics::integrate(density, w[0], w[1], SEGMENT_TOL)?);
    }

    let mut remaining = vec![0.0; n];
    let mut acc = NeumaierSum::default();
    acc.add(tail);
    remaining[n - 1] = acc.value();
    for i in (0..n - 1).rev() {
        acc.add(segments[i]);
        remaining[i] = acc.value();
    }
    let mut partial = vec![0.0; n];
    let mut acc = NeumaierSum::default();
    for i in 1..n {
        acc.add(segments[i - 1]);
        partial[i] = acc.value();
    }

    let mut pot = RadialPotential {
        model: model.clone(),
        p,
        r0,
        r_max,
        radii,
        remaining,
        partial,
        samples: Vec::new(),
        tail,
        tail_exponent,
    };
    pot.samples = (0..n)
        .map(|i| pot.sample_from(pot.radii[i], pot.remaining[i], pot.partial[i]))
        .collect();
    Ok(pot)
}

impl RadialPotential {
    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn p(&self) -> PExponent {
        self.p
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `I(r0) = ∫_{r0}^∞ h^{−2/(p−1)}`.
    pub fn normalizer(&self) -> f64 {
        self.remaining[0]
    }

    pub fn tail_integral(&self) -> f64 {
        self.tail
    }

    /// Exponent `κ` of the fitted tail, `I(r) ≈ C r^{−κ}` beyond the grid.
    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    pub fn samples(&self) -> &[PotentialSample] {
        &self.samples
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Largest level covered by the grid.
    pub fn t_max(&self) -> f64 {
        self.samples.last().unwrap().w
    }

    fn sample_from(&self, r: f64, remaining: f64, partial: f64) -> PotentialSample {
        let p = self.p.value();
        let i0 = self.normalizer();
        let density = self.model.warp.jet(r).h.powf(-self.p.flux_exponent());
        let u = remaining / i0;
        // log u = log(1 − J/I0) is better conditioned near r0
        let log_u = if partial < 0.5 * i0 {
            (-partial / i0).ln_1p()
        } else {
            u.ln()
        };
        PotentialSample {
            r,
            u,
            u_prime: -density / i0,
            w: -(p - 1.0) * log_u,
            w_prime: (p - 1.0) * density / remaining,
        }
    }

    fn segment_of(&self, r: f64) -> usize {
        let n = self.radii.len();
        match self.radii.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(n - 2),
            Err(i) => (i.max(1) - 1).min(n - 2),
        }
    }

    /// Potential at an arbitrary radius of the solved range.
    pub fn potential_at(&self, r: f64) -> Result<PotentialSample, PotentialError> {
        if !(r >= self.r0 && r <= self.r_max) {
            return Err(PotentialError::RadiusOutOfRange {
                r,
                r0: self.r0,
                r_max: self.r_max,
            });
        }
        let i = self.segment_of(r);
        if r == self.radii[i] {
            return Ok(self.samples[i]);
        }
        if r == self.radii[i + 1] {
            return Ok(self.samples[i + 1]);
        }
        let q = self.p.flux_exponent();
        let density = |s: f64| self.model.warp.jet(s).h.powf(-q);
        let lower = numerics::integrate(density, self.radii[i], r, SEGMENT_TOL)?;
        let upper = numerics::integrate(density, r, self.radii[i + 1], SEGMENT_TOL)?;
        Ok(self.sample_from(r, self.remaining[i + 1] + upper, self.partial[i] + lower))
    }

    /// The radius of the level set `{w = t}` (which is also `R_t`, the
    /// largest distance from the pole reached by `{w ≤ t}`).
    pub fn radius_of_level(&self, t: f64) -> Result<f64, PotentialError> {
        let t_max = self.t_max();
        if !(t >= 0.0 && t <= t_max) {
            return Err(PotentialError::LevelOutOfRange { t, t_max });
        }
        let n = self.samples.len();
        let i = match self.samples.binary_search_by(|s| s.w.total_cmp(&t)) {
            Ok(i) => return Ok(self.radii[i]),
            Err(i) => (i.max(1) - 1).min(n - 2),
        };
        let (mut lo, mut hi) = (self.radii[i], self.radii[i + 1]);
        let (w_lo, w_hi) = (self.samples[i].w, self.samples[i + 1].w);
        let frac = (t - w_lo) / (w_hi - w_lo);
        let mut r = lo * (hi / lo).powf(frac);
        for _ in 0..60 {
            let s = self.potential_at(r)?;
            let residual = s.w - t;
            if residual > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let step = residual / s.w_prime;
            let mut next = r - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - r).abs() <= 4.0 * f64::EPSILON * r || hi - lo <= 4.0 * f64::EPSILON * r {
                return Ok(next);
            }
            r = next;
        }
        Ok(r)
    }

    /// Normalized p-capacity of `{r ≤ radius}`, evaluated on its boundary:
    /// `(1/4π) ∫ (|∇w|/(3−p))^{p−1}`.
    pub fn capacity_at_radius(&self, r: f64) -> Result<f64, PotentialError> {
        let s = self.potential_at(r)?;
        let p = self.p.value();
        let area = 4.0 * PI * self.model.warp.jet(r).h.powi(2);
        Ok(area / (4.0 * PI) * (s.w_prime / (3.0 - p)).powf(p - 1.0))
    }

    /// `h² |u′|^{p−1}`, constant in `r` for a radial p-harmonic function.
    pub fn first_integral(&self, r: f64) -> Result<f64, PotentialError> {
        let s = self.potential_at(r)?;
        let h = self.model.warp.jet(r).h;
        Ok(h * h * s.u_prime.abs().powf(self.p.value() - 1.0))
    }
}

/// Normalized capacity of the sublevel set `Ω_t = {w ≤ t}`.
pub fn capacity(pot: &RadialPotential, t: f64) -> Result<f64, PotentialError> {
    let r = pot.radius_of_level(t)?;
    pot.capacity_at_radius(r)
}

pub fn potential_at(pot: &RadialPotential, r: f64) -> Result<PotentialSample, PotentialError> {
    pot.potential_at(r)
}

pub fn radius_of_level(pot: &RadialPotential, t: f64) -> Result<f64, PotentialError> {
    pot.radius_of_level(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCheck {
    /// `sup u(r) r^{(α+1−p)/(p−1)}` over the outer half of the grid.
    pub constant: f64,
    pub exponent: f64,
    /// Log-log slope of `u r^{exponent}` over the last decade.
    pub log_slope: f64,
    pub pass: bool,
}

pub const DECAY_SLOPE_TOL: f64 = 0.02;

/// Checks the power decay `u ≤ K r^{−(α+1−p)/(p−1)}`.
pub fn decay_check(pot: &RadialPotential, alpha: f64) -> Result<DecayCheck, PotentialError> {
    let r_hi = pot.r_max;
    let r_lo = (r_hi / 100.0).max(pot.r0);
    if r_hi / r_lo < 10.0 {
        return Err(PotentialError::InsufficientGrid("less than a decade of grid".into()));
    }
    let fitted = geometry::growth_exponent(&pot.model, r_lo, r_hi)?.alpha;
    if (fitted - alpha).abs() > 0.05 {
        return Err(PotentialError::InconsistentAlpha { alpha, fitted });
    }
    let p = pot.p.value();
    let exponent = (alpha + 1.0 - p) / (p - 1.0);
    let n = pot.samples.len();
    let scaled = |s: &PotentialSample| s.u * s.r.powf(exponent);
    let constant = pot.samples[n / 2..].iter().map(scaled).fold(0.0, f64::max);

    let last_decade: Vec<&PotentialSample> = pot.samples.iter().filter(|s| s.r >= r_hi / 10.0).collect();
    let xs: Vec<f64> = last_decade.iter().map(|s| s.r.ln()).collect();
    let ys: Vec<f64> = last_decade.iter().map(|s| scaled(s).ln()).collect();
    let log_slope = fit_line(&xs, &ys)
        .ok_or_else(|| PotentialError::InsufficientGrid("no nodes in the last decade".into()))?
        .slope;
    Ok(DecayCheck {
        constant,
        exponent,
        log_slope,
        pass: constant.is_finite() && log_slope <= DECAY_SLOPE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> PExponent {
        PExponent::new(v).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn exponent_range() {
        assert!(PExponent::new(2.0).is_err());
        assert!(PExponent::new(1.0).is_err());
        assert!(PExponent::new(f64::NAN).is_err());
        assert_eq!(p(1.5).flux_exponent(), 4.0);
    }

    #[test]
    fn flat_closed_form() {
        let pot = solve_radial(&ManifoldModel::flat(), p(1.5), 1.0).unwrap();
        let s = pot.potential_at(2.0).unwrap();
        assert!(rel(s.u, 0.125) < 1e-12);
        assert!(rel(s.w, 1.5 * 2f64.ln()) < 1e-12);
        assert!(rel(s.w, 1.03972) < 1e-5);
        let s = pot.potential_at(10.0).unwrap();
        assert!(rel(s.u, 1e-3) < 1e-12);
        let e = std::f64::consts::E;
        let s = pot.potential_at(e).unwrap();
        assert!(rel(s.w, 1.5) < 1e-12);
        assert!(rel(s.w_prime, 1.5 / e) < 1e-12);

        let pot2 = solve_radial(&ManifoldModel::flat(), p(1.5), 2.0).unwrap();
        assert!(rel(pot2.potential_at(4.0).unwrap().u, 0.125) < 1e-12);
    }

    #[test]
    fn cone_matches_flat_profile() {
        let cone = solve_radial(&ManifoldModel::cone(0.8).unwrap(), p(1.5), 1.0).unwrap();
        for &r in &[1.5, 3.0, 70.0] {
            assert!(rel(cone.potential_at(r).unwrap().u, r.powi(-3)) < 1e-12);
        }
    }

    #[test]
    fn boundary_values() {
        for model in geometry::library() {
            let pot = solve_radial(&model, p(1.3), 1.0).unwrap();
            let s = pot.potential_at(1.0).unwrap();
            assert_eq!((s.u, s.w, s.t()), (1.0, 0.0, 0.0));
            assert_eq!(pot.radius_of_level(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn level_inversion() {
        let pot = solve_radial(&ManifoldModel::flat(), p(1.5), 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!(rel(pot.radius_of_level(1.5).unwrap(), e) < 1e-13);
        assert!(rel(pot.radius_of_level(3.0).unwrap(), e * e) < 1e-13);
        assert!(matches!(
            pot.radius_of_level(pot.t_max() + 1.0),
            Err(PotentialError::LevelOutOfRange { .. })
        ));
        assert!(pot.radius_of_level(-0.1).is_err());
    }

    #[test]
    fn capacity_examples() {
        let pot = solve_radial(&ManifoldModel::flat(), p(1.5), 1.0).unwrap();
        assert!((capacity(&pot, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(rel(capacity(&pot, 1.5).unwrap(), 1.5f64.exp()) < 1e-10);

        let cone = solve_radial(&ManifoldModel::cone(0.8).unwrap(), p(1.5), 1.0).unwrap();
        let w1 = cone.potential_at(1.0).unwrap().w_prime;
        let c0 = capacity(&cone, 0.0).unwrap();
        assert!(rel(c0, 0.64 * (w1 / 1.5).sqrt()) < 1e-14);
        assert!(rel(capacity(&cone, 2.0).unwrap() / c0, 2f64.exp()) < 1e-10);
    }

    #[test]
    fn potential_queries_reject_out_of_range() {
        let pot = solve_radial(&ManifoldModel::flat(), p(1.5), 1.0).unwrap();
        assert!(pot.potential_at(0.5).is_err());
        assert!(pot.potential_at(2e4).is_err());
    }

    #[test]
    fn solver_errors() {
        let cap = ManifoldModel::positive_cap(1.0).unwrap();
        assert!(matches!(solve_radial(&cap, p(1.5), 0.5), Err(PotentialError::CompactModel(_))));
        // h ~ r^{0.2}: alpha = 0.4 < p - 1 = 0.8
        let slow = ManifoldModel::power_warp(0.4).unwrap();
        let err = solve_radial(&slow, p(1.8), 1.0).unwrap_err();
        assert!(matches!(err, PotentialError::DivergentTail { .. }));
        assert!(err.to_string().contains("alpha > p - 1"));
        let cone = ManifoldModel::cone(0.8).unwrap();
        assert!(matches!(
            solve_radial(&cone, p(1.5), 0.001),
            Err(PotentialError::InitialRadius { .. })
        ));
    }

    #[test]
    fn decay_examples() {
        let flat = solve_radial(&ManifoldModel::flat(), p(1.5), 1.0).unwrap();
        let d = decay_check(&flat, 2.0).unwrap();
        assert!((d.constant - 1.0).abs() < 1e-10 && d.pass);
        assert_eq!(d.exponent, 3.0);

        let cone = solve_radial(&ManifoldModel::cone(0.8).unwrap(), p(1.5), 1.0).unwrap();
        let d = decay_check(&cone, 2.0).unwrap();
        assert!((d.constant - 1.0).abs() < 1e-10 && d.pass);

        let pw = solve_radial(&ManifoldModel::power_warp(1.5).unwrap(), p(1.5), 1.0).unwrap();
        let d = decay_check(&pw, 1.5).unwrap();
        assert_eq!(d.exponent, 2.0);
        assert!(d.pass, "{d:?}");

        assert!(matches!(decay_check(&pw, 2.0), Err(PotentialError::InconsistentAlpha { .. })));
    }
}
