//! Rotationally symmetric 3-manifolds `g = dr² + h(r)² g_{S²}`.
//!
//! Everything here is a closed-form function of the warp jet `(h, h′, h″)`:
//! curvature eigenvalues, the geometry of the coordinate spheres `{r = c}`
//! (which are the level sets of every radial function), and ball volumes.

mod spline;

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{self, fit_line, geomspace, QuadError, QuadTolerance};

pub use spline::CubicSpline;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("radius {r} outside the model domain [{r_min}, {r_max}]")]
    RadiusOutOfDomain { r: f64, r_min: f64, r_max: f64 },
    #[error("warp function is not finite at r = {0}")]
    NonFiniteWarp(f64),
    #[error("warp function is not positive at r = {0}")]
    NonPositiveWarp(f64),
    #[error("empty radius grid")]
    EmptyGrid,
    #[error("degenerate volume fit: {0}")]
    DegenerateFit(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid spline: {0}")]
    InvalidSpline(String),
    #[error("model has no smooth pole")]
    NoSmoothPole,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// `(h, h′, h″)` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpJet {
    pub h: f64,
    pub dh: f64,
    pub d2h: f64,
}

/// The warp profile `h`, with analytic derivatives for the built-in
/// families and spline derivatives for tabulated data.
#[derive(Debug, Clone, PartialEq)]
pub enum WarpFunction {
    /// `h = r`
    Flat,
    /// `h = a r`
    Cone { a: f64 },
    /// `h = r (1 + r²)^((α/2 − 1)/2)`: smooth pole, `h ~ r^{α/2}` at infinity.
    PowerWarp { alpha: f64 },
    /// `h = sin(√k r)/√k`
    PositiveCap { k: f64 },
    CustomSpline(CubicSpline),
}

impl WarpFunction {
    pub fn jet(&self, r: f64) -> WarpJet {
        match self {
            WarpFunction::Flat => WarpJet { h: r, dh: 1.0, d2h: 0.0 },
            WarpFunction::Cone { a } => WarpJet { h: a * r, dh: *a, d2h: 0.0 },
            WarpFunction::PowerWarp { alpha } => {
                let gamma = 0.5 * (0.5 * alpha - 1.0);
                let s = 1.0 + r * r;
                let base = s.powf(gamma);
                let h = r * base;
                let dh = base / s * (1.0 + (1.0 + 2.0 * gamma) * r * r);
                let d2h = 2.0 * gamma * r * base / (s * s) * (3.0 + (1.0 + 2.0 * gamma) * r * r);
                WarpJet { h, dh, d2h }
            }
            WarpFunction::PositiveCap { k } => {
                let sk = k.sqrt();
                let (s, c) = (sk * r).sin_cos();
                WarpJet { h: s / sk, dh: c, d2h: -sk * s }
            }
            WarpFunction::CustomSpline(spline) => {
                let [h, dh, d2h, _] = spline.eval(r);
                WarpJet { h, dh, d2h }
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WarpFunction::Flat => "flat",
            WarpFunction::Cone { .. } => "cone",
            WarpFunction::PowerWarp { .. } => "power_warp",
            WarpFunction::PositiveCap { .. } => "positive_cap",
            WarpFunction::CustomSpline(_) => "custom_spline",
        }
    }
}

/// Default inner radius of cone models; the cone point itself is excluded.
pub const CONE_DEFAULT_R_MIN: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldModel {
    pub warp: WarpFunction,
    /// 0 for models with a pole; positive for models with boundary `{r = r_min}`.
    pub r_min: f64,
    /// Truncation radius; `+∞` for the complete noncompact families.
    pub r_max: f64,
    /// Scalar curvature at the pole, when there is one.
    pub base_point_scalar: Option<f64>,
    /// The warp closes up at `r_max` (the model is not noncompact).
    pub compact: bool,
    pub name: String,
}

impl ManifoldModel {
    pub fn flat() -> Self {
        ManifoldModel {
            warp: WarpFunction::Flat,
            r_min: 0.0,
            r_max: f64::INFINITY,
            base_point_scalar: Some(0.0),
            compact: false,
            name: "flat".into(),
        }
    }

    pub fn cone(a: f64) -> Result<Self, GeometryError> {
        Self::cone_with_boundary(a, CONE_DEFAULT_R_MIN)
    }

    pub fn cone_with_boundary(a: f64, r_min: f64) -> Result<Self, GeometryError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(GeometryError::InvalidParameter(format!("cone aperture a = {a} must be positive")));
        }
        if !(r_min.is_finite() && r_min > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "cone models need r_min > 0 (got {r_min})"
            )));
        }
        Ok(ManifoldModel {
            warp: WarpFunction::Cone { a },
            r_min,
            r_max: f64::INFINITY,
            base_point_scalar: None,
            compact: false,
            name: format!("cone({a})"),
        })
    }

    pub fn power_warp(alpha: f64) -> Result<Self, GeometryError> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha <= 2.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "power_warp exponent alpha = {alpha} must lie in (0, 2]"
            )));
        }
        let gamma = 0.5 * (0.5 * alpha - 1.0);
        Ok(ManifoldModel {
            warp: WarpFunction::PowerWarp { alpha },
            r_min: 0.0,
            r_max: f64::INFINITY,
            base_point_scalar: Some(-36.0 * gamma),
            compact: false,
            name: format!("power_warp({alpha})"),
        })
    }

    /// Upper hemisphere of the round 3-sphere of curvature `k`.
    pub fn positive_cap(k: f64) -> Result<Self, GeometryError> {
        if !(k.is_finite() && k > 0.0) {
            return Err(GeometryError::InvalidParameter(format!("cap curvature k = {k} must be positive")));
        }
        Ok(ManifoldModel {
            warp: WarpFunction::PositiveCap { k },
            r_min: 0.0,
            r_max: 0.5 * PI / k.sqrt(),
            base_point_scalar: Some(6.0 * k),
            compact: true,
            name: format!("positive_cap({k})"),
        })
    }

    /// Tabulated warp on `[knots[0], knots[last]]`. A first knot at 0 with
    /// value 0 makes it a pole model; the pole scalar curvature is read off
    /// the spline's third derivative.
    pub fn custom_spline(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, GeometryError> {
        let spline = CubicSpline::new(knots, values)?;
        let (lo, hi) = spline.domain();
        if lo < 0.0 {
            return Err(GeometryError::InvalidSpline("knots must be nonnegative".into()));
        }
        let pole = lo == 0.0;
        let start = spline.eval(lo);
        if pole && start[0].abs() > 1e-12 {
            return Err(GeometryError::InvalidSpline("h(0) must vanish at a pole".into()));
        }
        let base_point_scalar = if pole && (start[1] - 1.0).abs() < 1e-6 {
            Some(-6.0 * start[3])
        } else {
            None
        };
        let model = ManifoldModel {
            warp: WarpFunction::CustomSpline(spline),
            r_min: lo,
            r_max: hi,
            base_point_scalar,
            compact: false,
            name: "custom_spline".into(),
        };
        for &r in model.spline_knots().unwrap() {
            if r > 0.0 && model.warp.jet(r).h <= 0.0 {
                return Err(GeometryError::NonPositiveWarp(r));
            }
        }
        Ok(model)
    }

    /// Spline with `h = r − k r³/6` on `[0, r_end]`, i.e. the pole expansion
    /// of a constant-curvature-`k` metric to third order.
    pub fn spline_pole_fixture(k: f64, r_end: f64, n_knots: usize) -> Result<Self, GeometryError> {
        let knots: Vec<f64> = (0..n_knots).map(|i| r_end * i as f64 / (n_knots - 1) as f64).collect();
        let values = knots.iter().map(|r| r - k * r * r * r / 6.0).collect();
        Self::custom_spline(knots, values)
    }

    /// Same metric restricted to `r ≥ r_min`, with `{r = r_min}` as boundary.
    pub fn with_boundary(&self, r_min: f64) -> Result<Self, GeometryError> {
        if !(r_min.is_finite() && r_min > self.r_min && r_min < self.r_max) {
            return Err(GeometryError::InvalidParameter(format!(
                "boundary radius {r_min} must lie inside ({}, {})",
                self.r_min, self.r_max
            )));
        }
        let mut m = self.clone();
        m.r_min = r_min;
        m.base_point_scalar = None;
        m.name = format!("{}|r>={}", self.name, r_min);
        Ok(m)
    }

    pub fn with_r_max(&self, r_max: f64) -> Result<Self, GeometryError> {
        if !(r_max > self.r_min) {
            return Err(GeometryError::InvalidParameter(format!("r_max = {r_max} must exceed r_min")));
        }
        let mut m = self.clone();
        m.r_max = r_max;
        Ok(m)
    }

    fn spline_knots(&self) -> Option<&[f64]> {
        match &self.warp {
            WarpFunction::CustomSpline(s) => Some(s.knots()),
            _ => None,
        }
    }

    pub fn has_boundary(&self) -> bool {
        self.r_min > 0.0
    }

    pub fn has_smooth_pole(&self) -> bool {
        if self.r_min != 0.0 {
            return false;
        }
        match &self.warp {
            WarpFunction::Flat | WarpFunction::PowerWarp { .. } | WarpFunction::PositiveCap { .. } => true,
            WarpFunction::Cone { .. } => false,
            WarpFunction::CustomSpline(_) => self.base_point_scalar.is_some(),
        }
    }

    /// Area of the boundary sphere, for boundary models.
    pub fn boundary_area(&self) -> Option<f64> {
        self.has_boundary().then(|| 4.0 * PI * self.warp.jet(self.r_min).h.powi(2))
    }

    pub fn contains(&self, r: f64) -> bool {
        r.is_finite() && r > 0.0 && r >= self.r_min && r <= self.r_max
    }

    pub(crate) fn check_radius(&self, r: f64) -> Result<WarpJet, GeometryError> {
        if !self.contains(r) {
            return Err(GeometryError::RadiusOutOfDomain {
                r,
                r_min: self.r_min,
                r_max: self.r_max,
            });
        }
        let jet = self.warp.jet(r);
        if !(jet.h.is_finite() && jet.dh.is_finite() && jet.d2h.is_finite()) {
            return Err(GeometryError::NonFiniteWarp(r));
        }
        if jet.h <= 0.0 {
            return Err(GeometryError::NonPositiveWarp(r));
        }
        Ok(jet)
    }

    /// Finite upper end for numerical sampling.
    pub fn sampling_r_max(&self, fallback: f64) -> f64 {
        if self.r_max.is_finite() {
            self.r_max
        } else {
            fallback
        }
    }
}

/// The noncompact models every scenario, monotonicity and cross-validation
/// check is run over.
pub fn library() -> Vec<ManifoldModel> {
    vec![
        ManifoldModel::flat(),
        ManifoldModel::cone(0.8).expect("valid cone"),
        ManifoldModel::power_warp(1.5).expect("valid power warp"),
    ]
}

/// Library plus the geometric fixtures (compact cap, spline pole model,
/// negatively curved cone) used by the identity checks.
pub fn fixtures() -> Vec<ManifoldModel> {
    let mut all = library();
    all.push(ManifoldModel::positive_cap(1.0).expect("valid cap"));
    all.push(ManifoldModel::spline_pole_fixture(0.5, 1.0, 41).expect("valid spline"));
    all.push(ManifoldModel::cone(1.2).expect("valid cone"));
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub r: f64,
    /// Ricci eigenvalue on `∂_r` (multiplicity 1).
    pub ric_rad: f64,
    /// Ricci eigenvalue on the sphere directions (multiplicity 2).
    pub ric_tan: f64,
    pub scalar: f64,
}

pub fn curvature(model: &ManifoldModel, r: f64) -> Result<CurvatureSample, GeometryError> {
    let WarpJet { h, dh, d2h } = model.check_radius(r)?;
    let ric_rad = -2.0 * d2h / h;
    let ric_tan = -d2h / h + (1.0 - dh * dh) / (h * h);
    Ok(CurvatureSample {
        r,
        ric_rad,
        ric_tan,
        scalar: ric_rad + 2.0 * ric_tan,
    })
}

/// Largest `ε` with `Ric ≥ ε R g` on the sampled radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinchingMargin {
    pub epsilon: f64,
    pub nonneg_ricci: bool,
    pub min_eigenvalue: f64,
    /// Radius where the margin is attained.
    pub worst_radius: f64,
}

const RICCI_SIGN_TOL: f64 = 1e-12;

pub fn pinching_margin(model: &ManifoldModel, grid: &[f64]) -> Result<PinchingMargin, GeometryError> {
    if grid.is_empty() {
        return Err(GeometryError::EmptyGrid);
    }
    let trace_cap = 1.0 / 3.0;
    let mut epsilon = trace_cap;
    let mut worst_radius = grid[0];
    let mut min_eigenvalue = f64::INFINITY;
    for &r in grid {
        let c = curvature(model, r)?;
        let lowest = c.ric_rad.min(c.ric_tan);
        min_eigenvalue = min_eigenvalue.min(lowest);
        let scale = c.ric_rad.abs() + 2.0 * c.ric_tan.abs();
        // Ric ≥ εRg is vacuous at scalar-flat points with Ric = 0.
        let local = if c.scalar > 1e-14 * scale.max(f64::MIN_POSITIVE) && c.scalar > 0.0 {
            (lowest / c.scalar).clamp(0.0, trace_cap) + 0.0
        } else if lowest >= -RICCI_SIGN_TOL {
            trace_cap
        } else {
            0.0
        };
        if local < epsilon {
            epsilon = local;
            worst_radius = r;
        }
    }
    Ok(PinchingMargin {
        epsilon,
        nonneg_ricci: min_eigenvalue >= -RICCI_SIGN_TOL,
        min_eigenvalue,
        worst_radius,
    })
}

/// Geometry of the coordinate sphere `{r = c}` with outward normal `∂_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSetData {
    pub r: f64,
    pub area: f64,
    /// Trace convention: `H = 2h′/h`.
    pub mean_curvature: f64,
    pub sff_norm_sq: f64,
    pub traceless_sff_norm_sq: f64,
    pub sc_tangential: f64,
    pub ric_normal: f64,
}

impl LevelSetData {
    /// `∫ H²` over the sphere.
    pub fn willmore(&self) -> f64 {
        self.mean_curvature * self.mean_curvature * self.area
    }

    /// `∫ Sc^⊤` over the sphere.
    pub fn gauss_bonnet_integral(&self) -> f64 {
        self.sc_tangential * self.area
    }
}

pub fn levelset_geometry(model: &ManifoldModel, r: f64) -> Result<LevelSetData, GeometryError> {
    let WarpJet { h, dh, d2h } = model.check_radius(r)?;
    // both principal curvatures equal h′/h
    let kappa = dh / h;
    let mean_curvature = 2.0 * kappa;
    let umbilic_defect = kappa - 0.5 * mean_curvature;
    Ok(LevelSetData {
        r,
        area: 4.0 * PI * h * h,
        mean_curvature,
        sff_norm_sq: 2.0 * kappa * kappa,
        traceless_sff_norm_sq: 2.0 * umbilic_defect * umbilic_defect,
        sc_tangential: 2.0 / (h * h),
        ric_normal: -2.0 * d2h / h,
    })
}

/// Right-hand side minus left-hand side of the Gauss equation
/// `Sc^⊤ = Sc − 2 Ric(ν,ν) + H² − |h|²`, relative to the largest term.
pub fn gauss_identity_residual(model: &ManifoldModel, r: f64) -> Result<f64, GeometryError> {
    let c = curvature(model, r)?;
    let l = levelset_geometry(model, r)?;
    let h2 = l.mean_curvature * l.mean_curvature;
    let terms = [c.scalar, -2.0 * l.ric_normal, h2, -l.sff_norm_sq];
    let rhs: f64 = terms.iter().sum();
    let scale = terms
        .iter()
        .map(|t| t.abs())
        .fold(l.sc_tangential.abs(), f64::max);
    Ok((l.sc_tangential - rhs) / scale)
}

/// `|B_r| = ∫_{r_min}^{r} 4π h² ds`.
pub fn ball_volume(model: &ManifoldModel, r: f64) -> Result<f64, GeometryError> {
    ball_volume_with(model, r, QuadTolerance::default())
}

pub fn ball_volume_with(model: &ManifoldModel, r: f64, tol: QuadTolerance) -> Result<f64, GeometryError> {
    model.check_radius(r)?;
    let f = |s: f64| {
        let h = model.warp.jet(s).h;
        4.0 * PI * h * h
    };
    // Split into geometric panels so the relative target holds on each.
    let start = model.r_min;
    let mut edges = vec![start];
    let mut x = if start > 0.0 { start } else { (r * 1e-6).min(1e-6) };
    if start == 0.0 {
        edges.push(x);
    }
    while x * 2.0 < r {
        x *= 2.0;
        edges.push(x);
    }
    edges.push(r);
    let mut sum = numerics::NeumaierSum::default();
    for w in edges.windows(2) {
        if w[1] > w[0] {
            sum.add(numerics::integrate(f, w[0], w[1], tol)?);
        }
    }
    Ok(sum.value())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    /// Fitted `α` in `|B_r| ≍ r^{1+α}`.
    pub alpha: f64,
    /// Asymptotic volume ratio estimate, reported only near Euclidean growth.
    pub avr: Option<f64>,
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
}

pub const GROWTH_SAMPLES: usize = 32;

pub fn growth_exponent(model: &ManifoldModel, r_lo: f64, r_hi: f64) -> Result<GrowthFit, GeometryError> {
    growth_exponent_with(model, r_lo, r_hi, GROWTH_SAMPLES)
}

pub fn growth_exponent_with(
    model: &ManifoldModel,
    r_lo: f64,
    r_hi: f64,
    samples: usize,
) -> Result<GrowthFit, GeometryError> {
    if samples < 8 {
        return Err(GeometryError::DegenerateFit(format!("need at least 8 samples, got {samples}")));
    }
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(GeometryError::DegenerateFit(format!("empty radius range [{r_lo}, {r_hi}]")));
    }
    let radii = geomspace(r_lo, r_hi, samples);
    // Accumulate shell volumes rather than integrating each ball from scratch.
    let mut volumes = Vec::with_capacity(samples);
    let mut acc = ball_volume(model, radii[0])?;
    volumes.push(acc);
    let shell_tol = QuadTolerance::default();
    for w in radii.windows(2) {
        acc += numerics::integrate(
            |s| {
                let h = model.warp.jet(s).h;
                4.0 * PI * h * h
            },
            w[0],
            w[1],
            shell_tol,
        )?;
        volumes.push(acc);
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = volumes.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or_else(|| GeometryError::DegenerateFit("zero variance in log r".into()))?;
    let alpha = fit.slope - 1.0;
    let avr = (alpha > 1.95).then(|| 3.0 / (4.0 * PI) * volumes[samples - 1] / r_hi.powi(3));
    Ok(GrowthFit {
        alpha,
        avr,
        radii,
        volumes,
    })
}
