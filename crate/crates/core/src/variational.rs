//! Direct minimization of the discretized p-Dirichlet energy.
//!
//! Piecewise-linear competitors on a geometric mesh `r0 = x_0 < … < x_N = r_cut`
//! with `ψ(x_0) = 1`, `ψ(x_N) = 0`. For such `ψ` the radial energy
//! `4π ∫ h² |ψ′|^p dr` equals `Σ m_i |s_i|^p`, where `s_i` is the slope on
//! cell `i` and `m_i = 4π ∫_cell h²`. This gives a route to the capacity
//! that shares nothing with the quadrature solver in [`crate::potential`].

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, ManifoldModel};
use crate::numerics::{geomspace, integrate, solve_tridiagonal, NeumaierSum, QuadError, QuadTolerance};
use crate::potential::{PExponent, PotentialError, RadialPotential};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("gradient tolerance must be positive (got {0})")]
    InvalidTolerance(f64),
    #[error(
        "line search stalled at iteration {iteration}: energy {energy:e}, gradient norm {grad_norm:e}, last step {step:e}"
    )]
    LineSearchStall {
        iteration: usize,
        energy: f64,
        grad_norm: f64,
        step: f64,
    },
    #[error("no convergence in {iterations} iterations (gradient norm {grad_norm:e}, energy {energy:e})")]
    NoConvergence {
        iterations: usize,
        grad_norm: f64,
        energy: f64,
    },
    #[error("mismatched problem: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

pub const MAX_ITERATIONS: usize = 200;
/// Relative slope floor `|Δψ|/ψ` in the Hessian, where `|s|^{p−2}` blows up.
pub const SLOPE_FLOOR: f64 = 1e-12;
pub const DEFAULT_CELLS: usize = 2048;
pub const DEFAULT_TOL: f64 = 1e-10;
const ARMIJO_C: f64 = 1e-4;
const CURVATURE_SIGMA: f64 = 0.9;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    model: ManifoldModel,
    p: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteProblem {
    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn r_cut(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `4π ∫ h²` over each cell.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_cells(&self) -> usize {
        self.weights.len()
    }

    fn slopes(&self, psi: &[f64]) -> Vec<f64> {
        (0..self.n_cells())
            .map(|i| (psi[i + 1] - psi[i]) / (self.nodes[i + 1] - self.nodes[i]))
            .collect()
    }

    pub fn energy(&self, psi: &[f64]) -> f64 {
        let p = self.p;
        self.slopes(psi)
            .iter()
            .zip(&self.weights)
            .map(|(s, m)| m * s.abs().powf(p))
            .collect::<NeumaierSum>()
            .value()
    }

    // Gradient with respect to the interior nodes, and the flux scale used to
    // make its norm dimensionless.
    fn gradient(&self, slopes: &[f64]) -> (Vec<f64>, f64) {
        let p = self.p;
        let flux: Vec<f64> = (0..self.n_cells())
            .map(|i| {
                let s = slopes[i];
                p * self.weights[i] * s.abs().powf(p - 1.0) * s.signum() / (self.nodes[i + 1] - self.nodes[i])
            })
            .collect();
        let scale = flux.iter().fold(0.0f64, |a, f| a.max(f.abs())).max(f64::MIN_POSITIVE);
        let grad = (1..self.n_cells()).map(|j| flux[j - 1] - flux[j]).collect();
        (grad, scale)
    }

    fn hessian(&self, psi: &[f64], slopes: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p = self.p;
        let a: Vec<f64> = (0..self.n_cells())
            .map(|i| {
                let dx = self.nodes[i + 1] - self.nodes[i];
                let floor = SLOPE_FLOOR * psi[i].abs().max(psi[i + 1].abs()) / dx;
                p * (p - 1.0) * self.weights[i] * slopes[i].abs().max(floor).powf(p - 2.0) / (dx * dx)
            })
            .collect();
        let n = self.n_cells() - 1;
        let diag = (0..n).map(|k| a[k] + a[k + 1]).collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for k in 0..n {
            if k > 0 {
                lower[k] = -a[k];
            }
            if k + 1 < n {
                upper[k] = -a[k + 1];
            }
        }
        (lower, diag, upper)
    }

    /// Linear in `log r` between the boundary values.
    pub fn initial_iterate(&self) -> Vec<f64> {
        let (r0, r_cut) = (self.r0(), self.r_cut());
        let span = (r_cut / r0).ln();
        let mut psi: Vec<f64> = self.nodes.iter().map(|x| 1.0 - (x / r0).ln() / span).collect();
        psi[0] = 1.0;
        *psi.last_mut().unwrap() = 0.0;
        psi
    }
}

/// Geometric mesh on `[r0, r_cut]` with cell weights `4π ∫ h²`.
pub fn discretize(
    model: &ManifoldModel,
    p: PExponent,
    r0: f64,
    n_cells: usize,
    r_cut: f64,
) -> Result<DiscreteProblem, VariationalError> {
    if n_cells < 2 {
        return Err(VariationalError::InvalidMesh(format!("need at least 2 cells (got {n_cells})")));
    }
    if !(r0.is_finite() && r0 > 0.0 && r_cut.is_finite() && r_cut > r0) {
        return Err(VariationalError::InvalidMesh(format!(
            "need 0 < r0 < r_cut (got r0 = {r0}, r_cut = {r_cut})"
        )));
    }
    if !model.contains(r0) || !model.contains(r_cut) {
        return Err(GeometryError::RadiusOutOfDomain {
            r: if model.contains(r0) { r_cut } else { r0 },
            r_min: model.r_min,
            r_max: model.r_max,
        }
        .into());
    }
    let mut nodes = geomspace(r0, r_cut, n_cells + 1);
    nodes[0] = r0;
    nodes[n_cells] = r_cut;
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(VariationalError::InvalidMesh("mesh is not strictly increasing".into()));
    }
    let tol = QuadTolerance {
        abs: 0.0,
        rel: 1e-13,
        ..QuadTolerance::default()
    };
    let weights = nodes
        .windows(2)
        .map(|w| {
            let m = 4.0 * PI * integrate(|r| model.warp.jet(r).h.powi(2), w[0], w[1], tol)?;
            if m > 0.0 && m.is_finite() {
                Ok(m)
            } else {
                Err(VariationalError::InvalidMesh(format!("cell [{}, {}] has weight {m}", w[0], w[1])))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiscreteProblem {
        model: model.clone(),
        p: p.value(),
        nodes,
        weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSolution {
    #[serde(skip)]
    pub model: ManifoldModel,
    pub p: f64,
    pub nodes: Vec<f64>,
    pub psi: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    /// Max-norm of the interior gradient relative to the largest cell flux.
    pub grad_norm: f64,
    /// Energy before the first step and after each accepted step.
    pub energy_history: Vec<f64>,
}

impl DiscreteSolution {
    pub fn r0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn capacity(&self) -> f64 {
        capacity_from_energy(self)
    }
}

pub fn minimize_energy(problem: &DiscreteProblem, tol: f64) -> Result<DiscreteSolution, VariationalError> {
    minimize_energy_from(problem, problem.initial_iterate(), tol)
}

/// Damped Newton from a given iterate. The boundary values of `initial`
/// are overwritten with the Dirichlet data.
///
/// The iteration runs in the variables `v = −ln ψ` on the interior nodes, so
/// that slopes spanning many orders of magnitude are reached additively.
/// The Hessian there is `D H_ψ D + diag(g_ψ ψ)` with `D = diag(ψ)`; negative
/// diagonal corrections are dropped, which keeps every direction a descent
/// direction.
pub fn minimize_energy_from(
    problem: &DiscreteProblem,
    initial: Vec<f64>,
    tol: f64,
) -> Result<DiscreteSolution, VariationalError> {
    if !(tol > 0.0) {
        return Err(VariationalError::InvalidTolerance(tol));
    }
    let n = problem.nodes.len();
    if initial.len() != n {
        return Err(VariationalError::Mismatch(format!(
            "initial iterate has {} nodes, mesh has {n}",
            initial.len()
        )));
    }
    if initial[1..n - 1].iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(VariationalError::Mismatch("initial iterate must be positive on interior nodes".into()));
    }
    let mut v: Vec<f64> = initial[1..n - 1].iter().map(|x| -x.ln()).collect();
    let to_psi = |v: &[f64]| -> Vec<f64> {
        let mut psi = Vec::with_capacity(n);
        psi.push(1.0);
        psi.extend(v.iter().map(|x| (-x).exp()));
        psi.push(0.0);
        psi
    };
    let mut psi = to_psi(&v);

    let mut energy = problem.energy(&psi);
    let mut history = vec![energy];
    let mut iterations = 0;
    loop {
        let slopes = problem.slopes(&psi);
        let (grad, scale) = problem.gradient(&slopes);
        let grad_norm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())) / scale;
        if grad_norm <= tol {
            return Ok(DiscreteSolution {
                model: problem.model.clone(),
                p: problem.p,
                nodes: problem.nodes.clone(),
                psi,
                energy,
                iterations,
                grad_norm,
                energy_history: history,
            });
        }
        if iterations == MAX_ITERATIONS {
            return Err(VariationalError::NoConvergence {
                iterations,
                grad_norm,
                energy,
            });
        }

        let interior = &psi[1..n - 1];
        let (mut lower, mut diag, mut upper) = problem.hessian(&psi, &slopes);
        for k in 0..diag.len() {
            diag[k] = diag[k] * interior[k] * interior[k] + (grad[k] * interior[k]).max(0.0);
            if k > 0 {
                lower[k] *= interior[k] * interior[k - 1];
            }
            if k + 1 < diag.len() {
                upper[k] *= interior[k] * interior[k + 1];
            }
        }
        let grad_v: Vec<f64> = grad.iter().zip(interior).map(|(g, x)| -g * x).collect();
        let rhs: Vec<f64> = grad_v.iter().map(|g| -g).collect();
        let stall = |step| VariationalError::LineSearchStall {
            iteration: iterations,
            energy,
            grad_norm,
            step,
        };
        let dir = solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or_else(|| stall(0.0))?;
        let slope0: f64 = grad_v.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope0 < 0.0) {
            return Err(stall(0.0));
        }

        let mut step = 1.0;
        let accepted = loop {
            let trial_v: Vec<f64> = v.iter().zip(&dir).map(|(x, d)| x + step * d).collect();
            let trial = to_psi(&trial_v);
            let e = problem.energy(&trial);
            if e <= energy + ARMIJO_C * step * slope0 {
                break Some((trial_v, trial, e));
            }
            // Near the minimizer the energy decrease drops below rounding;
            // fall back on the directional derivative.
            if e <= energy + 4.0 * f64::EPSILON * energy.abs() {
                let (g, _) = problem.gradient(&problem.slopes(&trial));
                let slope: f64 = g
                    .iter()
                    .zip(&trial[1..n - 1])
                    .zip(&dir)
                    .map(|((g, x), d)| -g * x * d)
                    .sum();
                if slope >= CURVATURE_SIGMA * slope0 && slope <= (2.0 * ARMIJO_C - 1.0) * slope0 {
                    break Some((trial_v, trial, e.min(energy)));
                }
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((trial_v, trial, e)) = accepted else {
            return Err(stall(step));
        };
        v = trial_v;
        psi = trial;
        energy = e;
        history.push(energy);
        iterations += 1;
    }
}

/// The minimizer in closed form: the discrete Euler–Lagrange equations say
/// `m_i |s_i|^{p−1} / Δx_i` is the same on every cell.
pub fn exact_discrete_minimizer(problem: &DiscreteProblem) -> Vec<f64> {
    let p = problem.p;
    let nodes = &problem.nodes;
    let drops: Vec<f64> = (0..problem.n_cells())
        .map(|i| {
            let dx = nodes[i + 1] - nodes[i];
            // log form keeps tiny slopes representable for p near 1
            (((dx / problem.weights[i]).ln()) / (p - 1.0)).exp() * dx
        })
        .collect();
    let mut tail = vec![0.0; nodes.len()];
    let mut acc = NeumaierSum::default();
    for i in (0..drops.len()).rev() {
        acc.add(drops[i]);
        tail[i] = acc.value();
    }
    let total = tail[0];
    tail.iter().map(|t| t / total).collect()
}

/// `(1/4π)((p−1)/(3−p))^{p−1} E[ψ*]`
pub fn capacity_from_energy(solution: &DiscreteSolution) -> f64 {
    let p = solution.p;
    ((p - 1.0) / (3.0 - p)).powf(p - 1.0) * solution.energy / (4.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossValidation {
    pub max_node_error: f64,
    pub capacity_energy: f64,
    pub capacity_quadrature: f64,
    /// `(cap_energy − cap_quadrature) / cap_quadrature`
    pub capacity_gap: f64,
    pub pass: bool,
}

pub const CROSS_VALIDATION_TOL: f64 = 5e-3;

pub fn cross_validate(solution: &DiscreteSolution, pot: &RadialPotential) -> Result<CrossValidation, VariationalError> {
    if solution.model != *pot.model() {
        return Err(VariationalError::Mismatch(format!(
            "solution is for {}, potential for {}",
            solution.model.name,
            pot.model().name
        )));
    }
    if solution.p != pot.p().value() {
        return Err(VariationalError::Mismatch(format!(
            "solution has p = {}, potential has p = {}",
            solution.p,
            pot.p().value()
        )));
    }
    if (solution.r0() - pot.r0()).abs() > 1e-12 * pot.r0() {
        return Err(VariationalError::Mismatch(format!(
            "solution has r0 = {}, potential has r0 = {}",
            solution.r0(),
            pot.r0()
        )));
    }
    let r_cut = *solution.nodes.last().unwrap();
    if r_cut > pot.r_max() * (1.0 + 1e-12) {
        return Err(VariationalError::Mismatch(format!(
            "mesh extends to {r_cut}, beyond the potential grid end {}",
            pot.r_max()
        )));
    }
    let mut max_node_error: f64 = 0.0;
    for (&x, &v) in solution.nodes.iter().zip(&solution.psi) {
        let u = pot.potential_at(x.min(pot.r_max()))?.u;
        max_node_error = max_node_error.max((u - v).abs());
    }
    let capacity_energy = capacity_from_energy(solution);
    let capacity_quadrature = pot.capacity_at_radius(pot.r0())?;
    let capacity_gap = (capacity_energy - capacity_quadrature) / capacity_quadrature;
    Ok(CrossValidation {
        max_node_error,
        capacity_energy,
        capacity_quadrature,
        capacity_gap,
        pass: max_node_error < CROSS_VALIDATION_TOL && capacity_gap.abs() < CROSS_VALIDATION_TOL,
    })
}

/// Solves the discrete problem on the potential's own grid span and compares.
pub fn cross_validate_default(pot: &RadialPotential) -> Result<CrossValidation, VariationalError> {
    let problem = discretize(pot.model(), pot.p(), pot.r0(), DEFAULT_CELLS, pot.r_max())?;
    let solution = minimize_energy(&problem, DEFAULT_TOL)?;
    cross_validate(&solution, pot)
}
