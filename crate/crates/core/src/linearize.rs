//! One iteration of the linearization schemes.
//!
//! Every scheme is solved in increment form: with residual
//!
//! `R(v) = τ(f, v) − (θ(ψ_prev) − θ(ψ_old), v) − τ(K(θ(ψ_prev)) ∇(ψ_prev + z), ∇v)`
//!
//! the increment `δ` solves `(𝓛 δ, v) + τ(K ∇δ, ∇v) [+ convection] = R(v)`
//! with `δ = 0` on Dirichlet vertices, and `ψ_new = ψ_prev + δ`.

use serde::{Deserialize, Serialize};

use crate::constitutive::{golden_section_max, Constitutive, WORKING_RANGE};
use crate::error::Result;
use crate::fem::{apply_dirichlet, solve_linear, CsrMatrix, DiscreteField, FeSpace, LinearSolver};

/// Linearization weight `𝓛` of the fixed-point family, plus Newton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeKind {
    LScheme(f64),
    Newton,
    Picard,
    ModifiedPicard,
    JaegerKacur,
    ModifiedLScheme(f64),
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::LScheme(_) => "L",
            SchemeKind::Newton => "N",
            SchemeKind::Picard => "Picard",
            SchemeKind::ModifiedPicard => "mPicard",
            SchemeKind::JaegerKacur => "JK",
            SchemeKind::ModifiedLScheme(_) => "mL",
        }
    }

    pub fn is_newton(&self) -> bool {
        matches!(self, SchemeKind::Newton)
    }
}

/// Data of one backward-Euler time level that does not change across the
/// iterations of that level.
#[derive(Debug, Clone)]
pub struct TimeLevel<'a> {
    pub space: &'a FeSpace,
    pub model: &'a dyn Constitutive,
    pub tau: f64,
    /// `f(t_n)` at quadrature points.
    pub source: Vec<f64>,
    /// `θ(ψ^{n−1})` at quadrature points.
    pub theta_old: Vec<f64>,
    pub dirichlet_dofs: Vec<usize>,
    pub solver: LinearSolver,
}

impl<'a> TimeLevel<'a> {
    pub fn new(
        space: &'a FeSpace,
        model: &'a dyn Constitutive,
        tau: f64,
        previous: &DiscreteField,
        source: Vec<f64>,
        dirichlet_dofs: Vec<usize>,
    ) -> Self {
        let theta_old = space.interpolate(previous).into_iter().map(|p| model.water_content(p)).collect();
        TimeLevel { space, model, tau, source, theta_old, dirichlet_dofs, solver: LinearSolver::Direct }
    }
}

/// An iterate together with the constitutive quantities the schemes and
/// estimators evaluate at quadrature points.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub psi: DiscreteField,
    pub psi_qp: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_prime: Vec<f64>,
    pub k: Vec<f64>,
    pub k_prime: Vec<f64>,
    /// Elementwise `∇ψ`.
    pub grad: Vec<[f64; 2]>,
}

impl Iterate {
    pub fn new(space: &FeSpace, model: &dyn Constitutive, psi: DiscreteField) -> Self {
        let psi_qp = space.interpolate(&psi);
        let theta = psi_qp.iter().map(|&p| model.water_content(p)).collect();
        let theta_prime = psi_qp.iter().map(|&p| model.water_content_derivative(p)).collect();
        let k = psi_qp.iter().map(|&p| model.conductivity(p)).collect();
        let k_prime = psi_qp.iter().map(|&p| model.conductivity_derivative(p)).collect();
        let grad = space.gradients(&psi);
        Iterate { psi, psi_qp, theta, theta_prime, k, k_prime, grad }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub iterate: Iterate,
    /// Energy norm of the increment in the norm of the executed scheme.
    pub eta_lin: f64,
    pub scheme: SchemeKind,
}

/// Pointwise `𝓛(ψ)` for the fixed-point schemes; `θ′(ψ)` for Newton.
pub fn linearization_weight(scheme: SchemeKind, prev: &Iterate, tau: f64, model: &dyn Constitutive) -> Vec<f64> {
    match scheme {
        SchemeKind::LScheme(l) => vec![l; prev.psi_qp.len()],
        SchemeKind::Newton | SchemeKind::ModifiedPicard => prev.theta_prime.clone(),
        SchemeKind::Picard => vec![0.0; prev.psi_qp.len()],
        SchemeKind::ModifiedLScheme(m) => prev.theta_prime.iter().map(|d| d + m * tau).collect(),
        SchemeKind::JaegerKacur => prev.psi_qp.iter().map(|&p| jaeger_kacur_weight(model, p)).collect(),
    }
}

/// `sup_ξ (θ(ξ) − θ(ψ)) / (ξ − ψ)` over the working range: scan on a
/// 400-point grid, then golden-section refinement around the best point.
/// The difference-quotient limit `θ′(ψ)` is included in the supremum.
pub fn jaeger_kacur_weight(model: &dyn Constitutive, psi: f64) -> f64 {
    let (lo, hi) = WORKING_RANGE;
    let theta_psi = model.water_content(psi);
    let quotient = |xi: f64| {
        let d = xi - psi;
        if d.abs() < 1e-9 {
            model.water_content_derivative(psi)
        } else {
            (model.water_content(xi) - theta_psi) / d
        }
    };
    const GRID: usize = 400;
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut best = model.water_content_derivative(psi);
    let mut best_xi = psi;
    for i in 0..GRID {
        let xi = lo + step * i as f64;
        let q = quotient(xi);
        if q > best {
            best = q;
            best_xi = xi;
        }
    }
    let refined = golden_section_max(&quotient, (best_xi - step).max(lo), (best_xi + step).min(hi), 1e-10);
    best.max(refined)
}

/// Assembles and solves the increment system of `scheme` at `prev`.
pub fn generic_step(level: &TimeLevel, prev: &Iterate, scheme: SchemeKind) -> Result<StepResult> {
    let space = level.space;
    let weight = linearization_weight(scheme, prev, level.tau, level.model);
    let mut a = space.assemble_weighted_mass(&weight);
    a.add_scaled(1.0, &space.assemble_weighted_stiffness(&prev.k, level.tau));
    if scheme.is_newton() {
        a.add_scaled(1.0, &newton_convection(space, prev, level.tau));
    }
    let mut rhs = space.assemble_rhs(&level.source, level.tau, &level.theta_old, &prev.theta, &prev.k, Some(&prev.grad));
    let zeros = vec![0.0; level.dirichlet_dofs.len()];
    apply_dirichlet(&mut a, &mut rhs, &level.dirichlet_dofs, &zeros)?;
    let delta = solve_linear(&a, &rhs, level.solver)?;
    let eta_lin = space.weighted_energy_norm(&delta, &weight, &prev.k, level.tau);
    let psi = DiscreteField::new(prev.psi.iter().zip(&delta).map(|(p, d)| p + d).collect());
    Ok(StepResult { iterate: Iterate::new(space, level.model, psi), eta_lin, scheme })
}

/// `τ((K∘θ)′(ψ) ∇(ψ + z) φ_j, ∇φ_i)`.
pub fn newton_convection(space: &FeSpace, prev: &Iterate, tau: f64) -> CsrMatrix {
    let nq = space.nq();
    let b: Vec<[f64; 2]> = prev
        .k_prime
        .iter()
        .enumerate()
        .map(|(k, &kp)| {
            let g = prev.grad[k / nq];
            [kp * g[0], kp * (g[1] + 1.0)]
        })
        .collect();
    space.assemble_convection(&b, tau)
}

pub fn l_scheme_step(level: &TimeLevel, prev: &Iterate, l: f64) -> Result<StepResult> {
    generic_step(level, prev, SchemeKind::LScheme(l))
}

pub fn newton_step(level: &TimeLevel, prev: &Iterate) -> Result<StepResult> {
    generic_step(level, prev, SchemeKind::Newton)
}
