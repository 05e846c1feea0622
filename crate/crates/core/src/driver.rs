//! Time loop and the iteration strategies: fixed schemes, adaptive
//! L-scheme/Newton switching, and the L-adaptive scheme.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cases::CaseSpec;
use crate::eqflux::{EqFluxSolver, FluxKind};
use crate::error::Result;
use crate::estimate::{
    degenerate_elements, effectivity_index, eta_l_to_l, eta_l_to_n, eta_n_to_l, ConvectionGradient, DegeneratePoten, EstimatorOptions,
    SwitchEstimate,
};
use crate::fem::{DiscreteField, FeSpace, LinearSolver};
use crate::linearize::{generic_step, Iterate, SchemeKind, TimeLevel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    Fixed(SchemeKind),
    /// L-scheme with parameter `l` until the estimators allow Newton.
    Adaptive { l: f64 },
    /// L-scheme with `L` tuned in `[l_max/8, l_max]`.
    LAdaptive { l_max: f64 },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Fixed(SchemeKind::LScheme(l)) => format!("L({l})"),
            Strategy::Fixed(s) => s.label().to_string(),
            Strategy::Adaptive { .. } => "L/N".into(),
            Strategy::LAdaptive { .. } => "L-adaptive".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub strategy: Strategy,
    pub c_tol: f64,
    pub stop_tol: f64,
    pub max_iters: usize,
    /// Threshold on `θ′` for degenerate elements; `None` means
    /// `1e-4 · sup θ′`.
    pub epsilon: Option<f64>,
    pub eqflux: bool,
    /// Driving gradient in the convection constant.
    pub convection: ConvectionGradient,
    /// Potential residual on degenerate elements.
    pub degenerate: DegeneratePoten,
    /// Leave degenerate elements out of the convection constant.
    pub convection_skips_degenerate: bool,
    pub linear_solver: LinearSolver,
    /// Growth of `η_lin` over its first value that counts as divergence.
    pub blowup_factor: f64,
    pub record_timing: bool,
}

impl SolverConfig {
    pub fn new(strategy: Strategy) -> Self {
        SolverConfig {
            strategy,
            c_tol: 1.5,
            stop_tol: 1e-7,
            max_iters: 500,
            epsilon: None,
            eqflux: false,
            convection: ConvectionGradient::Gravity,
            degenerate: DegeneratePoten::Drop,
            convection_skips_degenerate: true,
            linear_solver: LinearSolver::Direct,
            blowup_factor: 1e8,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(self.c_tol > 1.0) {
            return Err(Error::InvalidParameter(format!("C_tol = {} must exceed 1", self.c_tol)));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("stop_tol = {}", self.stop_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters = 0".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("epsilon = {e}")));
            }
        }
        match self.strategy {
            Strategy::Fixed(SchemeKind::LScheme(l)) | Strategy::Adaptive { l } if !(l > 0.0) => {
                Err(Error::InvalidParameter(format!("L = {l}")))
            }
            Strategy::LAdaptive { l_max } if !(l_max > 0.0) => Err(Error::InvalidParameter(format!("L = {l_max}"))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub step: usize,
    pub iter: usize,
    pub scheme: SchemeKind,
    pub eta_lin: f64,
    pub eta_ln: Option<f64>,
    pub eta_nl: Option<f64>,
    pub eta_ll: Option<f64>,
    pub c_n: Option<f64>,
    /// Previous iteration's applicable estimate over this `η_lin`; only on
    /// Newton rows.
    pub eff_index: Option<f64>,
    pub degenerate_fraction: Option<f64>,
    pub wall_ms: f64,
}

impl IterationRecord {
    pub fn is_newton(&self) -> bool {
        self.scheme.is_newton()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    LToN,
    NToN,
    LToL,
}

/// A realized error that exceeded the estimate predicting it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub step: usize,
    pub iter: usize,
    pub kind: BoundKind,
    pub estimate: f64,
    pub realized: f64,
    pub degenerate_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DivergenceReason {
    NonFinite,
    SolverFailure(String),
    Blowup,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub records: Vec<IterationRecord>,
    pub l_iterations: usize,
    pub n_iterations: usize,
    pub divergence: Option<DivergenceReason>,
    pub bound_checks: usize,
    pub violations: Vec<BoundViolation>,
}

impl StepReport {
    pub fn converged(&self) -> bool {
        self.divergence.is_none()
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    Diverged { step: usize, reason: DivergenceReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub case: String,
    pub strategy: Strategy,
    pub steps: Vec<StepReport>,
    pub status: RunStatus,
    pub final_field: DiscreteField,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(StepReport::iterations).sum()
    }

    pub fn l_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.l_iterations).sum()
    }

    pub fn n_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.n_iterations).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = &IterationRecord> {
        self.steps.iter().flat_map(|s| s.records.iter())
    }

    pub fn violations(&self) -> impl Iterator<Item = &BoundViolation> {
        self.steps.iter().flat_map(|s| s.violations.iter())
    }

    pub fn bound_checks(&self) -> usize {
        self.steps.iter().map(|s| s.bound_checks).sum()
    }

    /// `"<total> iterations"`, with the `(L/N)` split when both ran.
    pub fn summary(&self) -> String {
        let total = self.total_iterations();
        match self.strategy {
            Strategy::Adaptive { .. } => {
                format!("{total} iterations ({}/{})", self.l_iterations(), self.n_iterations())
            }
            _ => format!("{total} iterations"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    LScheme,
    Newton,
}

/// Next scheme of the adaptive L/N strategy. Unavailable estimates are
/// `None`; after a Newton step they force a return to the L-scheme.
pub fn switching_decision(
    current: Phase,
    c_n: f64,
    eta_ln: Option<f64>,
    eta_nl: Option<f64>,
    eta_lin: f64,
    c_tol: f64,
) -> Phase {
    match current {
        Phase::LScheme => {
            if c_n >= 2.0 {
                return Phase::LScheme;
            }
            match eta_ln {
                Some(e) if e <= c_tol * eta_lin => Phase::Newton,
                _ => Phase::LScheme,
            }
        }
        Phase::Newton => match eta_nl {
            Some(e) if c_n < 2.0 && e <= eta_lin => Phase::Newton,
            _ => Phase::LScheme,
        },
    }
}

/// One update of the L-adaptive scheme. `history` holds `(η_{L→L}, η_lin)`
/// of this time step, oldest first and ending with the current iteration.
/// Returns the new `(L, L_m)`.
pub fn l_adaptive_update(l: f64, l_min: f64, l_max: f64, history: &[(f64, f64)]) -> (f64, f64) {
    let Some(&(est, lin)) = history.last() else {
        return (l, l_min);
    };
    if est > lin {
        return ((std::f64::consts::SQRT_2 * l).min(l_max), l);
    }
    if history.len() >= 3 && history[history.len() - 3..].iter().all(|&(e, n)| e > 0.8 * n) {
        return ((0.9 * l).max(1.1 * l_min), l_min);
    }
    (l, l_min)
}

fn within(realized: f64, estimate: f64) -> bool {
    realized <= estimate * (1.0 + 1e-9) + 1e-15
}

/// Pre-processed problem: mesh, boundary vertices and the optional flux
/// reconstruction, shared by all time steps.
pub struct Simulation<'a> {
    pub spec: &'a CaseSpec,
    pub config: &'a SolverConfig,
    pub space: FeSpace,
    pub estimator: EstimatorOptions,
    dirichlet: Vec<Vec<usize>>,
    eqflux: Option<EqFluxSolver>,
}

/// The previous two iterates and what was estimated from them.
struct Previous {
    iterate: Iterate,
    scheme: SchemeKind,
    ll: Option<SwitchEstimate>,
    ln: Option<SwitchEstimate>,
    nl: Option<SwitchEstimate>,
}

impl<'a> Simulation<'a> {
    pub fn new(spec: &'a CaseSpec, config: &'a SolverConfig) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        let space = spec.space()?;
        let dirichlet = spec.dirichlet.iter().map(|d| space.mesh.tag_boundary(&d.region)).collect();
        let eqflux = if config.eqflux {
            Some(EqFluxSolver::new(&space.mesh, spec.model.saturated_conductivity())?)
        } else {
            None
        };
        let epsilon = config.epsilon.unwrap_or(1e-4 * spec.model.sup_theta_prime());
        let estimator = EstimatorOptions {
            epsilon,
            convection: config.convection,
            degenerate: config.degenerate,
            convection_skips_degenerate: config.convection_skips_degenerate,
        };
        Ok(Simulation { spec, config, space, estimator, dirichlet, eqflux })
    }

    pub fn initial_field(&self) -> DiscreteField {
        let f = &self.spec.initial;
        self.space.nodal(|x, z| f(x, z))
    }

    /// Dirichlet vertices and their values at time `t`.
    pub fn dirichlet_data(&self, t: f64) -> (Vec<usize>, Vec<f64>) {
        let mut map = BTreeMap::new();
        for (cond, dofs) in self.spec.dirichlet.iter().zip(&self.dirichlet) {
            for &d in dofs {
                let [x, z] = self.space.mesh.vertices[d];
                map.insert(d, (cond.value)(t, x, z));
            }
        }
        map.into_iter().unzip()
    }

    fn sigma(&self, kind: FluxKind, cur: &Iterate, prev: &Iterate) -> Result<Option<Vec<[f64; 2]>>> {
        let Some(solver) = &self.eqflux else {
            return Ok(None);
        };
        let deg = degenerate_elements(&self.space, self.spec.model.as_ref(), cur, self.estimator.epsilon);
        if !deg.iter().any(|&d| d) {
            return Ok(None);
        }
        let field = solver.compute_equilibrated_flux(&self.space, kind, cur, prev, self.spec.tau, &deg)?;
        Ok(Some(field.at_points(&self.space, &solver.signs)))
    }

    /// Iterates the nonlinear system of time level `step` (1-based) starting
    /// from the previous solution. Returns the last iterate and the report.
    pub fn solve_time_step(&self, step: usize, previous: &DiscreteField) -> (DiscreteField, StepReport) {
        let spec = self.spec;
        let cfg = self.config;
        let model = spec.model.as_ref();
        let tau = spec.tau;
        let t = step as f64 * tau;
        let (dofs, values) = self.dirichlet_data(t);
        let source = self.space.at_points(|x, z| (spec.source)(t, x, z));
        let mut level = TimeLevel::new(&self.space, model, tau, previous, source, dofs.clone());
        level.solver = cfg.linear_solver;

        let mut start = previous.clone();
        for (&d, &v) in dofs.iter().zip(&values) {
            start[d] = v;
        }

        let mut report = StepReport {
            step,
            records: Vec::new(),
            l_iterations: 0,
            n_iterations: 0,
            divergence: None,
            bound_checks: 0,
            violations: Vec::new(),
        };

        let (mut l, mut l_min, l_top) = match cfg.strategy {
            Strategy::Fixed(SchemeKind::LScheme(l)) | Strategy::Adaptive { l } => (l, l, l),
            Strategy::LAdaptive { l_max } => (l_max / 8.0, l_max / 8.0, l_max),
            Strategy::Fixed(_) => (0.0, 0.0, 0.0),
        };
        let mut phase = match cfg.strategy {
            Strategy::Fixed(SchemeKind::Newton) => Phase::Newton,
            _ => Phase::LScheme,
        };
        let mut history: Vec<(f64, f64)> = Vec::new();
        let mut prev = Previous {
            iterate: Iterate::new(&self.space, model, start),
            scheme: SchemeKind::Picard,
            ll: None,
            ln: None,
            nl: None,
        };
        let mut first_eta = None;

        loop {
            let iter = report.records.len() + 1;
            if iter > cfg.max_iters {
                report.divergence = Some(DivergenceReason::MaxIterations);
                break;
            }
            let clock = Instant::now();
            let scheme = match cfg.strategy {
                Strategy::Fixed(s) => s,
                _ => match phase {
                    Phase::LScheme => SchemeKind::LScheme(l),
                    Phase::Newton => SchemeKind::Newton,
                },
            };
            let result = match generic_step(&level, &prev.iterate, scheme) {
                Ok(r) => r,
                Err(e) => {
                    report.divergence = Some(DivergenceReason::SolverFailure(e.to_string()));
                    break;
                }
            };
            if scheme.is_newton() {
                report.n_iterations += 1;
            } else {
                report.l_iterations += 1;
            }
            let eta_lin = result.eta_lin;
            let cur = result.iterate;

            // Check the prediction made at the previous iteration.
            let predicted = match (prev.scheme, scheme) {
                (SchemeKind::LScheme(_), SchemeKind::Newton) => prev.ln.and_then(|e| e.value).map(|v| (BoundKind::LToN, v, prev.ln)),
                (SchemeKind::Newton, SchemeKind::Newton) => prev.nl.and_then(|e| e.value).map(|v| (BoundKind::NToN, v, prev.nl)),
                (SchemeKind::LScheme(a), SchemeKind::LScheme(b)) if a == b => {
                    prev.ll.and_then(|e| e.value).map(|v| (BoundKind::LToL, v, prev.ll))
                }
                _ => None,
            };
            let mut eff = None;
            if let Some((kind, estimate, est)) = predicted {
                if eta_lin.is_finite() {
                    report.bound_checks += 1;
                    if !within(eta_lin, estimate) {
                        report.violations.push(BoundViolation {
                            step,
                            iter,
                            kind,
                            estimate,
                            realized: eta_lin,
                            degenerate_fraction: est.map_or(0.0, |e| e.degenerate_fraction),
                        });
                    }
                }
                if kind != BoundKind::LToL {
                    eff = effectivity_index(estimate, eta_lin);
                }
            }

            let finite = eta_lin.is_finite() && cur.psi.is_finite();
            let blowup = first_eta.is_some_and(|f: f64| eta_lin > cfg.blowup_factor * f);
            first_eta.get_or_insert(eta_lin);

            let (mut ll, mut ln, mut nl) = (None, None, None);
            if finite {
                let estimates = self.estimate(scheme, &cur, &prev.iterate);
                match estimates {
                    Ok(e) => (ll, ln, nl) = e,
                    Err(e) => {
                        report.divergence = Some(DivergenceReason::SolverFailure(e.to_string()));
                    }
                }
            }
            let c_n = ln.or(nl).map(|e: SwitchEstimate| e.c_n);
            let wall_ms = if cfg.record_timing { clock.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            report.records.push(IterationRecord {
                step,
                iter,
                scheme,
                eta_lin,
                eta_ln: ln.and_then(|e| e.value),
                eta_nl: nl.and_then(|e| e.value),
                eta_ll: ll.and_then(|e| e.value),
                c_n,
                eff_index: eff,
                degenerate_fraction: ln.or(nl).map(|e| e.degenerate_fraction),
                wall_ms,
            });
            if !finite {
                report.divergence = Some(DivergenceReason::NonFinite);
                break;
            }
            if blowup {
                report.divergence = Some(DivergenceReason::Blowup);
                break;
            }
            if report.divergence.is_some() {
                break;
            }
            prev = Previous { iterate: cur, scheme, ll, ln, nl };
            if eta_lin < cfg.stop_tol {
                break;
            }

            match cfg.strategy {
                Strategy::Adaptive { .. } => {
                    phase = switching_decision(
                        phase,
                        c_n.unwrap_or(f64::INFINITY),
                        ln.and_then(|e| e.value),
                        nl.and_then(|e| e.value),
                        eta_lin,
                        cfg.c_tol,
                    );
                }
                Strategy::LAdaptive { .. } => {
                    if let Some(v) = ll.and_then(|e| e.value) {
                        history.push((v, eta_lin));
                        (l, l_min) = l_adaptive_update(l, l_min, l_top, &history);
                    }
                }
                Strategy::Fixed(_) => {}
            }
        }
        (prev.iterate.psi, report)
    }

    /// Estimates available after a step of `scheme` from `prev` to `cur`.
    #[allow(clippy::type_complexity)]
    fn estimate(
        &self,
        scheme: SchemeKind,
        cur: &Iterate,
        prev: &Iterate,
    ) -> Result<(Option<SwitchEstimate>, Option<SwitchEstimate>, Option<SwitchEstimate>)> {
        let model = self.spec.model.as_ref();
        let tau = self.spec.tau;
        Ok(match scheme {
            SchemeKind::LScheme(l) => {
                let sigma = self.sigma(FluxKind::LScheme(l), cur, prev)?;
                let ln = eta_l_to_n(&self.space, model, cur, prev, tau, l, sigma.as_deref(), self.estimator);
                (Some(eta_l_to_l(&self.space, cur, prev, tau, l)), Some(ln), None)
            }
            SchemeKind::Newton => {
                let sigma = self.sigma(FluxKind::Newton, cur, prev)?;
                (None, None, Some(eta_n_to_l(&self.space, model, cur, prev, tau, sigma.as_deref(), self.estimator)))
            }
            _ => (None, None, None),
        })
    }

    pub fn run(&self) -> RunReport {
        let clock = Instant::now();
        let mut field = self.initial_field();
        let mut steps = Vec::with_capacity(self.spec.steps);
        let mut status = RunStatus::Converged;
        for n in 1..=self.spec.steps {
            let (next, report) = self.solve_time_step(n, &field);
            field = next;
            let diverged = report.divergence.clone();
            steps.push(report);
            if let Some(reason) = diverged {
                status = RunStatus::Diverged { step: n, reason };
                break;
            }
        }
        let wall_ms = if self.config.record_timing { clock.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        RunReport {
            case: self.spec.name.clone(),
            strategy: self.config.strategy,
            steps,
            status,
            final_field: field,
            wall_ms,
        }
    }
}

pub fn run_case(spec: &CaseSpec, config: &SolverConfig) -> Result<RunReport> {
    Ok(Simulation::new(spec, config)?.run())
}
