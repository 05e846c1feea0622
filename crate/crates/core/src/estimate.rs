//! A posteriori predictors of the next linearization error.
//!
//! All quantities are evaluated at the quadrature points of the assembly
//! rule, so the bounds hold for the discrete problem that is actually
//! solved.

use serde::{Deserialize, Serialize};

use crate::constitutive::Constitutive;
use crate::fem::FeSpace;
use crate::linearize::Iterate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEstimate {
    /// `None` when the convection constant is at least 2.
    pub value: Option<f64>,
    pub poten_part: f64,
    pub flux_part: f64,
    pub c_n: f64,
    pub degenerate_fraction: f64,
}

impl SwitchEstimate {
    /// The estimate with an unavailable value read as `+∞`.
    pub fn value_or_inf(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

/// Elements on which `θ′(ψ)` drops below `epsilon` at a quadrature point or
/// a vertex.
pub fn degenerate_elements(space: &FeSpace, model: &dyn Constitutive, psi: &Iterate, epsilon: f64) -> Vec<bool> {
    let nq = space.nq();
    let vertex_tp: Vec<f64> = psi.psi.iter().map(|&p| model.water_content_derivative(p)).collect();
    space
        .mesh
        .triangles
        .iter()
        .enumerate()
        .map(|(e, tri)| {
            let qmin = psi.theta_prime[e * nq..(e + 1) * nq].iter().copied().fold(f64::INFINITY, f64::min);
            let vmin = tri.iter().map(|&v| vertex_tp[v]).fold(f64::INFINITY, f64::min);
            qmin.min(vmin) < epsilon
        })
        .collect()
}

/// Which driving gradient enters the convection constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ConvectionGradient {
    /// `∇(ψ + z)`.
    #[default]
    Full,
    /// Gravity only, `∇z`.
    Gravity,
}

/// `max_q √(τ |K^{-1/2} K′ ∇(ψ + z)|² / θ′)` with `0/0 → 0`, `x/0 → ∞`.
pub fn convection_constant(space: &FeSpace, psi: &Iterate, tau: f64) -> f64 {
    convection_constant_with(space, psi, tau, ConvectionGradient::Full)
}

pub fn convection_constant_with(space: &FeSpace, psi: &Iterate, tau: f64, gradient: ConvectionGradient) -> f64 {
    convection_constant_masked(space, psi, tau, gradient, None)
}

/// As [`convection_constant_with`], skipping elements flagged in `skip`.
pub fn convection_constant_masked(
    space: &FeSpace,
    psi: &Iterate,
    tau: f64,
    gradient: ConvectionGradient,
    skip: Option<&[bool]>,
) -> f64 {
    let nq = space.nq();
    let mut c = 0.0_f64;
    for (k, (&kp, (&kk, &tp))) in psi.k_prime.iter().zip(psi.k.iter().zip(&psi.theta_prime)).enumerate() {
        if skip.is_some_and(|s| s[k / nq]) {
            continue;
        }
        let g = match gradient {
            ConvectionGradient::Full => psi.grad[k / nq],
            ConvectionGradient::Gravity => [0.0, 0.0],
        };
        let num = tau * kp * kp * (g[0] * g[0] + (g[1] + 1.0) * (g[1] + 1.0)) / kk;
        let ratio = if num == 0.0 {
            0.0
        } else if tp <= 0.0 {
            f64::INFINITY
        } else {
            num / tp
        };
        c = c.max(ratio);
    }
    c.sqrt()
}

/// Potential residual on degenerate elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DegeneratePoten {
    /// Left out; only the flux part sees these elements.
    #[default]
    Drop,
    /// Weighted by `1 / max(θ′, ε)`.
    Clamp,
}

/// Tuning of the Newton predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    /// Threshold on `θ′` below which an element counts as degenerate.
    pub epsilon: f64,
    pub convection: ConvectionGradient,
    pub degenerate: DegeneratePoten,
    /// Leave degenerate elements out of the convection constant.
    pub convection_skips_degenerate: bool,
}

impl EstimatorOptions {
    /// The textbook form: full gradient, all elements in `C_N`.
    pub fn new(epsilon: f64) -> Self {
        EstimatorOptions {
            epsilon,
            convection: ConvectionGradient::Full,
            degenerate: DegeneratePoten::Drop,
            convection_skips_degenerate: false,
        }
    }

    /// Gravity-driven `C_N` over the non-degenerate elements, the form that
    /// matches the benchmark switching behaviour.
    pub fn calibrated(epsilon: f64) -> Self {
        EstimatorOptions {
            convection: ConvectionGradient::Gravity,
            convection_skips_degenerate: true,
            ..Self::new(epsilon)
        }
    }
}

fn degenerate_fraction(deg: &[bool]) -> f64 {
    if deg.is_empty() {
        0.0
    } else {
        deg.iter().filter(|&&d| d).count() as f64 / deg.len() as f64
    }
}

/// Shared structure of the two Newton predictors. `residual(k)` is the
/// potential residual at quadrature point `k`, `flux(k)` the flux residual
/// without `σ`.
#[allow(clippy::too_many_arguments)]
fn newton_predictor(
    space: &FeSpace,
    model: &dyn Constitutive,
    psi_i: &Iterate,
    tau: f64,
    sigma: Option<&[[f64; 2]]>,
    opts: EstimatorOptions,
    residual: impl Fn(usize) -> f64,
    flux: impl Fn(usize) -> [f64; 2],
) -> SwitchEstimate {
    let nq = space.nq();
    let deg = degenerate_elements(space, model, psi_i, opts.epsilon);
    let mask = opts.convection_skips_degenerate.then_some(deg.as_slice());
    let c_n = convection_constant_masked(space, psi_i, tau, opts.convection, mask);
    let mut poten2 = 0.0;
    let mut flux2 = 0.0;
    for (e, geo) in space.geometry.iter().enumerate() {
        for q in 0..nq {
            let k = e * nq + q;
            let w = geo.area * space.rule.weights[q];
            if !deg[e] {
                let r = residual(k);
                poten2 += w * r * r / psi_i.theta_prime[k];
            } else if opts.degenerate == DegeneratePoten::Clamp {
                let r = residual(k);
                poten2 += w * r * r / psi_i.theta_prime[k].max(opts.epsilon);
            }
            let mut f = flux(k);
            if let Some(s) = sigma {
                f[0] += s[k][0];
                f[1] += s[k][1];
            }
            flux2 += w * (f[0] * f[0] + f[1] * f[1]) / psi_i.k[k];
        }
    }
    let base = (poten2 + tau * flux2).sqrt();
    let value = (c_n < 2.0).then(|| 2.0 / (2.0 - c_n) * base);
    SwitchEstimate {
        value,
        poten_part: poten2.sqrt(),
        flux_part: flux2.sqrt(),
        c_n,
        degenerate_fraction: degenerate_fraction(&deg),
    }
}

/// Bound on the next Newton increment after an L-scheme step with
/// parameter `l` took `psi_im1` to `psi_i`.
#[allow(clippy::too_many_arguments)]
pub fn eta_l_to_n(
    space: &FeSpace,
    model: &dyn Constitutive,
    psi_i: &Iterate,
    psi_im1: &Iterate,
    tau: f64,
    l: f64,
    sigma: Option<&[[f64; 2]]>,
    opts: EstimatorOptions,
) -> SwitchEstimate {
    let nq = space.nq();
    newton_predictor(
        space,
        model,
        psi_i,
        tau,
        sigma,
        opts,
        |k| l * (psi_i.psi_qp[k] - psi_im1.psi_qp[k]) - (psi_i.theta[k] - psi_im1.theta[k]),
        |k| {
            let g = psi_i.grad[k / nq];
            let dk = psi_i.k[k] - psi_im1.k[k];
            [dk * g[0], dk * (g[1] + 1.0)]
        },
    )
}

/// Bound on the next Newton increment after a Newton step took `psi_im1`
/// to `psi_i`.
pub fn eta_n_to_l(
    space: &FeSpace,
    model: &dyn Constitutive,
    psi_i: &Iterate,
    psi_im1: &Iterate,
    tau: f64,
    sigma: Option<&[[f64; 2]]>,
    opts: EstimatorOptions,
) -> SwitchEstimate {
    let nq = space.nq();
    newton_predictor(
        space,
        model,
        psi_i,
        tau,
        sigma,
        opts,
        |k| {
            psi_im1.theta_prime[k] * (psi_i.psi_qp[k] - psi_im1.psi_qp[k]) - (psi_i.theta[k] - psi_im1.theta[k])
        },
        |k| {
            let g = psi_i.grad[k / nq];
            let gm = psi_im1.grad[k / nq];
            let dk = psi_i.k[k] - psi_im1.k[k];
            let c = psi_im1.k_prime[k] * (psi_i.psi_qp[k] - psi_im1.psi_qp[k]);
            [dk * g[0] - c * gm[0], dk * (g[1] + 1.0) - c * (gm[1] + 1.0)]
        },
    )
}

/// Bound on the next L-scheme increment (same `l`) after an L-scheme step.
pub fn eta_l_to_l(space: &FeSpace, psi_i: &Iterate, psi_im1: &Iterate, tau: f64, l: f64) -> SwitchEstimate {
    let nq = space.nq();
    let mut poten2 = 0.0;
    let mut flux2 = 0.0;
    for (e, geo) in space.geometry.iter().enumerate() {
        let g = psi_i.grad[e];
        let g2 = g[0] * g[0] + (g[1] + 1.0) * (g[1] + 1.0);
        for q in 0..nq {
            let k = e * nq + q;
            let w = geo.area * space.rule.weights[q];
            let r = l * (psi_i.psi_qp[k] - psi_im1.psi_qp[k]) - (psi_i.theta[k] - psi_im1.theta[k]);
            poten2 += w * r * r / l;
            let dk = psi_i.k[k] - psi_im1.k[k];
            flux2 += w * dk * dk * g2 / psi_i.k[k];
        }
    }
    SwitchEstimate {
        value: Some((poten2 + tau * flux2).sqrt()),
        poten_part: poten2.sqrt(),
        flux_part: flux2.sqrt(),
        c_n: 0.0,
        degenerate_fraction: 0.0,
    }
}

/// `estimate_prev / eta_lin_next`; `None` unless the denominator is positive.
pub fn effectivity_index(estimate_prev: f64, eta_lin_next: f64) -> Option<f64> {
    (eta_lin_next > 0.0).then(|| estimate_prev / eta_lin_next)
}
