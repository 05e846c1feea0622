//! Water-content and conductivity curves.
//!
//! The solver only ever talks to the [`Constitutive`] trait; the
//! van Genuchten–Mualem closure used by the benchmark cases lives in
//! [`ConstitutiveModel`], and [`LinearModel`] is a linear closure with
//! constant conductivity that several tests rely on because every
//! linearization is exact for it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pressure range `[lo, hi]` over which curve bounds are extracted.
pub const WORKING_RANGE: (f64, f64) = (-50.0, 5.0);

/// A pressure-head based closure `ψ ↦ (θ(ψ), K(θ(ψ)))`.
pub trait Constitutive: Send + Sync + std::fmt::Debug {
    fn water_content(&self, psi: f64) -> f64;
    fn water_content_derivative(&self, psi: f64) -> f64;
    fn conductivity(&self, psi: f64) -> f64;
    fn conductivity_derivative(&self, psi: f64) -> f64;
    /// Conductivity of the fully saturated medium, `K(Θ = 1)`.
    fn saturated_conductivity(&self) -> f64;
    /// `sup θ′` over the working range.
    fn sup_theta_prime(&self) -> f64;
    /// Bounds on θ, used when reporting saturations.
    fn water_content_range(&self) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanGenuchtenParams {
    pub theta_r: f64,
    pub theta_s: f64,
    /// Saturated conductivity [m/day].
    pub k_s: f64,
    /// Inverse capillary length [1/m].
    pub alpha: f64,
    pub n_vg: f64,
}

impl VanGenuchtenParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        let finite = [p.theta_r, p.theta_s, p.k_s, p.alpha, p.n_vg]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("van Genuchten parameters must be finite".into()));
        }
        if !(0.0 <= p.theta_r && p.theta_r < p.theta_s && p.theta_s <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= theta_r < theta_s <= 1, got theta_r={} theta_s={}",
                p.theta_r, p.theta_s
            )));
        }
        if p.k_s <= 0.0 || p.alpha <= 0.0 || p.n_vg <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "need k_s > 0, alpha > 0, n > 1, got k_s={} alpha={} n={}",
                p.k_s, p.alpha, p.n_vg
            )));
        }
        Ok(())
    }

    fn m(&self) -> f64 {
        (self.n_vg - 1.0) / self.n_vg
    }
}

/// Van Genuchten–Mualem closure together with the global bounds the
/// estimators and the L-scheme need.
#[derive(Debug, Clone, Serialize)]
pub struct ConstitutiveModel {
    pub params: VanGenuchtenParams,
    /// `sup θ′`.
    pub l_theta: f64,
    /// `inf θ′` over the working range.
    pub theta_m: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Lipschitz constant of `ψ ↦ K(θ(ψ))`.
    pub l_kappa: f64,
}

impl ConstitutiveModel {
    pub fn new(params: VanGenuchtenParams) -> Result<Self> {
        params.validate()?;
        let mut model = ConstitutiveModel {
            params,
            l_theta: 0.0,
            theta_m: 0.0,
            kappa_min: 0.0,
            kappa_max: params.k_s,
            l_kappa: 0.0,
        };
        let (lo, hi) = WORKING_RANGE;
        model.l_theta = maximize(|p| model.theta_prime(p), lo, 0.0);
        model.l_kappa = maximize(|p| model.k_prime(p), lo, 0.0);
        // θ′ vanishes on the saturated plateau inside the working range.
        model.theta_m = if hi > 0.0 { 0.0 } else { model.theta_prime(lo).min(model.theta_prime(hi)) };
        // K∘θ is nondecreasing, so its minimum sits at the lower end.
        model.kappa_min = model.k(lo);
        Ok(model)
    }

    /// Effective saturation `Θ(ψ)` together with `s = (α|ψ|)^n`.
    fn effective(&self, psi: f64) -> (f64, f64) {
        if psi > 0.0 {
            return (1.0, 0.0);
        }
        let p = &self.params;
        let s = (-p.alpha * psi).powf(p.n_vg);
        ((1.0 + s).powf(-p.m()), s)
    }

    fn theta(&self, psi: f64) -> f64 {
        let p = &self.params;
        if psi > 0.0 {
            return p.theta_s;
        }
        let (big_theta, _) = self.effective(psi);
        p.theta_r + (p.theta_s - p.theta_r) * big_theta
    }

    fn theta_prime(&self, psi: f64) -> f64 {
        if psi >= 0.0 {
            return 0.0;
        }
        let p = &self.params;
        let m = p.m();
        let a = -p.alpha * psi;
        let s = a.powf(p.n_vg);
        (p.theta_s - p.theta_r) * m * p.n_vg * p.alpha * a.powf(p.n_vg - 1.0) * (1.0 + s).powf(-m - 1.0)
    }

    fn k(&self, psi: f64) -> f64 {
        let p = &self.params;
        if psi > 0.0 {
            return p.k_s;
        }
        let (big_theta, s) = self.effective(psi);
        let u = s / (1.0 + s);
        let b = 1.0 - u.powf(p.m());
        p.k_s * big_theta.sqrt() * b * b
    }

    fn k_prime(&self, psi: f64) -> f64 {
        if psi >= 0.0 {
            return 0.0;
        }
        let p = &self.params;
        let m = p.m();
        let n = p.n_vg;
        let a = -p.alpha * psi;
        let s = a.powf(n);
        let big_theta = (1.0 + s).powf(-m);
        let b = 1.0 - (s / (1.0 + s)).powf(m);
        let d_big_theta = m * n * p.alpha * a.powf(n - 1.0) * (1.0 + s).powf(-m - 1.0);
        let d_b = m * n * p.alpha * a.powf(n - 2.0) * (1.0 + s).powf(-1.0 - m);
        p.k_s * (0.5 * b * b * d_big_theta / big_theta.sqrt() + 2.0 * big_theta.sqrt() * b * d_b)
    }
}

impl Constitutive for ConstitutiveModel {
    fn water_content(&self, psi: f64) -> f64 {
        self.theta(psi)
    }
    fn water_content_derivative(&self, psi: f64) -> f64 {
        self.theta_prime(psi)
    }
    fn conductivity(&self, psi: f64) -> f64 {
        self.k(psi)
    }
    fn conductivity_derivative(&self, psi: f64) -> f64 {
        self.k_prime(psi)
    }
    fn saturated_conductivity(&self) -> f64 {
        self.params.k_s
    }
    fn sup_theta_prime(&self) -> f64 {
        self.l_theta
    }
    fn water_content_range(&self) -> (f64, f64) {
        (self.params.theta_r, self.params.theta_s)
    }
}

/// `θ(ψ) = slope·ψ + offset`, `K ≡ k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub slope: f64,
    pub offset: f64,
    pub k: f64,
}

impl Constitutive for LinearModel {
    fn water_content(&self, psi: f64) -> f64 {
        self.slope * psi + self.offset
    }
    fn water_content_derivative(&self, _psi: f64) -> f64 {
        self.slope
    }
    fn conductivity(&self, _psi: f64) -> f64 {
        self.k
    }
    fn conductivity_derivative(&self, _psi: f64) -> f64 {
        0.0
    }
    fn saturated_conductivity(&self) -> f64 {
        self.k
    }
    fn sup_theta_prime(&self) -> f64 {
        self.slope
    }
    fn water_content_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Maximum of `f` on `[lo, hi]`: dense scan followed by golden-section
/// refinement around the best grid point.
pub(crate) fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const SAMPLES: usize = 20_000;
    let step = (hi - lo) / SAMPLES as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..=SAMPLES {
        let v = f(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    best.max(golden_section_max(&f, a, b, 1e-13))
}

pub(crate) fn golden_section_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd).max(f(a)).max(f(b))
}
