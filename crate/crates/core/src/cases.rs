//! Problem definitions, including the three built-in benchmarks.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::constitutive::{Constitutive, ConstitutiveModel, VanGenuchtenParams};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::mesh::{BoundaryRegion, Mesh, Rect, Side};

pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct DirichletCondition {
    pub region: BoundaryRegion,
    /// `g(t, x, z)`.
    pub value: SpaceTimeFn,
}

impl fmt::Debug for DirichletCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletCondition").field("region", &self.region).finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct CaseSpec {
    pub name: String,
    pub rect: Rect,
    pub nx: usize,
    pub nz: usize,
    pub tau: f64,
    pub steps: usize,
    pub params: Option<VanGenuchtenParams>,
    pub model: Arc<dyn Constitutive>,
    pub initial: SpaceFn,
    pub dirichlet: Vec<DirichletCondition>,
    /// `f(t, x, z)`.
    pub source: SpaceTimeFn,
    pub l1: f64,
    pub l2: f64,
}

impl fmt::Debug for CaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseSpec")
            .field("name", &self.name)
            .field("rect", &self.rect)
            .field("nx", &self.nx)
            .field("nz", &self.nz)
            .field("tau", &self.tau)
            .field("steps", &self.steps)
            .field("params", &self.params)
            .field("dirichlet", &self.dirichlet)
            .field("l1", &self.l1)
            .field("l2", &self.l2)
            .finish_non_exhaustive()
    }
}

impl CaseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(Error::InvalidParameter(format!("mesh {}x{}", self.nx, self.nz)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau = {}", self.tau)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps = 0".into()));
        }
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(Error::InvalidParameter(format!("L values {} {}", self.l1, self.l2)));
        }
        if let Some(p) = &self.params {
            p.validate()?;
        }
        Ok(())
    }

    pub fn with_mesh(mut self, nx: usize, nz: usize) -> Self {
        self.nx = nx;
        self.nz = nz;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    /// Replaces the van Genuchten parameters and the model built from them.
    pub fn with_params(mut self, params: VanGenuchtenParams) -> Result<Self> {
        self.model = Arc::new(ConstitutiveModel::new(params)?);
        self.params = Some(params);
        Ok(self)
    }

    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::build_structured(self.nx, self.nz, self.rect)
    }

    pub fn space(&self) -> Result<FeSpace> {
        Ok(FeSpace::new(self.mesh()?))
    }
}

fn vg(theta_r: f64, theta_s: f64, k_s: f64, alpha: f64, n_vg: f64) -> VanGenuchtenParams {
    VanGenuchtenParams { theta_r, theta_s, k_s, alpha, n_vg }
}

pub fn case1_params() -> VanGenuchtenParams {
    vg(0.026, 0.42, 0.12, 0.551, 2.9)
}

pub fn case2_params() -> VanGenuchtenParams {
    vg(0.026, 0.42, 0.12, 0.95, 2.9)
}

pub fn case3_params() -> VanGenuchtenParams {
    vg(0.131, 0.396, 4.96e-2, 0.423, 2.06)
}

/// Strictly unsaturated unit square, one step of size `tau`.
pub fn case1() -> CaseSpec {
    let params = case1_params();
    let rect = Rect::unit();
    let initial = |_x: f64, z: f64| if z <= 0.25 { -z - 0.25 } else { -4.0 };
    CaseSpec {
        name: "case1".into(),
        rect,
        nx: 40,
        nz: 40,
        tau: 0.01,
        steps: 1,
        params: Some(params),
        model: Arc::new(ConstitutiveModel::new(params).expect("valid parameters")),
        initial: Arc::new(initial),
        dirichlet: vec![DirichletCondition {
            region: BoundaryRegion::side("top", rect, Side::Top),
            value: Arc::new(move |_, x, z| initial(x, z)),
        }],
        source: Arc::new(|_, x, z| if z <= 0.25 { 0.0 } else { 0.06 * (4.0 * PI * z / 3.0).cos() * x.sin() }),
        l1: 0.1,
        l2: 0.136,
    }
}

/// Variably saturated unit square with a groundwater zone below `z = 1/4`.
/// `silt_loam = true` swaps in the parameters of the third benchmark.
pub fn case2_with(silt_loam: bool) -> CaseSpec {
    let params = if silt_loam { case3_params() } else { case2_params() };
    let rect = Rect::unit();
    let initial = |_x: f64, z: f64| if z < 0.25 { 0.25 - z } else { -3.0 };
    let (l1, l2) = if silt_loam { (3.501e-2, 4.501e-2) } else { (0.15, 0.2341) };
    CaseSpec {
        name: "case2".into(),
        rect,
        nx: 40,
        nz: 40,
        tau: 0.01,
        steps: 1,
        params: Some(params),
        model: Arc::new(ConstitutiveModel::new(params).expect("valid parameters")),
        initial: Arc::new(initial),
        dirichlet: vec![DirichletCondition {
            region: BoundaryRegion::side("top", rect, Side::Top),
            value: Arc::new(move |_, x, z| initial(x, z)),
        }],
        source: Arc::new(|_, x, z| {
            if z < 0.25 {
                0.0
            } else {
                0.006 * (4.0 * PI * (z - 1.0) / 3.0).cos() * (2.0 * PI * x).sin()
            }
        }),
        l1,
        l2,
    }
}

pub fn case2() -> CaseSpec {
    case2_with(false)
}

/// Recharge of a groundwater reservoir from a drainage trench on
/// `[0,2]×[0,3]`, 9 steps of `1/48` days on 2501 nodes.
pub fn case3() -> CaseSpec {
    let params = case3_params();
    let rect = Rect::new(0.0, 0.0, 2.0, 3.0);
    let model = ConstitutiveModel::new(params).expect("valid parameters");
    CaseSpec {
        name: "case3".into(),
        rect,
        nx: 40,
        nz: 60,
        tau: 1.0 / 48.0,
        steps: 9,
        params: Some(params),
        model: Arc::new(model),
        initial: Arc::new(|_, z| 1.0 - z),
        dirichlet: vec![
            DirichletCondition {
                region: BoundaryRegion::segment("trench", rect, Side::Top, 0.0, 1.0),
                value: Arc::new(|t, _, _| trench_head(t)),
            },
            DirichletCondition {
                region: BoundaryRegion::segment("reservoir", rect, Side::Right, 0.0, 1.0),
                value: Arc::new(|_, _, z| 1.0 - z),
            },
        ],
        source: Arc::new(|_, _, _| 0.0),
        l1: 3.501e-2,
        l2: 4.501e-2,
    }
}

/// Ramped trench pressure head.
pub fn trench_head(t: f64) -> f64 {
    if t <= 1.0 / 16.0 {
        -2.0 + 35.2 * t
    } else {
        0.2
    }
}

pub fn builtin_cases() -> Vec<CaseSpec> {
    vec![case1(), case2(), case3()]
}

pub fn builtin_case(name: &str) -> Option<CaseSpec> {
    match name {
        "case1" | "1" => Some(case1()),
        "case2" | "2" => Some(case2()),
        "case3" | "3" => Some(case3()),
        _ => None,
    }
}
