//! Helpers shared by the integration tests: an element toolkit written
//! independently of the library's assembly code, and a manufactured
//! solution problem.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2, Vector2};
use richards_core::fem::QuadratureRule;
use richards_core::{
    case1, CaseSpec, Constitutive, ConstitutiveModel, DirichletCondition, FeSpace, Mesh, Rect,
};
pub mod rt0;
pub mod suite;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Vertex coordinates of element `e`.
pub fn corners(mesh: &Mesh, e: usize) -> [[f64; 2]; 3] {
    let t = mesh.triangles[e];
    [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]
}

pub fn area(p: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs()
}

/// Barycentric coordinates of `x`, by solving the 2×2 affine system.
pub fn barycentric(p: &[[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let m = Matrix2::new(p[1][0] - p[0][0], p[2][0] - p[0][0], p[1][1] - p[0][1], p[2][1] - p[0][1]);
    let r = m.lu().solve(&Vector2::new(x[0] - p[0][0], x[1] - p[0][1])).expect("nondegenerate triangle");
    [1.0 - r[0] - r[1], r[0], r[1]]
}

/// Gradients of the three barycentric functions.
pub fn basis_gradients(p: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let m = Matrix2::new(p[1][0] - p[0][0], p[2][0] - p[0][0], p[1][1] - p[0][1], p[2][1] - p[0][1]);
    let inv = m.try_inverse().expect("nondegenerate triangle");
    // λ1 = row 0 of inv applied to (x − p0), λ2 = row 1.
    let g1 = [inv[(0, 0)], inv[(0, 1)]];
    let g2 = [inv[(1, 0)], inv[(1, 1)]];
    [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
}

/// Physical quadrature points and weights (summing to the area) of a rule.
pub fn physical_rule(p: &[[f64; 2]; 3], rule: &QuadratureRule) -> Vec<([f64; 2], f64)> {
    let a = area(p);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(b, w)| {
            let x = [
                b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
                b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
            ];
            (x, a * w)
        })
        .collect()
}

/// Seven-point rule, exact for quintics.
pub fn seven_point() -> QuadratureRule {
    let s = 15f64.sqrt();
    let a1 = (6.0 - s) / 21.0;
    let a2 = (6.0 + s) / 21.0;
    let w1 = (155.0 - s) / 1200.0;
    let w2 = (155.0 + s) / 1200.0;
    let (b1, b2) = (1.0 - 2.0 * a1, 1.0 - 2.0 * a2);
    QuadratureRule {
        points: vec![
            [1.0 / 3.0; 3],
            [b1, a1, a1],
            [a1, b1, a1],
            [a1, a1, b1],
            [b2, a2, a2],
            [a2, b2, a2],
            [a2, a2, b2],
        ],
        weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
        degree: 5,
    }
}

/// The degree-2 rule written out from its definition.
pub fn midpoint_rule() -> QuadratureRule {
    let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
    QuadratureRule { points: vec![[a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 3.0; 3], degree: 2 }
}

/// Value of the P1 field `u` at `x` inside element `e`.
pub fn p1_value(mesh: &Mesh, u: &[f64], e: usize, x: [f64; 2]) -> f64 {
    let p = corners(mesh, e);
    let l = barycentric(&p, x);
    let t = mesh.triangles[e];
    l[0] * u[t[0]] + l[1] * u[t[1]] + l[2] * u[t[2]]
}

pub fn p1_gradient(mesh: &Mesh, u: &[f64], e: usize) -> [f64; 2] {
    let g = basis_gradients(&corners(mesh, e));
    let t = mesh.triangles[e];
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += u[t[k]] * g[k][0];
        out[1] += u[t[k]] * g[k][1];
    }
    out
}

/// Dense `∫ w φ_i φ_j` with `w(e, x)` under `rule`.
pub fn dense_mass(mesh: &Mesh, rule: &QuadratureRule, w: impl Fn(usize, [f64; 2]) -> f64) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut m = DMatrix::zeros(n, n);
    for e in 0..mesh.num_elements() {
        let p = corners(mesh, e);
        let t = mesh.triangles[e];
        for (x, wq) in physical_rule(&p, rule) {
            let l = barycentric(&p, x);
            let c = wq * w(e, x);
            for i in 0..3 {
                for j in 0..3 {
                    m[(t[i], t[j])] += c * l[i] * l[j];
                }
            }
        }
    }
    m
}

/// Dense `τ ∫ c ∇φ_j · ∇φ_i`.
pub fn dense_stiffness(mesh: &Mesh, rule: &QuadratureRule, tau: f64, c: impl Fn(usize, [f64; 2]) -> f64) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut m = DMatrix::zeros(n, n);
    for e in 0..mesh.num_elements() {
        let p = corners(mesh, e);
        let g = basis_gradients(&p);
        let t = mesh.triangles[e];
        for (x, wq) in physical_rule(&p, rule) {
            let s = tau * wq * c(e, x);
            for i in 0..3 {
                for j in 0..3 {
                    m[(t[i], t[j])] += s * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
    }
    m
}

/// Dense `τ ∫ (b φ_j) · ∇φ_i`.
pub fn dense_convection(
    mesh: &Mesh,
    rule: &QuadratureRule,
    tau: f64,
    b: impl Fn(usize, [f64; 2]) -> [f64; 2],
) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut m = DMatrix::zeros(n, n);
    for e in 0..mesh.num_elements() {
        let p = corners(mesh, e);
        let g = basis_gradients(&p);
        let t = mesh.triangles[e];
        for (x, wq) in physical_rule(&p, rule) {
            let l = barycentric(&p, x);
            let bv = b(e, x);
            for i in 0..3 {
                let bi = bv[0] * g[i][0] + bv[1] * g[i][1];
                for j in 0..3 {
                    m[(t[i], t[j])] += tau * wq * bi * l[j];
                }
            }
        }
    }
    m
}

pub fn to_dense(a: &richards_core::fem::CsrMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.n, a.n);
    for i in 0..a.n {
        for (j, v) in a.row(i) {
            m[(i, j)] += v;
        }
    }
    m
}

pub fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.amax().max(1e-300);
    (a - b).amax() / scale
}

/// Quadrature-point values `f(e, x)` in the layout `FeSpace` expects.
pub fn at_space_points(space: &FeSpace, f: impl Fn(usize, [f64; 2]) -> f64) -> Vec<f64> {
    let nq = space.nq();
    space.points.iter().enumerate().map(|(k, &x)| f(k / nq, x)).collect()
}

/// Smooth strictly unsaturated solution of the Richards equation on the
/// unit square, with Dirichlet data on the whole boundary.
pub struct Manufactured {
    pub model: Arc<ConstitutiveModel>,
}

impl Manufactured {
    pub fn new() -> Self {
        let params = case1().params.expect("parameters");
        Manufactured { model: Arc::new(ConstitutiveModel::new(params).expect("valid")) }
    }

    pub fn exact(t: f64, x: f64, z: f64) -> f64 {
        -1.0 - 0.5 * (PI * x).sin() * (PI * z).sin() - 0.5 * t
    }

    fn source(model: &ConstitutiveModel, t: f64, x: f64, z: f64) -> f64 {
        let psi = Self::exact(t, x, z);
        let psi_t = -0.5;
        let gx = -0.5 * PI * (PI * x).cos() * (PI * z).sin();
        let gz = -0.5 * PI * (PI * x).sin() * (PI * z).cos();
        let lap = PI * PI * (PI * x).sin() * (PI * z).sin();
        let k = model.conductivity(psi);
        let kp = model.conductivity_derivative(psi);
        model.water_content_derivative(psi) * psi_t - (kp * (gx * gx + gz * (gz + 1.0)) + k * lap)
    }

    pub fn case(&self, n: usize, tau: f64, steps: usize) -> CaseSpec {
        let model = self.model.clone();
        let src_model = self.model.clone();
        let mut spec = case1().with_mesh(n, n).with_tau(tau).with_steps(steps);
        spec.name = "manufactured".into();
        spec.rect = Rect::unit();
        spec.model = model;
        spec.initial = Arc::new(|x, z| Self::exact(0.0, x, z));
        spec.dirichlet = vec![DirichletCondition {
            region: richards_core::BoundaryRegion::new("all", |_| true),
            value: Arc::new(Self::exact),
        }];
        spec.source = Arc::new(move |t, x, z| Self::source(&src_model, t, x, z));
        spec
    }

    /// `‖u_h − u(t)‖_{L²}` with a degree-5 rule.
    pub fn l2_error(space: &FeSpace, u: &[f64], t: f64) -> f64 {
        let rule = seven_point();
        let mesh = &space.mesh;
        let mut s = 0.0;
        for e in 0..mesh.num_elements() {
            let p = corners(mesh, e);
            for (x, w) in physical_rule(&p, &rule) {
                let d = p1_value(mesh, u, e, x) - Self::exact(t, x[0], x[1]);
                s += w * d * d;
            }
        }
        s.sqrt()
    }
}

/// Observed orders `log2(e_k / e_{k+1})` for mesh sizes halving.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// L² errors of the manufactured problem with Newton on `n × n` meshes.
pub fn manufactured_errors(sizes: &[usize], tau: f64, steps: usize) -> Vec<f64> {
    use richards_core::{run_case, SchemeKind, SolverConfig, Strategy};
    let m = Manufactured::new();
    sizes
        .iter()
        .map(|&n| {
            let spec = m.case(n, tau, steps);
            let mut cfg = SolverConfig::new(Strategy::Fixed(SchemeKind::Newton));
            cfg.stop_tol = 1e-12;
            cfg.record_timing = false;
            let report = run_case(&spec, &cfg).expect("valid case");
            assert!(report.converged(), "manufactured run on {n}x{n} did not converge");
            let space = spec.space().expect("mesh");
            Manufactured::l2_error(&space, &report.final_field, tau * steps as f64)
        })
        .collect()
}

/// `θ = 0.3 + 0.1 tanh ψ` with constant conductivity.
#[derive(Debug)]
pub struct TanhModel;

impl Constitutive for TanhModel {
    fn water_content(&self, psi: f64) -> f64 {
        0.3 + 0.1 * psi.tanh()
    }
    fn water_content_derivative(&self, psi: f64) -> f64 {
        0.1 / psi.cosh().powi(2)
    }
    fn conductivity(&self, _: f64) -> f64 {
        0.7
    }
    fn conductivity_derivative(&self, _: f64) -> f64 {
        0.0
    }
    fn saturated_conductivity(&self) -> f64 {
        0.7
    }
    fn sup_theta_prime(&self) -> f64 {
        0.1
    }
    fn water_content_range(&self) -> (f64, f64) {
        (0.2, 0.4)
    }
}
