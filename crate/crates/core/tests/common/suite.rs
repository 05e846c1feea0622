//! A compact run of the dense oracles, reported as deviations against
//! per-operation tolerances.

use nalgebra::DVector;
use richards_core::eqflux::{project_piecewise_constant, EqFluxSolver};
use richards_core::fem::NormKind;
use richards_core::linearize::{generic_step, Iterate, TimeLevel};
use richards_core::{case1, BoundaryRegion, DiscreteField, FeSpace, Mesh, Rect, SchemeKind};

use super::rt0::{constrained_minimizer, Rt0};
use super::*;

pub struct Check {
    pub name: &'static str,
    pub deviation: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tol
    }
}

fn space(n: usize) -> FeSpace {
    FeSpace::new(Mesh::build_structured(n, n, Rect::unit()).expect("mesh"))
}

pub fn oracle_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let s = space(2);
    let m = case1().model;
    let mut r = rng(101);
    let psi = random_vec(&mut r, s.num_dofs(), -3.0, -0.2);
    let psi_qp = s.interpolate(&psi);
    let at = |e: usize, x: [f64; 2]| p1_value(&s.mesh, &psi, e, x);

    let w: Vec<f64> = psi_qp.iter().map(|&p| m.water_content_derivative(p)).collect();
    let oracle = dense_mass(&s.mesh, &midpoint_rule(), |e, x| m.water_content_derivative(at(e, x)));
    out.push(Check { name: "mass", deviation: max_rel_diff(&to_dense(&s.assemble_weighted_mass(&w)), &oracle), tol: 1e-10 });

    let k: Vec<f64> = psi_qp.iter().map(|&p| m.conductivity(p)).collect();
    let oracle = dense_stiffness(&s.mesh, &midpoint_rule(), 0.3, |e, x| m.conductivity(at(e, x)));
    out.push(Check {
        name: "stiffness",
        deviation: max_rel_diff(&to_dense(&s.assemble_weighted_stiffness(&k, 0.3)), &oracle),
        tol: 1e-10,
    });

    let nq = s.nq();
    let grads = s.gradients(&psi);
    let b: Vec<[f64; 2]> = psi_qp
        .iter()
        .enumerate()
        .map(|(q, &p)| {
            let kp = m.conductivity_derivative(p);
            [kp * grads[q / nq][0], kp * (grads[q / nq][1] + 1.0)]
        })
        .collect();
    let oracle = dense_convection(&s.mesh, &midpoint_rule(), 0.01, |e, x| {
        let kp = m.conductivity_derivative(at(e, x));
        let g = p1_gradient(&s.mesh, &psi, e);
        [kp * g[0], kp * (g[1] + 1.0)]
    });
    out.push(Check {
        name: "convection",
        deviation: max_rel_diff(&to_dense(&s.assemble_convection(&b, 0.01)), &oracle),
        tol: 1e-10,
    });

    let tau = 0.01;
    let old = random_vec(&mut r, s.num_dofs(), -3.0, -0.5);
    let spec = case1();
    let f = spec.source.clone();
    let th = |u: &[f64]| -> Vec<f64> { s.interpolate(u).iter().map(|&p| m.water_content(p)).collect() };
    let ours = s.assemble_rhs(&s.at_points(|x, z| f(tau, x, z)), tau, &th(&old), &th(&psi), &k, Some(&grads));
    let mut oracle = vec![0.0; s.num_dofs()];
    for e in 0..s.num_elements() {
        let p = corners(&s.mesh, e);
        let g = basis_gradients(&p);
        let gp = p1_gradient(&s.mesh, &psi, e);
        let t = s.mesh.triangles[e];
        for (x, wq) in physical_rule(&p, &midpoint_rule()) {
            let l = barycentric(&p, x);
            let (prev, o) = (at(e, x), p1_value(&s.mesh, &old, e, x));
            let mass = tau * f(tau, x[0], x[1]) - (m.water_content(prev) - m.water_content(o));
            for i in 0..3 {
                let flux = tau * m.conductivity(prev) * (gp[0] * g[i][0] + (gp[1] + 1.0) * g[i][1]);
                oracle[t[i]] += wq * (mass * l[i] - flux);
            }
        }
    }
    let scale = oracle.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dev = ours.iter().zip(&oracle).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale;
    out.push(Check { name: "rhs", deviation: dev, tol: 1e-10 });

    let xi = random_vec(&mut r, s.num_dofs(), -1.0, 1.0);
    let ours = s.energy_norm(&xi, NormKind::Newton, &psi, tau, m.as_ref());
    let a = dense_mass(&s.mesh, &midpoint_rule(), |e, x| m.water_content_derivative(at(e, x)))
        + dense_stiffness(&s.mesh, &midpoint_rule(), tau, |e, x| m.conductivity(at(e, x)));
    let v = DVector::from_vec(xi);
    let oracle = (v.transpose() * a * &v)[(0, 0)].sqrt();
    out.push(Check { name: "energy norm", deviation: (ours - oracle).abs() / oracle, tol: 1e-10 });

    let theta: Vec<f64> = psi_qp.iter().map(|&p| m.water_content(p)).collect();
    let dev = project_piecewise_constant(&s, &theta)
        .iter()
        .enumerate()
        .map(|(e, v)| {
            let p = corners(&s.mesh, e);
            let mean = physical_rule(&p, &midpoint_rule()).iter().map(|(x, wq)| wq * m.water_content(at(e, *x))).sum::<f64>()
                / area(&p);
            (v - mean).abs()
        })
        .fold(0.0, f64::max);
    out.push(Check { name: "projection", deviation: dev, tol: 1e-10 });

    for (name, mesh) in [
        ("eqflux 2 elements", Mesh::build_structured(1, 1, Rect::unit()).expect("mesh")),
        ("eqflux 8 elements", Mesh::build_structured(2, 2, Rect::new(0.0, 0.0, 2.0, 1.0)).expect("mesh")),
    ] {
        let k_s = 0.12;
        let div = random_vec(&mut r, mesh.num_elements(), -1.0, 1.0);
        let solver = EqFluxSolver::new(&mesh, k_s).expect("saddle point system");
        let sigma = solver.solve_divergence(&mesh, &div).expect("solve");
        let rt = Rt0 { mesh: &mesh };
        let (mm, bb) = rt.system(k_s);
        let d = DVector::from_iterator(div.len(), div.iter().enumerate().map(|(e, v)| v * area(&corners(&mesh, e))));
        let oracle = constrained_minimizer(&mm, &bb, &d);
        let norm = (oracle.transpose() * &mm * &oracle)[(0, 0)].sqrt();
        let coeff_dev = sigma.coeffs.iter().zip(oracle.iter()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let norm_dev = (sigma.weighted_norm(&mesh, &solver.signs, k_s) - norm).abs();
        out.push(Check { name, deviation: coeff_dev.max(norm_dev), tol: 1e-8 });
    }

    let s6 = space(6);
    let model = TanhModel;
    let old = DiscreteField::new(random_vec(&mut r, s6.num_dofs(), -1.0, 1.0));
    let prev = Iterate::new(&s6, &model, DiscreteField::new(random_vec(&mut r, s6.num_dofs(), -1.0, 1.0)));
    let dofs = s6.mesh.tag_boundary(&BoundaryRegion::new("all", |_| true));
    let level = TimeLevel::new(&s6, &model, 0.05, &old, s6.at_points(|x, z| x - z), dofs);
    let a = generic_step(&level, &prev, SchemeKind::ModifiedPicard).expect("step");
    let b = generic_step(&level, &prev, SchemeKind::Newton).expect("step");
    let dev = a.iterate.psi.iter().zip(b.iterate.psi.iter()).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    out.push(Check { name: "modified Picard vs Newton", deviation: dev, tol: 1e-10 });
    out
}
