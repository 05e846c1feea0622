//! P1 finite-element forms on a [`Mesh`].
//!
//! Coefficient fields are passed as values at quadrature points, flattened
//! as `e * nq + q` for element `e` and point `q`. Vector coefficients use
//! the same layout. All nonlinear coefficients are evaluated from the
//! P1-interpolated pressure head at those points.

pub mod quadrature;
pub mod solve;
pub mod sparse;

use std::ops::{Deref, DerefMut};

use crate::constitutive::Constitutive;
use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, Mesh};

pub use quadrature::QuadratureRule;
pub use solve::{solve_linear, BandedLu, LinearSolver};
pub use sparse::{apply_dirichlet, CsrMatrix};

/// Nodal values of a P1 function.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiscreteField {
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(values: Vec<f64>) -> Self {
        DiscreteField { values }
    }

    pub fn zeros(n: usize) -> Self {
        DiscreteField { values: vec![0.0; n] }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn difference(&self, other: &DiscreteField) -> DiscreteField {
        DiscreteField::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }
}

impl Deref for DiscreteField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for DiscreteField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Which linearization weight enters the energy norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// Constant weight `L`.
    LScheme(f64),
    /// Weight `θ′(ψ_prev)`.
    Newton,
}

/// Mesh plus cached element geometry, quadrature and the P1 sparsity
/// pattern.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Mesh,
    pub geometry: Vec<ElementGeometry>,
    pub rule: QuadratureRule,
    /// Physical quadrature points, `e * nq + q`.
    pub points: Vec<[f64; 2]>,
    pattern: CsrMatrix,
    /// Position in `pattern.values` of local entry `(i, j)` at `3 * i + j`.
    local_pos: Vec<[usize; 9]>,
}

impl FeSpace {
    pub fn new(mesh: Mesh) -> Self {
        Self::with_rule(mesh, QuadratureRule::three_point())
    }

    pub fn with_rule(mesh: Mesh, rule: QuadratureRule) -> Self {
        let geometry: Vec<_> = (0..mesh.num_elements()).map(|e| mesh.element_geometry(e)).collect();
        let mut points = Vec::with_capacity(mesh.num_elements() * rule.len());
        for e in 0..mesh.num_elements() {
            for p in &rule.points {
                points.push(mesh.point(e, *p));
            }
        }
        let mut rows = vec![Vec::new(); mesh.num_vertices()];
        for t in &mesh.triangles {
            for &i in t {
                rows[i].extend_from_slice(t);
            }
        }
        let pattern = CsrMatrix::from_rows(rows);
        let local_pos = mesh
            .triangles
            .iter()
            .map(|t| {
                let mut pos = [0; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        pos[3 * i + j] = pattern.position(t[i], t[j]).expect("pattern entry");
                    }
                }
                pos
            })
            .collect();
        FeSpace { mesh, geometry, rule, points, pattern, local_pos }
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    /// Number of quadrature points per element.
    pub fn nq(&self) -> usize {
        self.rule.len()
    }

    pub fn zero_matrix(&self) -> CsrMatrix {
        self.pattern.clone()
    }

    fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.num_dofs() {
            return Err(Error::DimensionMismatch { expected: self.num_dofs(), got: field.len() });
        }
        Ok(())
    }

    /// Values of the P1 interpolant at all quadrature points.
    pub fn interpolate(&self, field: &[f64]) -> Vec<f64> {
        debug_assert!(self.check_len(field).is_ok());
        let mut out = Vec::with_capacity(self.points.len());
        for t in &self.mesh.triangles {
            for p in &self.rule.points {
                out.push(p[0] * field[t[0]] + p[1] * field[t[1]] + p[2] * field[t[2]]);
            }
        }
        out
    }

    /// Elementwise constant gradients of a P1 field.
    pub fn gradients(&self, field: &[f64]) -> Vec<[f64; 2]> {
        self.mesh
            .triangles
            .iter()
            .zip(&self.geometry)
            .map(|(t, g)| {
                let mut d = [0.0; 2];
                for k in 0..3 {
                    d[0] += field[t[k]] * g.grads[k][0];
                    d[1] += field[t[k]] * g.grads[k][1];
                }
                d
            })
            .collect()
    }

    /// Evaluates a function of the physical coordinates at every
    /// quadrature point.
    pub fn at_points(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.points.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Nodal interpolation of a function of the coordinates.
    pub fn nodal(&self, f: impl Fn(f64, f64) -> f64) -> DiscreteField {
        DiscreteField::new(self.mesh.vertices.iter().map(|p| f(p[0], p[1])).collect())
    }

    /// `∫ w φ_i φ_j`.
    pub fn assemble_weighted_mass(&self, w: &[f64]) -> CsrMatrix {
        let nq = self.nq();
        let mut m = self.zero_matrix();
        for (e, g) in self.geometry.iter().enumerate() {
            let mut local = [0.0; 9];
            for (q, (p, wq)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                let c = g.area * wq * w[e * nq + q];
                for i in 0..3 {
                    for j in 0..3 {
                        local[3 * i + j] += c * p[i] * p[j];
                    }
                }
            }
            for (k, &pos) in self.local_pos[e].iter().enumerate() {
                m.values[pos] += local[k];
            }
        }
        m
    }

    /// `τ ∫ c ∇φ_j · ∇φ_i`.
    pub fn assemble_weighted_stiffness(&self, c: &[f64], tau: f64) -> CsrMatrix {
        let nq = self.nq();
        let mut m = self.zero_matrix();
        for (e, g) in self.geometry.iter().enumerate() {
            let mean: f64 = (0..nq).map(|q| self.rule.weights[q] * c[e * nq + q]).sum();
            let s = tau * g.area * mean;
            for i in 0..3 {
                for j in 0..3 {
                    let d = g.grads[i][0] * g.grads[j][0] + g.grads[i][1] * g.grads[j][1];
                    m.values[self.local_pos[e][3 * i + j]] += s * d;
                }
            }
        }
        m
    }

    /// `τ ∫ (b φ_j) · ∇φ_i`.
    pub fn assemble_convection(&self, b: &[[f64; 2]], tau: f64) -> CsrMatrix {
        let nq = self.nq();
        let mut m = self.zero_matrix();
        for (e, g) in self.geometry.iter().enumerate() {
            for (q, (p, wq)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                let bq = b[e * nq + q];
                let c = tau * g.area * wq;
                for i in 0..3 {
                    let bi = bq[0] * g.grads[i][0] + bq[1] * g.grads[i][1];
                    for j in 0..3 {
                        m.values[self.local_pos[e][3 * i + j]] += c * bi * p[j];
                    }
                }
            }
        }
        m
    }

    /// `∫ g φ_i`.
    pub fn load_vector(&self, g_qp: &[f64]) -> Vec<f64> {
        let nq = self.nq();
        let mut out = vec![0.0; self.num_dofs()];
        for (e, (t, geo)) in self.mesh.triangles.iter().zip(&self.geometry).enumerate() {
            for (q, (p, wq)) in self.rule.points.iter().zip(&self.rule.weights).enumerate() {
                let c = geo.area * wq * g_qp[e * nq + q];
                for k in 0..3 {
                    out[t[k]] += c * p[k];
                }
            }
        }
        out
    }

    /// `∫ q · ∇φ_i`.
    pub fn flux_load_vector(&self, flux_qp: &[[f64; 2]]) -> Vec<f64> {
        let nq = self.nq();
        let mut out = vec![0.0; self.num_dofs()];
        for (e, (t, geo)) in self.mesh.triangles.iter().zip(&self.geometry).enumerate() {
            let mut mean = [0.0; 2];
            for q in 0..nq {
                let w = self.rule.weights[q];
                mean[0] += w * flux_qp[e * nq + q][0];
                mean[1] += w * flux_qp[e * nq + q][1];
            }
            for k in 0..3 {
                out[t[k]] += geo.area * (mean[0] * geo.grads[k][0] + mean[1] * geo.grads[k][1]);
            }
        }
        out
    }

    /// Residual of the backward-Euler Galerkin equations in increment
    /// form, tested against every basis function:
    ///
    /// `τ(f, φ_i) − (θ_prev − θ_old, φ_i) − τ(c ∇(ψ_prev + z), ∇φ_i)`.
    ///
    /// With `grad_prev = None` only the gravity part `τ(c e_z, ∇φ_i)` is
    /// subtracted.
    pub fn assemble_rhs(
        &self,
        f_qp: &[f64],
        tau: f64,
        theta_old: &[f64],
        theta_prev_iter: &[f64],
        c_qp: &[f64],
        grad_prev: Option<&[[f64; 2]]>,
    ) -> Vec<f64> {
        let nq = self.nq();
        let g: Vec<f64> = (0..f_qp.len()).map(|k| tau * f_qp[k] - (theta_prev_iter[k] - theta_old[k])).collect();
        let mut rhs = self.load_vector(&g);
        let flux: Vec<[f64; 2]> = (0..c_qp.len())
            .map(|k| {
                let grad = grad_prev.map_or([0.0, 0.0], |gp| gp[k / nq]);
                [tau * c_qp[k] * grad[0], tau * c_qp[k] * (grad[1] + 1.0)]
            })
            .collect();
        let fl = self.flux_load_vector(&flux);
        rhs.iter_mut().zip(fl).for_each(|(r, f)| *r -= f);
        rhs
    }

    /// `(∫ w ξ² + τ k |∇ξ|²)^{1/2}` with weight and conductivity given at
    /// quadrature points.
    pub fn weighted_energy_norm(&self, xi: &[f64], w_qp: &[f64], k_qp: &[f64], tau: f64) -> f64 {
        let nq = self.nq();
        let vals = self.interpolate(xi);
        let grads = self.gradients(xi);
        let mut s = 0.0;
        for (e, geo) in self.geometry.iter().enumerate() {
            let g2 = grads[e][0] * grads[e][0] + grads[e][1] * grads[e][1];
            for q in 0..nq {
                let k = e * nq + q;
                s += geo.area * self.rule.weights[q] * (w_qp[k] * vals[k] * vals[k] + tau * k_qp[k] * g2);
            }
        }
        s.max(0.0).sqrt()
    }

    /// Iteration-dependent energy norm of `xi` with coefficients taken
    /// from the previous iterate `psi_prev`.
    pub fn energy_norm(&self, xi: &[f64], kind: NormKind, psi_prev: &[f64], tau: f64, model: &dyn Constitutive) -> f64 {
        let psi_qp = self.interpolate(psi_prev);
        let k_qp: Vec<f64> = psi_qp.iter().map(|&p| model.conductivity(p)).collect();
        let w_qp: Vec<f64> = match kind {
            NormKind::LScheme(l) => vec![l; psi_qp.len()],
            NormKind::Newton => psi_qp.iter().map(|&p| model.water_content_derivative(p)).collect(),
        };
        self.weighted_energy_norm(xi, &w_qp, &k_qp, tau)
    }

    /// `∫ g` for values at quadrature points.
    pub fn integrate(&self, g_qp: &[f64]) -> f64 {
        let nq = self.nq();
        self.geometry
            .iter()
            .enumerate()
            .map(|(e, geo)| geo.area * (0..nq).map(|q| self.rule.weights[q] * g_qp[e * nq + q]).sum::<f64>())
            .sum()
    }

    /// Checks that a nodal vector has one value per vertex.
    pub fn validate_field(&self, field: &[f64]) -> Result<()> {
        self.check_len(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::LinearModel;
    use crate::mesh::Rect;

    fn space(n: usize) -> FeSpace {
        FeSpace::new(Mesh::build_structured(n, n, Rect::unit()).unwrap())
    }

    #[test]
    fn mass_partition_of_unity() {
        let s = space(3);
        let m = s.assemble_weighted_mass(&vec![1.0; s.points.len()]);
        let total: f64 = m.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(m.is_symmetric(1e-15));
        let z = s.assemble_weighted_mass(&vec![0.0; s.points.len()]);
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reference_stiffness() {
        let mut mesh = Mesh::build_structured(1, 1, Rect::unit()).unwrap();
        mesh.vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        mesh.triangles = vec![[0, 1, 2]];
        let s = FeSpace::new(mesh);
        let a = s.assemble_weighted_stiffness(&[1.0; 3], 1.0);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let s = space(4);
        let c: Vec<f64> = s.points.iter().map(|p| 1.0 + p[0] * p[1]).collect();
        let a = s.assemble_weighted_stiffness(&c, 0.3);
        assert!(a.matvec(&vec![2.5; s.num_dofs()]).iter().all(|v| v.abs() < 1e-12));
        assert!(a.is_symmetric(1e-14));
    }

    #[test]
    fn convection_column_sums_vanish() {
        let s = space(3);
        let b: Vec<[f64; 2]> = s.points.iter().map(|p| [p[0].sin(), 1.0 + p[1]]).collect();
        let c = s.assemble_convection(&b, 0.7);
        let ones = vec![1.0; s.num_dofs()];
        let col_sums = c.transpose().matvec(&ones);
        assert!(col_sums.iter().all(|v| v.abs() < 1e-13));
        let zero = s.assemble_convection(&vec![[0.0; 2]; s.points.len()], 1.0);
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_sums() {
        let s = space(4);
        let nqp = s.points.len();
        let theta = vec![0.3; nqp];
        let rhs = s.assemble_rhs(&vec![1.0; nqp], 1.0, &theta, &theta, &vec![0.0; nqp], None);
        assert!((rhs.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let rhs = s.assemble_rhs(&vec![0.0; nqp], 1.0, &theta, &theta, &vec![0.8; nqp], None);
        assert!(rhs.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn energy_norm_closed_forms() {
        let s = space(8);
        let model = LinearModel { slope: 1.0, offset: 0.0, k: 1.0 };
        let psi = vec![0.0; s.num_dofs()];
        let one = vec![1.0; s.num_dofs()];
        let n = s.energy_norm(&one, NormKind::LScheme(0.1), &psi, 0.0, &model);
        assert!((n - 0.1f64.sqrt()).abs() < 1e-14);
        let x = s.nodal(|x, _| x);
        let n = s.energy_norm(&x, NormKind::LScheme(0.1), &psi, 0.01, &model);
        assert!((n - (0.1 / 3.0 + 0.01f64).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn dirichlet_all_dofs() {
        let s = space(2);
        let mut a = s.assemble_weighted_stiffness(&vec![1.0; s.points.len()], 1.0);
        let mut b = vec![0.0; s.num_dofs()];
        let dofs: Vec<usize> = (0..s.num_dofs()).collect();
        let vals: Vec<f64> = dofs.iter().map(|&d| d as f64 * 0.5).collect();
        apply_dirichlet(&mut a, &mut b, &dofs, &vals).unwrap();
        let x = solve_linear(&a, &b, LinearSolver::Direct).unwrap();
        for (xi, vi) in x.iter().zip(&vals) {
            assert!((xi - vi).abs() < 1e-14);
        }
    }
}
