//! Dense Raviart–Thomas oracle with its own basis and KKT solve.

use nalgebra::{DMatrix, DVector};
use richards_core::Mesh;

use super::{area, corners, physical_rule, seven_point};

/// RT0 basis of edge-local index `k` on element `e`, scaled so that its
/// coefficient is the normal flux against the edge normal rotated
/// clockwise from `a → b` (`a < b`).
pub struct Rt0<'a> {
    pub mesh: &'a Mesh,
}

impl Rt0<'_> {
    pub fn sign(&self, e: usize, k: usize) -> f64 {
        let [a, b] = self.mesh.edges[self.mesh.element_edges[e][k]];
        let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
        let normal = [pb[1] - pa[1], pa[0] - pb[0]];
        let opposite = self.mesh.vertices[self.mesh.triangles[e][k]];
        let out = [0.5 * (pa[0] + pb[0]) - opposite[0], 0.5 * (pa[1] + pb[1]) - opposite[1]];
        (normal[0] * out[0] + normal[1] * out[1]).signum()
    }

    pub fn basis(&self, e: usize, k: usize, x: [f64; 2]) -> [f64; 2] {
        let p = corners(self.mesh, e);
        let len = {
            let [a, b] = self.mesh.edges[self.mesh.element_edges[e][k]];
            let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
            ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
        };
        let c = self.sign(e, k) * len / (2.0 * area(&p));
        [c * (x[0] - p[k][0]), c * (x[1] - p[k][1])]
    }

    /// `(M, B)` with `M = ∫ K_s^{-1} φ_i·φ_j` and `B_{T,i} = ∫_T ∇·φ_i`.
    pub fn system(&self, k_s: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (ne, nt) = (self.mesh.edges.len(), self.mesh.num_elements());
        let mut m = DMatrix::zeros(ne, ne);
        let mut b = DMatrix::zeros(nt, ne);
        let rule = seven_point();
        for e in 0..nt {
            let p = corners(self.mesh, e);
            let edges = self.mesh.element_edges[e];
            for (x, w) in physical_rule(&p, &rule) {
                let v: Vec<[f64; 2]> = (0..3).map(|k| self.basis(e, k, x)).collect();
                for i in 0..3 {
                    for j in 0..3 {
                        m[(edges[i], edges[j])] += w * (v[i][0] * v[j][0] + v[i][1] * v[j][1]) / k_s;
                    }
                }
            }
            for k in 0..3 {
                // ∇·(c (x − p)) = 2c over the element.
                let x = [0.0, 0.0];
                let v0 = self.basis(e, k, x);
                let v1 = self.basis(e, k, [1.0, 0.0]);
                let v2 = self.basis(e, k, [0.0, 1.0]);
                let div = (v1[0] - v0[0]) + (v2[1] - v0[1]);
                b[(e, edges[k])] += div * area(&p);
            }
        }
        (m, b)
    }

    pub fn field(&self, coeffs: &[f64], e: usize, x: [f64; 2]) -> [f64; 2] {
        let mut v = [0.0; 2];
        for k in 0..3 {
            let c = coeffs[self.mesh.element_edges[e][k]];
            let b = self.basis(e, k, x);
            v[0] += c * b[0];
            v[1] += c * b[1];
        }
        v
    }
}

/// Minimizer of `½σᵀMσ` under `Bσ = d`, via the Schur complement.
pub fn constrained_minimizer(m: &DMatrix<f64>, b: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let m_inv_bt = m.clone().cholesky().expect("M is SPD").solve(&b.transpose());
    let schur = b * &m_inv_bt;
    let lambda = schur.cholesky().expect("B has full row rank").solve(d);
    m_inv_bt * lambda
}
