//! Lowest-order Raviart–Thomas fluxes with prescribed elementwise
//! divergence and minimal `K_s^{-1/2}`-weighted norm.
//!
//! Unknowns are the normal components on mesh edges, measured against a
//! global normal `n = (t_z, −t_x)/|t|` with `t` running from the lower to
//! the higher vertex index. On an element the basis function of local edge
//! `k` is `s_k |E_k| / (2|T|) (x − p_k)`, `p_k` being the opposite vertex
//! and `s_k = ±1` the agreement of the global normal with the outward one.
//! The normal flux is left free on the whole boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BandedLu, CsrMatrix, FeSpace, QuadratureRule};
use crate::linearize::Iterate;
use crate::mesh::Mesh;

/// One normal-flux coefficient per mesh edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RTField {
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FluxKind {
    LScheme(f64),
    Newton,
}

/// `s_k` for every element and local edge.
pub fn orientation(mesh: &Mesh) -> Vec<[f64; 3]> {
    mesh.triangles
        .iter()
        .zip(&mesh.element_edges)
        .map(|(tri, edges)| {
            let mut s = [0.0; 3];
            for k in 0..3 {
                let [a, b] = mesh.edges[edges[k]];
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let n = [pb[1] - pa[1], -(pb[0] - pa[0])];
                let p = mesh.vertices[tri[k]];
                let mid = [0.5 * (pa[0] + pb[0]) - p[0], 0.5 * (pa[1] + pb[1]) - p[1]];
                s[k] = if n[0] * mid[0] + n[1] * mid[1] > 0.0 { 1.0 } else { -1.0 };
            }
            s
        })
        .collect()
}

impl RTField {
    pub fn zeros(mesh: &Mesh) -> Self {
        RTField { coeffs: vec![0.0; mesh.edges.len()] }
    }

    pub fn evaluate(&self, mesh: &Mesh, signs: &[[f64; 3]], e: usize, bary: [f64; 3]) -> [f64; 2] {
        let x = mesh.point(e, bary);
        let area = mesh.element_geometry(e).area;
        let mut v = [0.0; 2];
        for k in 0..3 {
            let edge = mesh.element_edges[e][k];
            let p = mesh.vertices[mesh.triangles[e][k]];
            let c = self.coeffs[edge] * signs[e][k] * mesh.edge_length(edge) / (2.0 * area);
            v[0] += c * (x[0] - p[0]);
            v[1] += c * (x[1] - p[1]);
        }
        v
    }

    /// Values at the quadrature points of `space`, ordered like
    /// `FeSpace::interpolate`.
    pub fn at_points(&self, space: &FeSpace, signs: &[[f64; 3]]) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(space.num_elements() * space.nq());
        for e in 0..space.num_elements() {
            for bary in &space.rule.points {
                out.push(self.evaluate(&space.mesh, signs, e, *bary));
            }
        }
        out
    }

    /// Elementwise (constant) divergence.
    pub fn divergence(&self, mesh: &Mesh, signs: &[[f64; 3]]) -> Vec<f64> {
        (0..mesh.num_elements())
            .map(|e| {
                let area = mesh.element_geometry(e).area;
                (0..3)
                    .map(|k| {
                        let edge = mesh.element_edges[e][k];
                        self.coeffs[edge] * signs[e][k] * mesh.edge_length(edge)
                    })
                    .sum::<f64>()
                    / area
            })
            .collect()
    }

    /// `‖K_s^{-1/2} σ‖`, exact for RT0 with the three-point rule.
    pub fn weighted_norm(&self, mesh: &Mesh, signs: &[[f64; 3]], k_s: f64) -> f64 {
        let rule = QuadratureRule::three_point();
        let mut s = 0.0;
        for e in 0..mesh.num_elements() {
            let area = mesh.element_geometry(e).area;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let v = self.evaluate(mesh, signs, e, *p);
                s += area * w * (v[0] * v[0] + v[1] * v[1]) / k_s;
            }
        }
        s.sqrt()
    }
}

/// Elementwise means from values at quadrature points.
pub fn project_piecewise_constant(space: &FeSpace, g_qp: &[f64]) -> Vec<f64> {
    let nq = space.nq();
    (0..space.num_elements())
        .map(|e| (0..nq).map(|q| space.rule.weights[q] * g_qp[e * nq + q]).sum())
        .collect()
}

/// Factorized saddle-point system for one mesh and saturated conductivity.
#[derive(Debug, Clone)]
pub struct EqFluxSolver {
    pub signs: Vec<[f64; 3]>,
    pub matrix: CsrMatrix,
    lu: BandedLu,
    n_edges: usize,
}

impl EqFluxSolver {
    pub fn new(mesh: &Mesh, k_s: f64) -> Result<Self> {
        if !(k_s > 0.0) {
            return Err(Error::InvalidParameter(format!("saturated conductivity {k_s}")));
        }
        let signs = orientation(mesh);
        let n_edges = mesh.edges.len();
        let n = n_edges + mesh.num_elements();
        let rule = QuadratureRule::three_point();
        let mut triplets = Vec::new();
        for e in 0..mesh.num_elements() {
            let area = mesh.element_geometry(e).area;
            let edges = mesh.element_edges[e];
            let scale: Vec<f64> = (0..3).map(|k| signs[e][k] * mesh.edge_length(edges[k]) / (2.0 * area)).collect();
            let verts: Vec<[f64; 2]> = (0..3).map(|k| mesh.vertices[mesh.triangles[e][k]]).collect();
            for i in 0..3 {
                for j in 0..3 {
                    let mut m = 0.0;
                    for (p, w) in rule.points.iter().zip(&rule.weights) {
                        let x = mesh.point(e, *p);
                        let a = [x[0] - verts[i][0], x[1] - verts[i][1]];
                        let b = [x[0] - verts[j][0], x[1] - verts[j][1]];
                        m += w * (a[0] * b[0] + a[1] * b[1]);
                    }
                    triplets.push((edges[i], edges[j], area * m * scale[i] * scale[j] / k_s));
                }
                let b = signs[e][i] * mesh.edge_length(edges[i]);
                triplets.push((n_edges + e, edges[i], b));
                triplets.push((edges[i], n_edges + e, b));
            }
        }
        let matrix = CsrMatrix::from_triplets(n, &triplets);
        let lu = BandedLu::factor(&matrix)?;
        Ok(EqFluxSolver { signs, matrix, lu, n_edges })
    }

    /// Minimal-norm RT0 field whose elementwise divergence is `div`.
    pub fn solve_divergence(&self, mesh: &Mesh, div: &[f64]) -> Result<RTField> {
        if div.len() != mesh.num_elements() {
            return Err(Error::DimensionMismatch { expected: mesh.num_elements(), got: div.len() });
        }
        if div.iter().all(|&d| d == 0.0) {
            return Ok(RTField::zeros(mesh));
        }
        let mut rhs = vec![0.0; self.matrix.n];
        for (e, &d) in div.iter().enumerate() {
            rhs[self.n_edges + e] = mesh.element_geometry(e).area * d;
        }
        let x = self.lu.solve_refined(&self.matrix, &rhs)?;
        Ok(RTField { coeffs: x[..self.n_edges].to_vec() })
    }

    /// Flux whose divergence is `τ^{-1} Π₀ r` on the degenerate elements
    /// and zero elsewhere, `r` being the potential residual of `kind`.
    pub fn compute_equilibrated_flux(
        &self,
        space: &FeSpace,
        kind: FluxKind,
        psi_i: &Iterate,
        psi_im1: &Iterate,
        tau: f64,
        degenerate: &[bool],
    ) -> Result<RTField> {
        if !degenerate.iter().any(|&d| d) {
            return Ok(RTField::zeros(&space.mesh));
        }
        let r: Vec<f64> = (0..psi_i.psi_qp.len())
            .map(|k| {
                let d = psi_i.psi_qp[k] - psi_im1.psi_qp[k];
                let w = match kind {
                    FluxKind::LScheme(l) => l,
                    FluxKind::Newton => psi_im1.theta_prime[k],
                };
                w * d - (psi_i.theta[k] - psi_im1.theta[k])
            })
            .collect();
        let mean = project_piecewise_constant(space, &r);
        let div: Vec<f64> = mean.iter().zip(degenerate).map(|(m, &d)| if d { m / tau } else { 0.0 }).collect();
        self.solve_divergence(&space.mesh, &div)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;

    #[test]
    fn orientation_is_consistent_on_interior_edges() {
        let mesh = Mesh::build_structured(3, 2, Rect::unit()).unwrap();
        let signs = orientation(&mesh);
        let mut seen = vec![Vec::new(); mesh.edges.len()];
        for (e, edges) in mesh.element_edges.iter().enumerate() {
            for k in 0..3 {
                seen[edges[k]].push(signs[e][k]);
            }
        }
        for s in seen {
            if s.len() == 2 {
                assert_eq!(s[0], -s[1]);
            }
        }
    }

    #[test]
    fn divergence_matches_prescription() {
        let mesh = Mesh::build_structured(4, 3, Rect::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        let solver = EqFluxSolver::new(&mesh, 0.5).unwrap();
        let div: Vec<f64> = (0..mesh.num_elements()).map(|e| ((e * 7) % 5) as f64 - 2.0).collect();
        let sigma = solver.solve_divergence(&mesh, &div).unwrap();
        for (a, b) in sigma.divergence(&mesh, &solver.signs).iter().zip(&div) {
            assert!((a - b).abs() < 1e-10);
        }
        let zero = solver.solve_divergence(&mesh, &vec![0.0; mesh.num_elements()]).unwrap();
        assert!(zero.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn normal_component_is_continuous() {
        let mesh = Mesh::build_structured(2, 2, Rect::unit()).unwrap();
        let solver = EqFluxSolver::new(&mesh, 1.0).unwrap();
        let div: Vec<f64> = (0..mesh.num_elements()).map(|e| e as f64).collect();
        let sigma = solver.solve_divergence(&mesh, &div).unwrap();
        // The normal component of a local basis function on its own edge is s_k.
        for (e, edges) in mesh.element_edges.iter().enumerate() {
            for k in 0..3 {
                let mut bary = [0.5; 3];
                bary[k] = 0.0;
                let v = sigma.evaluate(&mesh, &solver.signs, e, bary);
                let [a, b] = mesh.edges[edges[k]];
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let len = mesh.edge_length(edges[k]);
                let n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                assert!((v[0] * n[0] + v[1] * n[1] - sigma.coeffs[edges[k]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_of_linear_is_centroid_value() {
        let space = FeSpace::new(Mesh::build_structured(2, 2, Rect::unit()).unwrap());
        let g = space.at_points(|x, z| 1.0 + 2.0 * x - 3.0 * z);
        let means = project_piecewise_constant(&space, &g);
        for (e, m) in means.iter().enumerate() {
            let c = space.mesh.point(e, [1.0 / 3.0; 3]);
            assert!((m - (1.0 + 2.0 * c[0] - 3.0 * c[1])).abs() < 1e-14);
        }
    }
}
