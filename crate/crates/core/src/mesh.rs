//! Structured conforming triangulations of axis-aligned rectangles.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub z0: f64,
    pub x1: f64,
    pub z1: f64,
}

impl Rect {
    pub fn new(x0: f64, z0: f64, x1: f64, z1: f64) -> Self {
        Rect { x0, z0, x1, z1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.z1 - self.z0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Geometric tolerance used for boundary membership tests.
    pub fn tolerance(&self) -> f64 {
        1e-12 * self.width().max(self.height())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// A closed subset of the boundary, described by a membership predicate on
/// vertex coordinates.
#[derive(Clone)]
pub struct BoundaryRegion {
    pub tag: String,
    predicate: Arc<dyn Fn([f64; 2]) -> bool + Send + Sync>,
}

impl fmt::Debug for BoundaryRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryRegion").field("tag", &self.tag).finish()
    }
}

impl BoundaryRegion {
    pub fn new(tag: impl Into<String>, predicate: impl Fn([f64; 2]) -> bool + Send + Sync + 'static) -> Self {
        BoundaryRegion { tag: tag.into(), predicate: Arc::new(predicate) }
    }

    /// Whole side of `rect`.
    pub fn side(tag: impl Into<String>, rect: Rect, side: Side) -> Self {
        let (lo, hi) = match side {
            Side::Bottom | Side::Top => (rect.x0, rect.x1),
            Side::Left | Side::Right => (rect.z0, rect.z1),
        };
        Self::segment(tag, rect, side, lo, hi)
    }

    /// The part of a side whose tangential coordinate lies in `[lo, hi]`.
    pub fn segment(tag: impl Into<String>, rect: Rect, side: Side, lo: f64, hi: f64) -> Self {
        let tol = rect.tolerance();
        Self::new(tag, move |[x, z]: [f64; 2]| {
            let (normal, fixed, tangential) = match side {
                Side::Bottom => (z, rect.z0, x),
                Side::Top => (z, rect.z1, x),
                Side::Left => (x, rect.x0, z),
                Side::Right => (x, rect.x1, z),
            };
            (normal - fixed).abs() <= tol && tangential >= lo - tol && tangential <= hi + tol
        })
    }

    pub fn contains(&self, point: [f64; 2]) -> bool {
        (self.predicate)(point)
    }
}

/// Area and P1 basis gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<([usize; 2], Side)>,
    /// Unique edges, stored with `a < b`.
    pub edges: Vec<[usize; 2]>,
    /// `element_edges[e][k]` is the edge opposite local vertex `k`.
    pub element_edges: Vec<[usize; 3]>,
    /// Largest element diameter.
    pub h: f64,
    pub rect: Rect,
    pub nx: usize,
    pub nz: usize,
}

impl Mesh {
    /// `nx × nz` cells, each split along its bottom-left to top-right diagonal.
    pub fn build_structured(nx: usize, nz: usize, rect: Rect) -> Result<Mesh> {
        if nx == 0 || nz == 0 {
            return Err(Error::InvalidMesh(format!("cell counts must be positive, got {nx}x{nz}")));
        }
        let finite = [rect.x0, rect.z0, rect.x1, rect.z1].iter().all(|v| v.is_finite());
        if !finite || rect.x1 <= rect.x0 || rect.z1 <= rect.z0 {
            return Err(Error::InvalidMesh(format!("degenerate rectangle {rect:?}")));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (nz + 1));
        for j in 0..=nz {
            let z = if j == nz { rect.z1 } else { rect.z0 + rect.height() * j as f64 / nz as f64 };
            for i in 0..=nx {
                let x = if i == nx { rect.x1 } else { rect.x0 + rect.width() * i as f64 / nx as f64 };
                vertices.push([x, z]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * nz);
        for j in 0..nz {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let dx = rect.width() / nx as f64;
        let dz = rect.height() / nz as f64;
        let mut mesh = Mesh {
            vertices,
            triangles,
            boundary_edges: Vec::new(),
            edges: Vec::new(),
            element_edges: Vec::new(),
            h: (dx * dx + dz * dz).sqrt(),
            rect,
            nx,
            nz,
        };
        mesh.build_topology();
        Ok(mesh)
    }

    fn build_topology(&mut self) {
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut count: Vec<usize> = Vec::new();
        let mut element_edges = Vec::with_capacity(self.triangles.len());
        for tri in &self.triangles {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = [a.min(b), a.max(b)];
                let next = self.edges.len();
                let e = *index.entry(key).or_insert_with(|| {
                    self.edges.push(key);
                    count.push(0);
                    next
                });
                count[e] += 1;
                *slot = e;
            }
            element_edges.push(local);
        }
        self.element_edges = element_edges;
        let tol = self.rect.tolerance();
        let r = self.rect;
        self.boundary_edges = self
            .edges
            .iter()
            .zip(&count)
            .filter(|(_, &c)| c == 1)
            .map(|(&[a, b], _)| {
                let mid = [
                    0.5 * (self.vertices[a][0] + self.vertices[b][0]),
                    0.5 * (self.vertices[a][1] + self.vertices[b][1]),
                ];
                let side = if (mid[1] - r.z0).abs() <= tol {
                    Side::Bottom
                } else if (mid[0] - r.x1).abs() <= tol {
                    Side::Right
                } else if (mid[1] - r.z1).abs() <= tol {
                    Side::Top
                } else {
                    Side::Left
                };
                ([a, b], side)
            })
            .collect();
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    /// Sorted boundary vertices that belong to `region`.
    pub fn tag_boundary(&self, region: &BoundaryRegion) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .flat_map(|(e, _)| e.iter().copied())
            .filter(|&v| region.contains(self.vertices[v]))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn element_geometry(&self, e: usize) -> ElementGeometry {
        let [a, b, c] = self.triangles[e];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let area = 0.5 * det;
        // ∇λ_k = rot(p_{k+2} - p_{k+1}) / det
        let p = [pa, pb, pc];
        let mut grads = [[0.0; 2]; 3];
        for (k, g) in grads.iter_mut().enumerate() {
            let p1 = p[(k + 1) % 3];
            let p2 = p[(k + 2) % 3];
            *g = [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det];
        }
        ElementGeometry { area, grads }
    }

    /// Maps barycentric coordinates on element `e` to physical coordinates.
    pub fn point(&self, e: usize, bary: [f64; 3]) -> [f64; 2] {
        let t = self.triangles[e];
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += bary[k] * self.vertices[t[k]][0];
            out[1] += bary[k] * self.vertices[t[k]][1];
        }
        out
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.edges[edge];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }
}
