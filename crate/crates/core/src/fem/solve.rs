//! Sparse linear solves.
//!
//! The default path is a banded LU factorization with partial pivoting,
//! applied after a bandwidth-reducing reordering. It handles the
//! nonsymmetric Newton systems and the indefinite saddle-point systems of
//! the flux reconstruction alike. The iterative path is a Jacobi
//! preconditioned BiCGSTAB for primal systems.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Relative residual every accepted solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum LinearSolver {
    #[default]
    Direct,
    Iterative { max_iter: usize },
}

pub fn solve_linear(a: &CsrMatrix, b: &[f64], solver: LinearSolver) -> Result<Vec<f64>> {
    if b.len() != a.n {
        return Err(Error::DimensionMismatch { expected: a.n, got: b.len() });
    }
    match solver {
        LinearSolver::Direct => BandedLu::factor(a)?.solve_refined(a, b),
        LinearSolver::Iterative { max_iter } => bicgstab(a, b, max_iter),
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect()
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn permuted_bandwidth(a: &CsrMatrix, inv: &[usize]) -> usize {
    let mut bw = 0;
    for i in 0..a.n {
        for (j, _) in a.row(i) {
            bw = bw.max(inv[i].abs_diff(inv[j]));
        }
    }
    bw
}

/// LU factors of `P A Q` for a band matrix, `Q` a symmetric reordering and
/// `P` the partial-pivoting row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
    /// `perm[new] = old`.
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let natural: Vec<usize> = (0..n).collect();
        let rcm = reverse_cuthill_mckee(a);
        let mut inv_rcm = vec![0; n];
        for (new, &old) in rcm.iter().enumerate() {
            inv_rcm[old] = new;
        }
        let perm = if permuted_bandwidth(a, &inv_rcm) < permuted_bandwidth(a, &natural) { rcm } else { natural };
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            for (j, _) in a.row(i) {
                let (r, c) = (inv[i], inv[j]);
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (r, c) = (inv[i], inv[j]);
                band[r * width + (c + kl - r)] += v;
            }
        }
        let mut lu = BandedLu { n, kl, ku, width, band, pivots: vec![0; n], perm };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut scale = 0.0f64;
        for v in &self.band {
            scale = scale.max(v.abs());
        }
        if scale == 0.0 && n > 0 {
            return Err(Error::Solver("zero matrix".into()));
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.band[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(Error::Solver(format!("singular matrix at pivot {k}")));
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (i1, i2) = (self.idx(k, c), self.idx(p, c));
                    self.band.swap(i1, i2);
                }
            }
            let diag = self.band[self.idx(k, k)];
            for r in k + 1..=last_row {
                let ir = self.idx(r, k);
                let l = self.band[ir] / diag;
                self.band[ir] = l;
                if l == 0.0 {
                    continue;
                }
                let base_r = self.idx(r, k);
                let base_k = self.idx(k, k);
                for off in 1..=(last_col - k) {
                    self.band[base_r + off] -= l * self.band[base_k + off];
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                for r in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    y[r] -= self.band[self.idx(r, k)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let base = self.idx(k, k);
            let mut s = y[k];
            for off in 1..=(last_col - k) {
                s -= self.band[base + off] * y[k + off];
            }
            y[k] = s / self.band[base];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solve followed by up to three steps of iterative refinement until
    /// the relative residual meets [`RESIDUAL_TOL`].
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let nb = norm2(b);
        if nb == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.solve(b);
        for _ in 0..4 {
            let r = residual(a, &x, b);
            let rel = norm2(&r) / nb;
            if !rel.is_finite() {
                return Err(Error::Solver("non-finite solution".into()));
            }
            if rel <= RESIDUAL_TOL {
                return Ok(x);
            }
            let dx = self.solve(&r);
            x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        }
        let rel = norm2(&residual(a, &x, b)) / nb;
        if rel <= RESIDUAL_TOL {
            Ok(x)
        } else {
            Err(Error::Solver(format!("relative residual {rel:.3e} above tolerance")))
        }
    }
}

fn bicgstab(a: &CsrMatrix, b: &[f64], max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(Error::Solver("BiCGSTAB breakdown (rho)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = a.matvec(&p_hat);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return Err(Error::Solver("BiCGSTAB breakdown (alpha)".into()));
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm2(&s) / nb <= RESIDUAL_TOL {
            x.iter_mut().zip(&p_hat).for_each(|(xi, pi)| *xi += alpha * pi);
            return Ok(x);
        }
        let s_hat = precond(&s);
        let t = a.matvec(&s_hat);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Solver("BiCGSTAB breakdown (omega)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&residual(a, &x, b)) / nb <= RESIDUAL_TOL {
            return Ok(x);
        }
    }
    Err(Error::Solver(format!("BiCGSTAB did not converge in {max_iter} iterations")))
}
