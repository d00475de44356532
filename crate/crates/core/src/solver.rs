//! Finite elements for `P = -w^2 d1^2 + (1 - w^2) d2^2 + i w nu Lap^2` on a boundary-fitted
//! polar mesh, optionally pushed forward by a deformation.
//!
//! Q1 quads away from the centre, P1 fan at the centre, 2x2 Gauss points, lumped mass.
//! The bilaplacian is the mixed (Ciarlet-Raviart) form `K M^-1 K` with the auxiliary
//! variable unconstrained on the boundary, which imposes the Neumann condition weakly.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut};
use rayon::prelude::*;
use serde::Serialize;

use crate::billiard::Billiard;
use crate::deformation::DeformationMap;
use crate::geometry::DomainSpec;
use crate::{Error, Result, C64};

pub const MIN_RADIAL: usize = 8;
/// Relative tolerance and iteration cap of the inverse iteration.
pub const SIGMA_TOL: f64 = 1e-6;
pub const SIGMA_MAX_ITER: usize = 200;
const BLOCK: usize = 3;

/// Nodes `c + r (z(t) - c)` at `r = k / n_r`, `t = j / n_t`; node 0 is the centre.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub n_r: usize,
    pub n_t: usize,
    pub center: [f64; 2],
    pub nodes: Vec<[f64; 2]>,
    pub boundary: Vec<bool>,
    pub tris: Vec<[usize; 3]>,
    pub quads: Vec<[usize; 4]>,
}

impl Mesh {
    pub fn index(&self, k: usize, j: usize) -> usize {
        if k == 0 {
            0
        } else {
            1 + (k - 1) * self.n_t + j % self.n_t
        }
    }

    /// Centroids and areas of all elements, triangles first.
    pub fn cells(&self) -> Vec<([f64; 2], f64)> {
        let p = &self.nodes;
        let tri = self.tris.iter().map(|t| {
            let (a, b, c) = (p[t[0]], p[t[1]], p[t[2]]);
            let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
            ([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0], area)
        });
        let quad = self.quads.iter().map(|q| {
            let v: Vec<[f64; 2]> = q.iter().map(|&i| p[i]).collect();
            let mut area = 0.0;
            for i in 0..4 {
                let (a, b) = (v[i], v[(i + 1) % 4]);
                area += a[0] * b[1] - a[1] * b[0];
            }
            let c = [v.iter().map(|x| x[0]).sum::<f64>() / 4.0, v.iter().map(|x| x[1]).sum::<f64>() / 4.0];
            (c, 0.5 * area.abs())
        });
        tri.chain(quad).collect()
    }
}

pub fn polar_mesh(spec: &DomainSpec, n_r: usize, n_t: usize) -> Result<Mesh> {
    if n_r < MIN_RADIAL || n_t < MIN_RADIAL {
        return Err(Error::InvalidInput(format!("grid {n_r}x{n_t} is too coarse (need >= {MIN_RADIAL})")));
    }
    let (_, c) = spec.area_centroid();
    for j in 0..4 * n_t {
        let t = j as f64 / (4 * n_t) as f64;
        let (z, dz) = (spec.point(t, 0), spec.point(t, 1));
        if (z[0] - c[0]) * dz[1] - (z[1] - c[1]) * dz[0] <= 0.0 {
            return Err(Error::InvalidInput(format!("{} is not star-shaped about its centroid", spec.name)));
        }
    }
    let mut nodes = vec![c];
    let mut boundary = vec![false];
    for k in 1..=n_r {
        let r = k as f64 / n_r as f64;
        for j in 0..n_t {
            let z = spec.point(j as f64 / n_t as f64, 0);
            nodes.push([c[0] + r * (z[0] - c[0]), c[1] + r * (z[1] - c[1])]);
            boundary.push(k == n_r);
        }
    }
    let mut mesh = Mesh {
        n_r,
        n_t,
        center: c,
        nodes,
        boundary,
        tris: Vec::new(),
        quads: Vec::new(),
    };
    for j in 0..n_t {
        mesh.tris.push([0, mesh.index(1, j), mesh.index(1, j + 1)]);
    }
    for k in 1..n_r {
        for j in 0..n_t {
            mesh.quads.push([mesh.index(k, j), mesh.index(k + 1, j), mesh.index(k + 1, j + 1), mesh.index(k, j + 1)]);
        }
    }
    Ok(mesh)
}

/// Compressed sparse column pattern.
#[derive(Clone, Debug)]
struct Pattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl Pattern {
    fn from_pairs(n: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        let mut col_ptr = vec![0; n + 1];
        for &(c, _) in &pairs {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Pattern {
            n,
            col_ptr,
            row_idx: pairs.into_iter().map(|p| p.1).collect(),
        }
    }

    fn find(&self, r: usize, c: usize) -> Option<usize> {
        let s = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        s.binary_search(&r).ok().map(|k| k + self.col_ptr[c])
    }

    fn scatter(&self, entries: &[(usize, usize, C64)]) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.row_idx.len()];
        for &(r, c, x) in entries {
            if let Some(k) = self.find(r, c) {
                v[k] += x;
            }
        }
        v
    }
}

/// Mesh plus the `omega`-independent matrices on it.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub lambda: f64,
    pub tau: f64,
    /// Unknown index of each node, `None` on the boundary.
    pub unknown: Vec<Option<usize>>,
    pub interior: Vec<usize>,
    /// Lumped mass at every node (includes `det D Xi`).
    pub mass: Vec<C64>,
    second: Pattern,
    fourth: Pattern,
    k1: [Vec<C64>; 2],
    k2: [Vec<C64>; 2],
    bilap: Vec<C64>,
    stiffness_rows: Vec<Vec<(usize, C64)>>,
}

struct Local {
    nodes: Vec<usize>,
    k1: Vec<C64>,
    k2: Vec<C64>,
    mass: Vec<C64>,
}

fn local_matrices(
    nodes: &[usize],
    points: &[([f64; 2], Vec<f64>, Vec<[f64; 2]>, f64)],
    dmap: Option<&DeformationMap>,
) -> Result<Local> {
    let m = nodes.len();
    let mut k1 = vec![C64::new(0.0, 0.0); m * m];
    let mut k2 = vec![C64::new(0.0, 0.0); m * m];
    let mut mass = vec![C64::new(0.0, 0.0); m];
    for (x, shape, grad, w) in points {
        let (g, det): (Vec<[C64; 2]>, C64) = match dmap {
            None => (grad.iter().map(|d| [C64::new(d[0], 0.0), C64::new(d[1], 0.0)]).collect(), C64::new(1.0, 0.0)),
            Some(dm) => {
                let j = dm.extend(*x)?.jac;
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                let g = grad
                    .iter()
                    .map(|d| [(j[1][1] * d[0] - j[1][0] * d[1]) / det, (j[0][0] * d[1] - j[0][1] * d[0]) / det])
                    .collect();
                (g, det)
            }
        };
        let wd = det * *w;
        for a in 0..m {
            mass[a] += wd * shape[a];
            for b in 0..m {
                k1[a * m + b] += wd * g[a][0] * g[b][0];
                k2[a * m + b] += wd * g[a][1] * g[b][1];
            }
        }
    }
    Ok(Local {
        nodes: nodes.to_vec(),
        k1,
        k2,
        mass,
    })
}

type QuadPoint = ([f64; 2], Vec<f64>, Vec<[f64; 2]>, f64);

fn quad_points(p: [[f64; 2]; 4]) -> Vec<QuadPoint> {
    let g = 1.0 / 3f64.sqrt();
    let refs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut out = Vec::with_capacity(4);
    for &(s, t) in &[(-g, -g), (g, -g), (g, g), (-g, g)] {
        let shape: Vec<f64> = refs.iter().map(|&(a, b)| 0.25 * (1.0 + a * s) * (1.0 + b * t)).collect();
        let ds: Vec<f64> = refs.iter().map(|&(a, b)| 0.25 * a * (1.0 + b * t)).collect();
        let dt: Vec<f64> = refs.iter().map(|&(a, b)| 0.25 * b * (1.0 + a * s)).collect();
        let mut x = [0.0; 2];
        let mut jm = [[0.0; 2]; 2];
        for k in 0..4 {
            for i in 0..2 {
                x[i] += shape[k] * p[k][i];
                jm[i][0] += ds[k] * p[k][i];
                jm[i][1] += dt[k] * p[k][i];
            }
        }
        let det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
        let grad = (0..4)
            .map(|k| [(jm[1][1] * ds[k] - jm[1][0] * dt[k]) / det, (-jm[0][1] * ds[k] + jm[0][0] * dt[k]) / det])
            .collect();
        out.push((x, shape, grad, det.abs()));
    }
    out
}

fn tri_points(p: [[f64; 2]; 3]) -> Vec<QuadPoint> {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let grad = vec![
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    let x = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
    vec![(x, vec![1.0 / 3.0; 3], grad, 0.5 * det.abs())]
}

impl Discretization {
    /// Flat discretisation (`tau = 0`).
    pub fn flat(spec: &DomainSpec, n_r: usize, n_t: usize) -> Result<Self> {
        Self::build(polar_mesh(spec, n_r, n_t)?, spec.lambda, None)
    }

    /// Pushforward by `dmap` (the mesh lives on the real domain).
    pub fn deformed(dmap: &DeformationMap, n_r: usize, n_t: usize) -> Result<Self> {
        let mesh = polar_mesh(dmap.spec(), n_r, n_t)?;
        Self::build(mesh, dmap.spec().lambda, Some(dmap))
    }

    fn build(mesh: Mesh, lambda: f64, dmap: Option<&DeformationMap>) -> Result<Self> {
        let p = &mesh.nodes;
        let mut elems: Vec<(Vec<usize>, Vec<QuadPoint>)> = Vec::new();
        for t in &mesh.tris {
            elems.push((t.to_vec(), tri_points([p[t[0]], p[t[1]], p[t[2]]])));
        }
        for q in &mesh.quads {
            elems.push((q.to_vec(), quad_points([p[q[0]], p[q[1]], p[q[2]], p[q[3]]])));
        }
        let locals: Vec<Result<Local>> = elems.par_iter().map(|(n, pts)| local_matrices(n, pts, dmap)).collect();
        let nn = p.len();
        let mut mass = vec![C64::new(0.0, 0.0); nn];
        let mut trip: Vec<(usize, usize, C64, C64)> = Vec::with_capacity(elems.len() * 16);
        for l in locals {
            let l = l?;
            let m = l.nodes.len();
            for a in 0..m {
                mass[l.nodes[a]] += l.mass[a];
                for b in 0..m {
                    trip.push((l.nodes[a], l.nodes[b], l.k1[a * m + b], l.k2[a * m + b]));
                }
            }
        }
        trip.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, C64, C64)> = Vec::with_capacity(trip.len() / 3);
        for e in trip {
            match merged.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => {
                    last.2 += e.2;
                    last.3 += e.3;
                }
                _ => merged.push(e),
            }
        }
        let mut unknown = vec![None; nn];
        let mut interior = Vec::new();
        for (i, &b) in mesh.boundary.iter().enumerate() {
            if !b {
                unknown[i] = Some(interior.len());
                interior.push(i);
            }
        }
        let mut stiffness_rows = vec![Vec::new(); nn];
        for &(r, c, a, b) in &merged {
            stiffness_rows[r].push((c, a + b));
        }
        let n = interior.len();
        let restricted: Vec<(usize, usize, C64, C64)> = merged
            .iter()
            .filter_map(|&(r, c, a, b)| Some((unknown[r]?, unknown[c]?, a, b)))
            .collect();
        // K_{I,all} M^-1 K_{all,I}
        let mut bil: Vec<(usize, usize, C64)> = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let mut touched: Vec<usize> = Vec::new();
        for (ri, &i) in interior.iter().enumerate() {
            for &(k, kik) in &stiffness_rows[i] {
                let s = kik / mass[k];
                for &(j, kkj) in &stiffness_rows[k] {
                    if let Some(cj) = unknown[j] {
                        if acc[cj] == C64::new(0.0, 0.0) {
                            touched.push(cj);
                        }
                        acc[cj] += s * kkj;
                    }
                }
            }
            touched.sort_unstable();
            for &cj in &touched {
                bil.push((ri, cj, acc[cj]));
                acc[cj] = C64::new(0.0, 0.0);
            }
            touched.clear();
        }
        let second = Pattern::from_pairs(n, restricted.iter().map(|e| (e.1, e.0)).collect());
        let fourth = Pattern::from_pairs(
            n,
            restricted.iter().map(|e| (e.1, e.0)).chain(bil.iter().map(|e| (e.1, e.0))).collect(),
        );
        let k1e: Vec<(usize, usize, C64)> = restricted.iter().map(|e| (e.0, e.1, e.2)).collect();
        let k2e: Vec<(usize, usize, C64)> = restricted.iter().map(|e| (e.0, e.1, e.3)).collect();
        Ok(Discretization {
            lambda,
            tau: dmap.map_or(0.0, |d| d.tau),
            unknown,
            interior,
            mass,
            k1: [second.scatter(&k1e), fourth.scatter(&k1e)],
            k2: [second.scatter(&k2e), fourth.scatter(&k2e)],
            bilap: fourth.scatter(&bil),
            second,
            fourth,
            stiffness_rows,
            mesh,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.interior.len()
    }

    /// Samples of `f` at all nodes.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> C64) -> Vec<C64> {
        self.mesh.nodes.iter().map(|&x| f(x)).collect()
    }

    fn restrict(&self, u: &[C64]) -> Vec<C64> {
        self.interior.iter().map(|&i| u[i]).collect()
    }

    fn extend_zero(&self, v: &[C64]) -> Vec<C64> {
        let mut u = vec![C64::new(0.0, 0.0); self.mesh.nodes.len()];
        for (k, &i) in self.interior.iter().enumerate() {
            u[i] = v[k];
        }
        u
    }

    /// `sum |M_i| |u_i|^2` over all nodes, square-rooted.
    pub fn l2_norm(&self, u: &[C64]) -> f64 {
        u.iter().zip(&self.mass).map(|(x, m)| m.norm() * x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `u^H K u` (the squared gradient norm when `tau = 0`).
    pub fn gradient_energy(&self, u: &[C64]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (i, row) in self.stiffness_rows.iter().enumerate() {
            for &(j, k) in row {
                s += u[i].conj() * k * u[j];
            }
        }
        s
    }

    /// `|| M^-1 K u ||^2_M`, the discrete `|| Lap u ||^2`.
    pub fn laplacian_energy(&self, u: &[C64]) -> f64 {
        let mut s = 0.0;
        for (i, row) in self.stiffness_rows.iter().enumerate() {
            let ku: C64 = row.iter().map(|&(j, k)| k * u[j]).sum();
            s += ku.norm_sqr() / self.mass[i].norm();
        }
        s
    }

    /// Piecewise gradient magnitude on each cell (same order as [`Mesh::cells`]).
    pub fn cell_gradients(&self, u: &[C64]) -> Vec<f64> {
        let p = &self.mesh.nodes;
        let tri = self.mesh.tris.iter().map(|t| {
            let pts = tri_points([p[t[0]], p[t[1]], p[t[2]]]);
            let g = &pts[0].2;
            let v: [C64; 2] = [0, 1].map(|d| (0..3).map(|a| u[t[a]] * g[a][d]).sum());
            (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
        });
        let quad = self.mesh.quads.iter().map(|q| {
            let pts = quad_points([p[q[0]], p[q[1]], p[q[2]], p[q[3]]]);
            let mut e = 0.0;
            let mut w = 0.0;
            for (_, _, g, wq) in &pts {
                let v: [C64; 2] = [0, 1].map(|d| (0..4).map(|a| u[q[a]] * g[a][d]).sum());
                e += wq * (v[0].norm_sqr() + v[1].norm_sqr());
                w += wq;
            }
            (e / w).sqrt()
        });
        tri.chain(quad).collect()
    }
}

/// Restricted interior matrix of `P` at one `(omega, nu)`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub omega: C64,
    pub nu: f64,
    pub tau: f64,
    /// 2 without viscosity, 4 otherwise.
    pub order: u32,
    pub n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
    principal_rows: Vec<f64>,
}

pub fn assemble(disc: &Discretization, omega: C64, nu: f64) -> Result<DiscreteOperator> {
    if !(nu >= 0.0) || !omega.is_finite() {
        return Err(Error::InvalidInput(format!("need nu >= 0 and finite omega, got nu = {nu}, omega = {omega}")));
    }
    let w2 = omega * omega;
    let (pat, slot, order) = if nu == 0.0 { (&disc.second, 0, 2) } else { (&disc.fourth, 1, 4) };
    let mut values: Vec<C64> = disc.k1[slot]
        .iter()
        .zip(&disc.k2[slot])
        .map(|(a, b)| w2 * a - (1.0 - w2) * b)
        .collect();
    let mut principal_rows = vec![0.0; pat.n];
    for (k, v) in values.iter().enumerate() {
        principal_rows[pat.row_idx[k]] += v.norm();
    }
    if nu > 0.0 {
        let c = C64::new(0.0, 1.0) * omega * nu;
        for (v, b) in values.iter_mut().zip(&disc.bilap) {
            *v += c * b;
        }
    }
    Ok(DiscreteOperator {
        omega,
        nu,
        tau: disc.tau,
        order,
        n: pat.n,
        col_ptr: pat.col_ptr.clone(),
        row_idx: pat.row_idx.clone(),
        values,
        principal_rows,
    })
}

pub struct Factor {
    lu: Lu<usize, C64>,
    n: usize,
}

impl Factor {
    pub fn solve(&self, b: &mut [C64]) {
        let k = b.len() / self.n;
        self.lu.solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(b, self.n, k));
    }

    /// Solves with the conjugate transpose.
    pub fn solve_adjoint(&self, b: &mut [C64]) {
        let k = b.len() / self.n;
        self.lu.solve_transpose_in_place_with_conj(Conj::Yes, MatMut::from_column_major_slice_mut(b, self.n, k));
    }
}

impl DiscreteOperator {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Largest number of stored entries in one column.
    pub fn max_column_nnz(&self) -> usize {
        self.col_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * x[c];
            }
        }
        y
    }

    /// Row sums of `|A_ij|` with the viscous term left out.
    pub fn row_scale(&self) -> &[f64] {
        &self.principal_rows
    }

    pub fn factor(&self) -> Result<Factor> {
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym, &self.values);
        let s = SymbolicLu::try_new(sym).map_err(|e| Error::Linear(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(s, mat).map_err(|e| Error::Linear(format!("{e:?}")))?;
        Ok(Factor { lu, n: self.n })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    #[serde(skip)]
    pub u: Vec<C64>,
    /// Relative to `||u||^2`; meaningful for `tau = 0`.
    pub green_residual: f64,
    pub l2: f64,
}

/// Solves `P u = f` with `u = 0` on the boundary (and `du = 0` when `nu > 0`).
/// `f` holds values at all nodes.
pub fn solve_pde(disc: &Discretization, op: &DiscreteOperator, f: &[C64]) -> Result<Solution> {
    if f.len() != disc.mesh.nodes.len() {
        return Err(Error::InvalidInput("right-hand side has the wrong length".into()));
    }
    let rhs: Vec<C64> = disc.interior.iter().map(|&i| disc.mass[i] * f[i]).collect();
    let mut v = rhs.clone();
    let fac = match op.factor() {
        Ok(f) => f,
        Err(e) => {
            let s = sigma_min(op, &Scaling::Mass(disc.mass_interior())).map(|s| s.value).unwrap_or(f64::NAN);
            return Err(Error::Linear(format!("{e}; sigma_min estimate {s:e}")));
        }
    };
    fac.solve(&mut v);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Linear("near-singular operator".into()));
    }
    let u = disc.extend_zero(&v);
    let green_residual = green_residual(disc, op, &u, &rhs);
    Ok(Solution {
        l2: disc.l2_norm(&u),
        u,
        green_residual,
    })
}

impl Discretization {
    fn mass_interior(&self) -> Vec<f64> {
        self.interior.iter().map(|&i| self.mass[i].norm()).collect()
    }
}

/// `|Im <P u, u> - Re w (nu ||Lap u||^2 + 2 Im w ||grad u||^2)| / ||u||^2`, where
/// `<P u, u>` pairs the load vector with `u`.
pub fn green_residual(disc: &Discretization, op: &DiscreteOperator, u: &[C64], load: &[C64]) -> f64 {
    let v = disc.restrict(u);
    let pair: C64 = v.iter().zip(load).map(|(a, b)| a.conj() * b).sum();
    let grad = disc.gradient_energy(u).re;
    let lap = disc.laplacian_energy(u);
    let w = op.omega;
    let rhs = w.re * (op.nu * lap + 2.0 * w.im * grad);
    let n2 = disc.l2_norm(u).powi(2);
    (pair.im - rhs).abs() / n2
}

/// Row and column weights for `sigma_min(D_l A D_r)`.
#[derive(Clone, Debug)]
pub enum Scaling {
    /// `M^-1/2 A M^-1/2` with the (absolute) lumped mass.
    Mass(Vec<f64>),
    /// `D^-1 A` with `D` the row sums of `|A|` over its viscosity-free part.
    Rows,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SigmaMin {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn orthonormalize(q: &mut [C64], n: usize, k: usize) {
    for a in 0..k {
        for b in 0..a {
            let (lo, hi) = q.split_at_mut(a * n);
            let qb = &lo[b * n..(b + 1) * n];
            let qa = &mut hi[..n];
            let d: C64 = qb.iter().zip(qa.iter()).map(|(x, y)| x.conj() * y).sum();
            for (y, x) in qa.iter_mut().zip(qb) {
                *y -= d * x;
            }
        }
        let col = &mut q[a * n..(a + 1) * n];
        let nrm = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in col.iter_mut() {
            *x /= nrm;
        }
    }
}

/// Smallest singular value by block inverse iteration on the normal equations.
pub fn sigma_min(op: &DiscreteOperator, scaling: &Scaling) -> Result<SigmaMin> {
    let fac = op.factor()?;
    sigma_min_with(op, &fac, scaling)
}

fn sigma_min_with(op: &DiscreteOperator, fac: &Factor, scaling: &Scaling) -> Result<SigmaMin> {
    let n = op.n;
    let (dl, dr): (Vec<f64>, Vec<f64>) = match scaling {
        Scaling::Mass(m) => {
            let s: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
            (s.clone(), s)
        }
        Scaling::Rows => (op.row_scale().iter().map(|x| 1.0 / x).collect(), vec![1.0; n]),
    };
    let k = BLOCK.min(n);
    let mut q: Vec<C64> = (0..k * n)
        .map(|i| {
            let (c, r) = ((i / n + 1) as f64, (i % n) as f64);
            C64::new((0.37 * c * r + 0.1).sin() + 1.0 / c, (0.23 * c * r).cos())
        })
        .collect();
    orthonormalize(&mut q, n, k);
    let mut prev = f64::INFINITY;
    for it in 1..=SIGMA_MAX_ITER {
        // z = D_r^-1 A^-1 D_l^-2 A^-H D_r^-1 q
        let mut z = q.clone();
        for c in 0..k {
            for i in 0..n {
                z[c * n + i] /= dr[i];
            }
        }
        fac.solve_adjoint(&mut z);
        for c in 0..k {
            for i in 0..n {
                z[c * n + i] /= dl[i] * dl[i];
            }
        }
        fac.solve(&mut z);
        for c in 0..k {
            for i in 0..n {
                z[c * n + i] /= dr[i];
            }
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Linear("singular operator".into()));
        }
        let mut h = nalgebra::DMatrix::<C64>::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                h[(a, b)] = (0..n).map(|i| q[a * n + i].conj() * z[b * n + i]).sum();
            }
        }
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let mu = h.symmetric_eigenvalues().max();
        let sigma = 1.0 / mu.sqrt();
        if (sigma - prev).abs() <= SIGMA_TOL * sigma {
            return Ok(SigmaMin {
                value: sigma,
                iterations: it,
                converged: true,
            });
        }
        prev = sigma;
        q = z;
        orthonormalize(&mut q, n, k);
    }
    Ok(SigmaMin {
        value: prev,
        iterations: SIGMA_MAX_ITER,
        converged: false,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanRow {
    pub omega_re: f64,
    pub omega_im: f64,
    pub nu: f64,
    pub sigma_min_raw: f64,
    pub sigma_min_scaled: f64,
    pub converged: bool,
}

/// `sigma_min` (raw and row-scaled) at every `(omega, nu)`; each cell is factored separately.
pub fn sigma_min_scan(disc: &Discretization, omegas: &[C64], nus: &[f64]) -> Result<Vec<ScanRow>> {
    let cells: Vec<(C64, f64)> = nus.iter().flat_map(|&nu| omegas.iter().map(move |&w| (w, nu))).collect();
    let mass = disc.mass_interior();
    let rows: Vec<Result<ScanRow>> = cells
        .par_iter()
        .map(|&(w, nu)| {
            let op = assemble(disc, w, nu)?;
            let (raw, scaled) = match op.factor() {
                Ok(fac) => (
                    sigma_min_with(&op, &fac, &Scaling::Mass(mass.clone()))?,
                    sigma_min_with(&op, &fac, &Scaling::Rows)?,
                ),
                Err(_) => {
                    let z = SigmaMin {
                        value: 0.0,
                        iterations: 0,
                        converged: false,
                    };
                    (z, z)
                }
            };
            Ok(ScanRow {
                omega_re: w.re,
                omega_im: w.im,
                nu,
                sigma_min_raw: raw.value,
                sigma_min_scaled: scaled.value,
                converged: raw.converged && scaled.converged,
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// `n_re x n_im` samples of `[re0, re1] x [im0, im1]`, real part fastest.
pub fn omega_grid(re: (f64, f64), im: (f64, f64), n_re: usize, n_im: usize) -> Vec<C64> {
    let lin = |a: f64, b: f64, k: usize, n: usize| if n == 1 { 0.5 * (a + b) } else { a + (b - a) * k as f64 / (n - 1) as f64 };
    (0..n_im)
        .flat_map(|j| (0..n_re).map(move |i| C64::new(lin(re.0, re.1, i, n_re), lin(im.0, im.1, j, n_im))))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Floor {
    pub nu: f64,
    pub raw: f64,
    pub scaled: f64,
}

/// Minimum over the `omega` box for each `nu`.
pub fn floors(rows: &[ScanRow], nus: &[f64]) -> Vec<Floor> {
    nus.iter()
        .map(|&nu| {
            let sel = rows.iter().filter(|r| r.nu == nu);
            let (raw, scaled) = sel.fold((f64::INFINITY, f64::INFINITY), |(a, b), r| {
                (a.min(r.sigma_min_raw), b.min(r.sigma_min_scaled))
            });
            Floor { nu, raw, scaled }
        })
        .collect()
}

/// Error of the manufactured solution `(1 - r^2)^2` on the unit disk, in the discrete
/// `L^2` norm relative to the exact solution.
pub fn manufactured_disk_error(n: usize, omega: C64, nu: f64) -> Result<f64> {
    let spec = DomainSpec::circle(0.5f64.sqrt());
    let disc = Discretization::flat(&spec, n, n)?;
    let w2 = omega * omega;
    let i = C64::new(0.0, 1.0);
    let f = disc.sample(|x| {
        let r2 = x[0] * x[0] + x[1] * x[1];
        let d11 = -4.0 * (1.0 - r2) + 8.0 * x[0] * x[0];
        let d22 = -4.0 * (1.0 - r2) + 8.0 * x[1] * x[1];
        -w2 * d11 + (1.0 - w2) * d22 + i * omega * nu * 64.0
    });
    let op = assemble(&disc, omega, nu)?;
    let sol = solve_pde(&disc, &op, &f)?;
    let exact = disc.sample(|x| C64::new((1.0 - x[0] * x[0] - x[1] * x[1]).powi(2), 0.0));
    let diff: Vec<C64> = sol.u.iter().zip(&exact).map(|(a, b)| a - b).collect();
    Ok(disc.l2_norm(&diff) / disc.l2_norm(&exact))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub nu: f64,
    pub l2: f64,
    pub h1: f64,
    pub green_residual: f64,
    /// Correlation of `|grad u|` with the attractor indicator.
    pub correlation: Option<f64>,
    #[serde(skip)]
    pub gradient: Vec<f64>,
    #[serde(skip)]
    pub error: Option<String>,
}

/// Solves `P_{omega, nu} u = f` for each `nu`; failures are recorded and the sweep continues.
pub fn viscosity_sweep(
    disc: &Discretization,
    f: &[C64],
    omega: f64,
    nus: &[f64],
    attractor: Option<&[[f64; 2]]>,
) -> Vec<SweepRow> {
    let cells = disc.mesh.cells();
    nus.iter()
        .map(|&nu| {
            let res = assemble(disc, C64::new(omega, 0.0), nu).and_then(|op| solve_pde(disc, &op, f));
            match res {
                Ok(sol) => {
                    let gradient = disc.cell_gradients(&sol.u);
                    let g = disc.gradient_energy(&sol.u).re.max(0.0);
                    SweepRow {
                        nu,
                        l2: sol.l2,
                        h1: (sol.l2 * sol.l2 + g).sqrt(),
                        green_residual: sol.green_residual,
                        correlation: attractor.map(|a| attractor_correlation(&cells, &gradient, a, ATTRACTOR_WIDTH)),
                        gradient,
                        error: None,
                    }
                }
                Err(e) => SweepRow {
                    nu,
                    l2: f64::NAN,
                    h1: f64::NAN,
                    green_residual: f64::NAN,
                    correlation: None,
                    gradient: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Width of the Gaussian tube around the attractor polygon.
pub const ATTRACTOR_WIDTH: f64 = 0.04;

fn segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let p = [a[0] + t * d[0], a[1] + t * d[1]];
    ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt()
}

/// Area-weighted Pearson correlation of `values` with `exp(-d^2 / 2 w^2)`, `d` the distance
/// to the closed polygon.
pub fn attractor_correlation(cells: &[([f64; 2], f64)], values: &[f64], polygon: &[[f64; 2]], width: f64) -> f64 {
    let ind: Vec<f64> = cells
        .iter()
        .map(|(c, _)| {
            let d = (0..polygon.len())
                .map(|k| segment_distance(*c, polygon[k], polygon[(k + 1) % polygon.len()]))
                .fold(f64::INFINITY, f64::min);
            (-d * d / (2.0 * width * width)).exp()
        })
        .collect();
    let wsum: f64 = cells.iter().map(|c| c.1).sum();
    let mean = |v: &[f64]| v.iter().zip(cells).map(|(x, c)| x * c.1).sum::<f64>() / wsum;
    let (ma, mb) = (mean(values), mean(&ind));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for ((a, b), c) in values.iter().zip(&ind).zip(cells) {
        sab += c.1 * (a - ma) * (b - mb);
        saa += c.1 * (a - ma).powi(2);
        sbb += c.1 * (b - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Boundary points of the trajectory from `t0` after discarding `skip` reflections.
pub fn cycle_polygon(bil: &Billiard, t0: f64, skip: usize, len: usize) -> Vec<[f64; 2]> {
    let traj = bil.trajectory(t0, skip + len);
    traj[skip + 1..].iter().map(|&t| bil.spec.point(t, 0)).collect()
}
