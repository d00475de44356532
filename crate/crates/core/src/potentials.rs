//! Fundamental solutions of `P = -lambda^2 d1^2 + (1 - lambda^2) d2^2` on the flat and
//! deformed domains, and the single layer potential restricted to the boundary.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::deformation::DeformationMap;
use crate::geometry::RealForms;
use crate::{Error, Result, Sign, C64};

/// `i / (4 pi lambda sqrt(1 - lambda^2))`.
pub fn prefactor(lambda: f64) -> C64 {
    C64::new(0.0, 1.0 / (4.0 * PI * lambda * (1.0 - lambda * lambda).sqrt()))
}

/// `log(y + i0)`.
pub fn log_i0(y: f64) -> C64 {
    if y > 0.0 {
        C64::new(y.ln(), 0.0)
    } else {
        C64::new((-y).ln(), PI)
    }
}

/// Holomorphic logarithm on `C \ iR_-`, returning the argument in `[-pi/2, 3pi/2)`.
pub fn branch_log(z: C64) -> Result<(C64, f64)> {
    if z.norm() == 0.0 || !z.is_finite() {
        return Err(Error::Branch(format!("log of {z}")));
    }
    let mut a = z.im.atan2(z.re);
    if a < -PI / 2.0 {
        a += 2.0 * PI;
    }
    Ok((C64::new(z.norm().ln(), a), a))
}

/// `E_{lambda + i0}(x)`.
pub fn fundamental_flat(lambda: f64, x: [f64; 2]) -> Result<C64> {
    let f = RealForms::new(lambda);
    let a = f.ell(Sign::Plus, x) * f.ell(Sign::Minus, x);
    if a.abs() <= 1e-12 * (f.a * f.a + f.b * f.b) * (x[0] * x[0] + x[1] * x[1]) {
        return Err(Error::InvalidInput(format!("x = {x:?} lies on a characteristic line")));
    }
    Ok(prefactor(lambda) * log_i0(a))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelSample {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub value: C64,
    /// Argument of `A(Xi x - Xi y)`.
    pub branch_angle: f64,
}

/// `c log(A(Xi x - Xi y)) det D Xi(y)`.
pub fn fundamental_deformed(dmap: &DeformationMap, x: [f64; 2], y: [f64; 2]) -> Result<KernelSample> {
    if x == y {
        return Err(Error::InvalidInput("kernel is singular at x = y".into()));
    }
    let ex = dmap.extend(x)?;
    let ey = dmap.extend(y)?;
    let forms = dmap.forms();
    let d = [ex.xi[0] - ey.xi[0], ex.xi[1] - ey.xi[1]];
    let (lg, arg) = branch_log(forms.quad(d))?;
    Ok(KernelSample {
        x,
        y,
        value: prefactor(forms.lambda) * lg * ey.det(),
        branch_angle: arg,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchReport {
    pub tau: f64,
    pub pairs: usize,
    pub min_angle: f64,
    pub max_angle: f64,
    /// `max(-min, max - pi, 0)`.
    pub alpha0: f64,
    pub pass: bool,
    /// Smallest `C` with `Im A + C^2 tau |Re A| >= tau |x - y|^2 / (2C)` over the pairs.
    pub fitted_c: f64,
}

fn lower_bound_c(im: f64, re: f64, tau: f64, d2: f64) -> f64 {
    let ok = |c: f64| im + c * c * tau * re.abs() >= tau * d2 / (2.0 * c);
    if ok(1.0) {
        return 1.0;
    }
    let mut hi = 2.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Branch angles of `A(Xi x - Xi y)` over all pairs of `grid x grid` samples (at most `max_pairs`).
pub fn branch_study(dmap: &DeformationMap, grid: usize, max_pairs: usize) -> Result<BranchReport> {
    let xs = dmap.sample_grid(grid);
    let ext: Vec<Result<[C64; 2]>> = xs.par_iter().map(|&x| dmap.extend(x).map(|e| e.xi)).collect();
    let mut xi = Vec::with_capacity(xs.len());
    for e in ext {
        xi.push(e?);
    }
    let forms = dmap.forms();
    let n = xs.len();
    let total = n * (n - 1) / 2;
    let stride = total.div_ceil(max_pairs.max(1)).max(1);
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    let mut c = 1.0f64;
    let mut count = 0;
    let mut k = 0usize;
    for a in 0..n {
        for b in a + 1..n {
            k += 1;
            if !k.is_multiple_of(stride) {
                continue;
            }
            let d = [xi[a][0] - xi[b][0], xi[a][1] - xi[b][1]];
            let q = forms.quad(d);
            let (_, arg) = branch_log(q)?;
            mn = mn.min(arg);
            mx = mx.max(arg);
            let d2 = (xs[a][0] - xs[b][0]).powi(2) + (xs[a][1] - xs[b][1]).powi(2);
            c = c.max(lower_bound_c(q.im, q.re, dmap.tau, d2));
            count += 1;
        }
    }
    let alpha0 = (-mn).max(mx - PI).max(0.0);
    Ok(BranchReport {
        tau: dmap.tau,
        pairs: count,
        min_angle: mn,
        max_angle: mx,
        alpha0,
        pass: alpha0 < PI / 2.0,
        fitted_c: c,
    })
}

/// `G(s) = s^2 log|s| / 2 - 3 s^2 / 4`, so that `G'' = log|s|`.
fn g2(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        0.5 * s * s * s.abs().ln() - 0.75 * s * s
    }
}

/// `int int log|alpha w1 + beta w2|` over `[x0, x1] x [y0, y1]`.
fn rect_log_linear(alpha: f64, beta: f64, x: (f64, f64), y: (f64, f64)) -> f64 {
    let f = |u: f64, v: f64| g2(alpha * u + beta * v);
    (f(x.1, y.1) - f(x.0, y.1) - f(x.1, y.0) + f(x.0, y.0)) / (alpha * beta)
}

fn clip(poly: &[[f64; 2]], n: [f64; 2], keep_positive: bool) -> Vec<[f64; 2]> {
    let s = if keep_positive { 1.0 } else { -1.0 };
    let val = |p: [f64; 2]| s * (n[0] * p[0] + n[1] * p[1]);
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (vp, vq) = (val(p), val(q));
        if vp >= 0.0 {
            out.push(p);
        }
        if (vp >= 0.0) != (vq >= 0.0) {
            let t = vp / (vp - vq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let mut a = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        a += p[0] * q[1] - p[1] * q[0];
    }
    0.5 * a.abs()
}

/// `int_{cell} E_{lambda + i0}` over `[x0, x1] x [y0, y1]`.
pub fn cell_integral(lambda: f64, x: (f64, f64), y: (f64, f64)) -> C64 {
    let f = RealForms::new(lambda);
    let re = rect_log_linear(f.a, f.b, x, y) + rect_log_linear(-f.a, f.b, x, y);
    let rect = [[x.0, y.0], [x.1, y.0], [x.1, y.1], [x.0, y.1]];
    let (np, nm) = ([f.a, f.b], [-f.a, f.b]);
    let neg = area(&clip(&clip(&rect, np, true), nm, false)) + area(&clip(&clip(&rect, np, false), nm, true));
    prefactor(lambda) * C64::new(re, PI * neg)
}

/// Square grid of `n x n` cells on `[-half, half]^2`, values at cell centres.
#[derive(Clone, Copy, Debug)]
pub struct CellGrid {
    pub n: usize,
    pub half: f64,
}

impl CellGrid {
    pub fn h(&self) -> f64 {
        2.0 * self.half / self.n as f64
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.h();
        [-self.half + (i as f64 + 0.5) * h, -self.half + (j as f64 + 0.5) * h]
    }
}

fn fft2(data: &mut [C64], m: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

/// `E_{lambda + i0} * f` for `f` given at cell centres (row-major, index `i * n + j`
/// for the point `center(i, j)`), with `f` constant on each cell.
pub fn apply_e_flat(lambda: f64, grid: CellGrid, f: &[C64]) -> Result<Vec<C64>> {
    let n = grid.n;
    if f.len() != n * n {
        return Err(Error::InvalidInput("grid function has the wrong length".into()));
    }
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let edge = (0..n)
        .flat_map(|k| [(0, k), (n - 1, k), (k, 0), (k, n - 1)])
        .fold(0.0f64, |m, (i, j)| m.max(f[i * n + j].norm()));
    if edge > 1e-6 * scale {
        return Err(Error::InvalidInput("support touches the grid boundary".into()));
    }
    let h = grid.h();
    let m = 2 * n;
    let mut ker = vec![C64::new(0.0, 0.0); m * m];
    let rows: Vec<(usize, Vec<C64>)> = (0..m)
        .into_par_iter()
        .filter(|&a| a != n)
        .map(|a| {
            let di = if a < n { a as f64 } else { a as f64 - m as f64 };
            let row = (0..m)
                .map(|b| {
                    if b == n {
                        return C64::new(0.0, 0.0);
                    }
                    let dj = if b < n { b as f64 } else { b as f64 - m as f64 };
                    cell_integral(lambda, ((di - 0.5) * h, (di + 0.5) * h), ((dj - 0.5) * h, (dj + 0.5) * h))
                })
                .collect();
            (a, row)
        })
        .collect();
    for (a, row) in rows {
        ker[a * m..(a + 1) * m].copy_from_slice(&row);
    }
    let mut buf = vec![C64::new(0.0, 0.0); m * m];
    for i in 0..n {
        buf[i * m..i * m + n].copy_from_slice(&f[i * n..(i + 1) * n]);
    }
    fft2(&mut ker, m, false);
    fft2(&mut buf, m, false);
    for (b, k) in buf.iter_mut().zip(&ker) {
        *b *= k;
    }
    fft2(&mut buf, m, true);
    let norm = 1.0 / (m * m) as f64;
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = buf[i * m + j] * norm;
        }
    }
    Ok(out)
}

/// Relative `L^2` error of `E(P u) - u` for the Gaussian `exp(-|x - c|^2 / (2 s^2))`.
pub fn gaussian_identity_error(lambda: f64, grid: CellGrid, sigma: f64, c: [f64; 2]) -> Result<f64> {
    let n = grid.n;
    let mut u = vec![C64::new(0.0, 0.0); n * n];
    let mut f = vec![C64::new(0.0, 0.0); n * n];
    let s2 = sigma * sigma;
    for i in 0..n {
        for j in 0..n {
            let x = grid.center(i, j);
            let (a, b) = (x[0] - c[0], x[1] - c[1]);
            let g = (-(a * a + b * b) / (2.0 * s2)).exp();
            let d11 = (a * a / (s2 * s2) - 1.0 / s2) * g;
            let d22 = (b * b / (s2 * s2) - 1.0 / s2) * g;
            u[i * n + j] = C64::new(g, 0.0);
            f[i * n + j] = C64::new(-lambda * lambda * d11 + (1.0 - lambda * lambda) * d22, 0.0);
        }
    }
    let v = apply_e_flat(lambda, grid, &f)?;
    let num: f64 = v.iter().zip(&u).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = u.iter().map(|a| a.norm_sqr()).sum();
    Ok((num / den).sqrt())
}

/// Deformed boundary data at `n` equispaced parameters.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub n: usize,
    pub lambda: f64,
    pub tau: f64,
    pub theta: Vec<f64>,
    pub xi: Vec<[C64; 2]>,
    pub tangent: Vec<[C64; 2]>,
    pub det: Vec<C64>,
}

impl BoundaryData {
    pub fn new(dmap: &DeformationMap, n: usize) -> Result<Self> {
        let theta: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
        let rows: Vec<Result<_>> = theta
            .par_iter()
            .map(|&t| {
                let x = dmap.spec().point(t, 0);
                Ok((dmap.boundary(t)?, dmap.boundary_tangent(t)?, dmap.extend(x)?.det()))
            })
            .collect();
        let mut xi = Vec::with_capacity(n);
        let mut tangent = Vec::with_capacity(n);
        let mut det = Vec::with_capacity(n);
        for r in rows {
            let (a, b, c) = r?;
            xi.push(a);
            tangent.push(b);
            det.push(c);
        }
        Ok(BoundaryData {
            n,
            lambda: dmap.spec().lambda,
            tau: dmap.tau,
            theta,
            xi,
            tangent,
            det,
        })
    }
}

/// Weights `R_j(t)` with `int log(4 sin^2 pi(t - s)) f(s) ds ~ sum_j R_j(t) f(t_j)`,
/// and their `t`-derivatives.
fn log_weights(n: usize, t: f64, tj: f64) -> (f64, f64) {
    let d = t - tj;
    let half = n / 2;
    let mut w = 0.0;
    let mut dw = 0.0;
    for m in 1..half {
        let a = 2.0 * PI * m as f64 * d;
        w += 2.0 / m as f64 * a.cos();
        dw -= 4.0 * PI * a.sin();
    }
    let a = PI * n as f64 * d;
    w += 2.0 / n as f64 * a.cos();
    dw -= 2.0 * PI * a.sin();
    (-w / n as f64, -dw / n as f64)
}

fn log4sin2(d: f64) -> f64 {
    (4.0 * (PI * d).sin().powi(2)).ln()
}

/// The restricted single layer on the deformed boundary, discretised with
/// trapezoidal weights and the logarithmic part integrated exactly.
#[derive(Clone, Debug)]
pub struct NystromSystem {
    pub data: BoundaryData,
    pub matrix: DMatrix<C64>,
    pub max_branch_angle: f64,
    pub min_branch_angle: f64,
}

pub fn layer_ops(dmap: &DeformationMap, n: usize) -> Result<NystromSystem> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidInput("need an even number of nodes >= 8".into()));
    }
    let data = BoundaryData::new(dmap, n)?;
    let forms = dmap.forms();
    let c = prefactor(forms.lambda);
    let rows: Vec<Result<(Vec<C64>, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![C64::new(0.0, 0.0); n];
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for (j, r) in row.iter_mut().enumerate() {
                let s = if i == j {
                    let (lg, _) = branch_log(forms.quad(data.tangent[i]))?;
                    lg - (4.0 * PI * PI).ln()
                } else {
                    let d = [data.xi[i][0] - data.xi[j][0], data.xi[i][1] - data.xi[j][1]];
                    let (lg, arg) = branch_log(forms.quad(d))?;
                    mn = mn.min(arg);
                    mx = mx.max(arg);
                    lg - log4sin2(data.theta[i] - data.theta[j])
                };
                let (rw, _) = log_weights(n, data.theta[i], data.theta[j]);
                *r = c * data.det[j] * (rw + s / n as f64);
            }
            Ok((row, mn, mx))
        })
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, r) in rows.into_iter().enumerate() {
        let (row, a, b) = r?;
        for (j, v) in row.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
        mn = mn.min(a);
        mx = mx.max(b);
    }
    Ok(NystromSystem {
        data,
        matrix,
        max_branch_angle: mx,
        min_branch_angle: mn,
    })
}

impl NystromSystem {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let x = nalgebra::DVector::from_column_slice(v);
        (&self.matrix * x).iter().copied().collect()
    }

    /// `(C v)(t)` at an arbitrary parameter, with the deformed point `xi_t`.
    pub fn eval_at(&self, dmap: &DeformationMap, v: &[C64], t: f64) -> Result<C64> {
        self.eval_with_derivative(dmap, v, t).map(|r| r.0)
    }

    /// `(C v)(t)` and `(T^+ v + T^- v)(t)` where `T^{+-}` have kernels `K_{+-}`.
    pub fn eval_with_derivative(&self, dmap: &DeformationMap, v: &[C64], t: f64) -> Result<(C64, C64)> {
        let d = &self.data;
        let forms = dmap.forms();
        let c = prefactor(forms.lambda);
        let zt = dmap.boundary(t)?;
        let tt = dmap.boundary_tangent(t)?;
        let n = d.n;
        let mut val = C64::new(0.0, 0.0);
        let mut der = C64::new(0.0, 0.0);
        for j in 0..n {
            let diff = t - d.theta[j];
            let (rw, drw) = log_weights(n, t, d.theta[j]);
            let w = c * d.det[j] * v[j];
            let delta = [zt[0] - d.xi[j][0], zt[1] - d.xi[j][1]];
            let frac = diff - diff.round();
            if frac.abs() < 1e-12 {
                let (lg, _) = branch_log(forms.quad(tt))?;
                val += w * (rw + (lg - (4.0 * PI * PI).ln()) / n as f64);
                // the smooth remainder's derivative is not needed at nodes for the checks here
                der += w * drw;
                continue;
            }
            let (lg, _) = branch_log(forms.quad(delta))?;
            val += w * (rw + (lg - log4sin2(diff)) / n as f64);
            let dlog: C64 = Sign::BOTH
                .iter()
                .map(|&s| forms.ell_c(s, tt) / forms.ell_c(s, delta))
                .sum();
            der += w * (drw + (dlog - 2.0 * PI / (PI * diff).tan()) / n as f64);
        }
        Ok((val, der))
    }

    /// Bilinear pairing `sum_i phi_i (C psi)_i / n`.
    pub fn pairing(&self, phi: &[C64], psi: &[C64]) -> C64 {
        let cp = self.apply(psi);
        phi.iter().zip(&cp).map(|(a, b)| a * b).sum::<C64>() / self.data.n as f64
    }
}

/// `<phi, C psi>` by the same quadrature, without forming the matrix.
pub fn pairing(dmap: &DeformationMap, n: usize, phi: &(dyn Fn(f64) -> f64 + Sync), psi: &(dyn Fn(f64) -> f64 + Sync)) -> Result<C64> {
    let data = BoundaryData::new(dmap, n)?;
    let forms = dmap.forms();
    let c = prefactor(forms.lambda);
    let parts: Vec<Result<C64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                let s = if i == j {
                    branch_log(forms.quad(data.tangent[i]))?.0 - (4.0 * PI * PI).ln()
                } else {
                    let d = [data.xi[i][0] - data.xi[j][0], data.xi[i][1] - data.xi[j][1]];
                    branch_log(forms.quad(d))?.0 - log4sin2(data.theta[i] - data.theta[j])
                };
                let (rw, _) = log_weights(n, data.theta[i], data.theta[j]);
                acc += data.det[j] * psi(data.theta[j]) * (rw + s / n as f64);
            }
            Ok(phi(data.theta[i]) * acc)
        })
        .collect();
    let mut total = C64::new(0.0, 0.0);
    for p in parts {
        total += p?;
    }
    Ok(c * total / n as f64)
}

/// `K_{+-}(t, s) = c ell^{+-}(d/dt Xi z(t)) / ell^{+-}(Xi z(t) - Xi z(s)) det D Xi(z(s))`.
pub fn kernel_k(dmap: &DeformationMap, sign: Sign, t: f64, s: f64) -> Result<C64> {
    let d = t - s;
    if (d - d.round()).abs() < 1e-15 {
        return Err(Error::InvalidInput("K is singular on the diagonal".into()));
    }
    let forms = dmap.forms();
    let zt = dmap.boundary(t)?;
    let zs = dmap.boundary(s)?;
    let den = forms.ell_c(sign, [zt[0] - zs[0], zt[1] - zs[1]]);
    if den.norm() < 1e-14 {
        return Err(Error::InvalidInput("K is singular on the graph of the involution".into()));
    }
    let det = dmap.extend(dmap.spec().point(s, 0))?.det();
    Ok(prefactor(forms.lambda) * forms.ell_c(sign, dmap.boundary_tangent(t)?) / den * det)
}

/// Rows `theta, theta', Re K+, Im K+, Re K-, Im K-` off the diagonal.
pub fn kernel_table(dmap: &DeformationMap, n: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (t, s) = (i as f64 / n as f64, j as f64 / n as f64);
            let (Ok(kp), Ok(km)) = (kernel_k(dmap, Sign::Plus, t, s), kernel_k(dmap, Sign::Minus, t, s)) else {
                continue;
            };
            rows.push(vec![t, s, kp.re, kp.im, km.re, km.im]);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct DensitySolution {
    #[serde(skip)]
    pub v: Vec<C64>,
    pub residual: f64,
    pub condition: f64,
    pub regularization: f64,
    pub ill_posed: bool,
}

/// Residual threshold above which the solve is flagged.
pub const RESIDUAL_WARN: f64 = 1e-6;

/// Tikhonov-regularised solve of `C v = phi` through the SVD.
pub fn solve_boundary_density(sys: &NystromSystem, phi: &[C64], alpha: f64) -> Result<DensitySolution> {
    let n = sys.data.n;
    if phi.len() != n {
        return Err(Error::InvalidInput("data has the wrong length".into()));
    }
    let svd = sys.matrix.clone().svd(true, true);
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(Error::Linear("svd failed".into())),
    };
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let rhs = nalgebra::DVector::from_column_slice(phi);
    let uh = u.adjoint() * &rhs;
    let a2 = alpha * smax * smax;
    let coef = nalgebra::DVector::from_iterator(n, (0..n).map(|k| uh[k] * (s[k] / (s[k] * s[k] + a2))));
    let v = vt.adjoint() * coef;
    let r = &sys.matrix * &v - &rhs;
    let rn = rhs.norm();
    let residual = if rn > 0.0 { r.norm() / rn } else { r.norm() };
    Ok(DensitySolution {
        v: v.iter().copied().collect(),
        residual,
        condition: smax / smin,
        regularization: alpha,
        ill_posed: residual > RESIDUAL_WARN,
    })
}

/// 2-norm condition number of the Nystrom matrix.
pub fn condition_number(sys: &NystromSystem) -> f64 {
    let s = sys.matrix.clone().singular_values();
    s.max() / s.min()
}

/// `S v(x) = sum_j c log(A(Xi x - Xi z(t_j))) det_j v_j / n` for interior `x`.
pub fn single_layer_eval(sys: &NystromSystem, dmap: &DeformationMap, v: &[C64], x: [f64; 2]) -> Result<C64> {
    let d = &sys.data;
    let forms = dmap.forms();
    let xi = dmap.extend(x)?.xi;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..d.n {
        let delta = [xi[0] - d.xi[j][0], xi[1] - d.xi[j][1]];
        acc += branch_log(forms.quad(delta))?.0 * d.det[j] * v[j];
    }
    Ok(prefactor(forms.lambda) * acc / d.n as f64)
}
