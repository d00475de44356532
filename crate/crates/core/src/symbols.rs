//! Principal symbols of the flat and deformed operators, ellipticity constants
//! and the boundary root-splitting conditions.
//!
//! Convention: an operator `sum a_pq d1^p d2^q` of order `m` has symbol
//! `i^m sum a_pq xi1^p xi2^q`, so `p = w^2 xi1^2 - (1 - w^2) xi2^2` and `q = |xi|^4`.

use nalgebra::{Complex, Matrix4};
use rayon::prelude::*;
use serde::Serialize;

use crate::deformation::DeformationMap;
use crate::geometry::LinearForms;
use crate::{Error, Result, Sign, C64};

pub type Jac = [[C64; 2]; 2];

pub const IDENTITY: Jac = [
    [C64 { re: 1.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }],
    [C64 { re: 0.0, im: 0.0 }, C64 { re: 1.0, im: 0.0 }],
];

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlatSymbols {
    pub p: C64,
    pub q: C64,
    /// `p + i w nu q`.
    pub a: C64,
    /// Symbol of `d2^2 - w^2 Lap + 2 i w nu Lap^2 + nu^2 Lap^3`.
    pub a6: C64,
}

fn quad_p(omega: C64, xi: [C64; 2]) -> C64 {
    omega * omega * xi[0] * xi[0] - (1.0 - omega * omega) * xi[1] * xi[1]
}

fn dot(xi: [C64; 2]) -> C64 {
    xi[0] * xi[0] + xi[1] * xi[1]
}

/// Symbols at a (possibly complex) covector.
pub fn symbols_at(omega: C64, nu: f64, xi: [C64; 2]) -> FlatSymbols {
    let p = quad_p(omega, xi);
    let s = dot(xi);
    let q = s * s;
    let i = C64::i();
    FlatSymbols {
        p,
        q,
        a: p + i * omega * nu * q,
        a6: p + 2.0 * i * omega * nu * q - nu * nu * q * s,
    }
}

pub fn flat_symbols(omega: C64, nu: f64, xi: [f64; 2]) -> Result<FlatSymbols> {
    LinearForms::new(omega)?;
    Ok(symbols_at(omega, nu, xi.map(|v| C64::new(v, 0.0))))
}

/// `p = -4 xi(L^+) xi(L^-)`.
pub fn p_factored(omega: C64, xi: [f64; 2]) -> Result<C64> {
    let f = LinearForms::new(omega)?;
    let pair = |s: Sign| {
        let l = f.lvec(s);
        l[0] * xi[0] + l[1] * xi[1]
    };
    Ok(-4.0 * pair(Sign::Plus) * pair(Sign::Minus))
}

pub fn det(j: &Jac) -> C64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// `tJ^{-1} xi`.
pub fn pushforward(j: &Jac, xi: [C64; 2]) -> Result<[C64; 2]> {
    let d = det(j);
    if d.norm() < 1e-300 || !d.is_finite() {
        return Err(Error::Linear("singular Jacobian".into()));
    }
    Ok([
        (j[1][1] * xi[0] - j[1][0] * xi[1]) / d,
        (-j[0][1] * xi[0] + j[0][0] * xi[1]) / d,
    ])
}

/// Symbols of the deformed operator `a(tJ^{-1} xi)`.
pub fn deformed_symbols(j: &Jac, omega: C64, nu: f64, xi: [f64; 2]) -> Result<FlatSymbols> {
    let eta = pushforward(j, xi.map(|v| C64::new(v, 0.0)))?;
    Ok(symbols_at(omega, nu, eta))
}

/// Deformed `p` written through the entries `ell^a(J L^b)` and `xi(L^{+-})`,
/// valid for real `omega`.
pub fn deformed_p_cramer(j: &Jac, omega: f64, xi: [f64; 2]) -> Result<C64> {
    let f = LinearForms::new(C64::new(omega, 0.0))?;
    let lv = Sign::BOTH.map(|s| f.lvec(s));
    let jl = |b: Sign| {
        let l = lv[b.index()];
        [j[0][0] * l[0] + j[0][1] * l[1], j[1][0] * l[0] + j[1][1] * l[1]]
    };
    let m = |a: Sign, b: Sign| f.ell(a, jl(b));
    let xl = |b: Sign| {
        let l = lv[b.index()];
        l[0] * xi[0] + l[1] * xi[1]
    };
    use Sign::{Minus as M, Plus as P};
    let rhs = -(m(M, M) * m(P, P) + m(M, P) * m(P, M)) * xl(P) * xl(M)
        + m(M, M) * m(P, M) * xl(P) * xl(P)
        + m(P, P) * m(M, P) * xl(M) * xl(M);
    let d = det(j);
    Ok(4.0 * rhs / (d * d))
}

/// `<xi>^{2r} <sqrt(nu) xi>^{2s}`.
pub fn param_weight(r: f64, s: f64, nu: f64, xi: [f64; 2]) -> f64 {
    let n2 = xi[0] * xi[0] + xi[1] * xi[1];
    (1.0 + n2).powf(r) * (1.0 + nu * n2).powf(s)
}

/// `(sum <xi>^{2r} <sqrt(nu) xi>^{2s} |u(xi)|^2 dA)^{1/2}` over sampled frequencies.
pub fn param_norm(r: f64, s: f64, nu: f64, spectrum: &[([f64; 2], f64)], cell_area: f64) -> f64 {
    let sum: f64 = spectrum
        .iter()
        .map(|(xi, m)| param_weight(r, s, nu, *xi) * m * m)
        .sum();
    (sum * cell_area).sqrt()
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub grid: usize,
    pub directions: usize,
    /// `(re_min, re_max, im_min, im_max)`.
    pub omega_box: (f64, f64, f64, f64),
    pub omega_samples: (usize, usize),
}

impl CertifyOptions {
    pub fn around(lambda: f64) -> Self {
        CertifyOptions {
            grid: 32,
            directions: 64,
            omega_box: (lambda - 0.01, lambda + 0.01, 0.0, 1.0),
            omega_samples: (2, 4),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticityCertificate {
    pub tau: f64,
    pub grid: usize,
    pub directions: usize,
    pub omega_box: (f64, f64, f64, f64),
    /// Smallest `C0` with `Im p + C0 tau |Re p| >= (tau + Im w) |xi|^2 / C0` on all samples.
    pub c0: f64,
    pub worst_x: [f64; 2],
    pub worst_xi: [f64; 2],
    pub worst_omega: [f64; 2],
    /// Minimum of `Im p + C0 tau |Re p| - (tau + Im w) / C0` with the fitted `C0`.
    pub inviscid_slack: f64,
    pub inviscid_pass: bool,
    /// Largest `c` with `|A| >= c |xi|^2 <sqrt(nu) xi>^2` for all `nu >= 0`.
    pub singular_constant: f64,
    pub singular_pass: bool,
    pub samples: usize,
}

pub const C0_LIMIT: f64 = 1e6;

/// Smallest `C > 0` with `a C^2 + b C - c >= 0`, `a, c >= 0`. Rounding-level
/// negative `b` counts as zero so that the flat case reports zero margin.
fn required_c(a: f64, b: f64, c: f64) -> f64 {
    if c <= 0.0 {
        if b >= -1e-10 {
            0.0
        } else if a > 0.0 {
            -b / a
        } else {
            f64::INFINITY
        }
    } else if a > 0.0 {
        (-b + (b * b + 4.0 * a * c).sqrt()) / (2.0 * a)
    } else if b > 0.0 {
        c / b
    } else {
        f64::INFINITY
    }
}

/// `min_{t >= 0} |p + i lambda t q| / (1 + t)` for unit `xi` and `t = nu |xi|^2`.
pub fn singular_ratio(p: C64, q: C64, lambda: f64) -> f64 {
    let i = C64::i();
    let mut m = f64::INFINITY;
    m = m.min(p.norm());
    for k in 0..=80 {
        let t = 10f64.powf(-4.0 + 8.0 * k as f64 / 80.0);
        m = m.min((p + i * lambda * t * q).norm() / (1.0 + t));
    }
    m.min(lambda * q.norm())
}

pub fn certify_ellipticity(dmap: &DeformationMap, opts: &CertifyOptions) -> Result<EllipticityCertificate> {
    let tau = dmap.tau;
    let lambda = dmap.spec().lambda;
    let xs = dmap.sample_grid(opts.grid);
    let exts: Vec<Result<Jac>> = xs.par_iter().map(|&x| dmap.extend(x).map(|e| e.jac)).collect();
    let mut jacs = Vec::with_capacity(xs.len());
    for e in exts {
        jacs.push(e?);
    }
    let (r0, r1, i0, i1) = opts.omega_box;
    let (nr, ni) = opts.omega_samples;
    let lin = |a: f64, b: f64, n: usize, k: usize| if n <= 1 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 };
    let omegas: Vec<C64> = (0..nr)
        .flat_map(|a| (0..ni).map(move |b| (a, b)))
        .map(|(a, b)| C64::new(lin(r0, r1, nr, a), lin(i0, i1, ni, b)))
        .collect();
    for w in &omegas {
        LinearForms::new(*w)?;
    }
    let dirs: Vec<[f64; 2]> = (0..opts.directions)
        .map(|k| {
            let a = std::f64::consts::PI * k as f64 / opts.directions as f64;
            [a.cos(), a.sin()]
        })
        .collect();

    // (required C, x index, dir, omega)
    let worst = jacs
        .par_iter()
        .enumerate()
        .map(|(ix, j)| {
            let mut w = (0.0f64, ix, [1.0, 0.0], C64::new(0.0, 0.0));
            let mut sing = f64::INFINITY;
            for d in &dirs {
                let eta = pushforward(j, d.map(|v| C64::new(v, 0.0))).unwrap_or([C64::new(f64::NAN, 0.0); 2]);
                for om in &omegas {
                    let p = quad_p(*om, eta);
                    let c = required_c(tau * p.re.abs(), p.im, tau + om.im);
                    if !(c <= w.0) {
                        w = (c, ix, *d, *om);
                    }
                }
                let p = quad_p(C64::new(lambda, 0.0), eta);
                let q = dot(eta) * dot(eta);
                sing = sing.min(singular_ratio(p, q, lambda));
            }
            (w, sing)
        })
        .collect::<Vec<_>>();
    let mut c0 = 0.0f64;
    let mut at = (0, [1.0, 0.0], C64::new(0.0, 0.0));
    let mut sing = f64::INFINITY;
    for (w, s) in &worst {
        if !(w.0 <= c0) {
            c0 = w.0;
            at = (w.1, w.2, w.3);
        }
        sing = sing.min(*s);
    }
    let c0 = c0.max(1.0);
    let mut slack = f64::INFINITY;
    if c0.is_finite() {
        for j in &jacs {
            for d in &dirs {
                let eta = pushforward(j, d.map(|v| C64::new(v, 0.0)))?;
                for om in &omegas {
                    let p = quad_p(*om, eta);
                    slack = slack.min(p.im + c0 * tau * p.re.abs() - (tau + om.im) / c0);
                }
            }
        }
    }
    Ok(EllipticityCertificate {
        tau,
        grid: opts.grid,
        directions: opts.directions,
        omega_box: opts.omega_box,
        c0,
        worst_x: xs[at.0],
        worst_xi: at.1,
        worst_omega: [at.2.re, at.2.im],
        inviscid_slack: slack,
        inviscid_pass: c0.is_finite() && c0 <= C0_LIMIT && slack >= -1e-10,
        singular_constant: sing,
        singular_pass: sing > 0.0 && sing.is_finite(),
        samples: jacs.len() * dirs.len() * omegas.len(),
    })
}

/// Roots of a complex polynomial with coefficients in increasing degree.
pub fn poly_roots(coef: &[C64]) -> Result<Vec<C64>> {
    let mut c = coef.to_vec();
    while c.len() > 1 && c.last().is_some_and(|v| v.norm() == 0.0) {
        c.pop();
    }
    let n = c.len() - 1;
    let lead = c[n];
    match n {
        0 => Ok(vec![]),
        1 => Ok(vec![-c[0] / lead]),
        2 => {
            let (a, b, cc) = (lead, c[1], c[0]);
            let disc = (b * b - 4.0 * a * cc).sqrt();
            // stable pairing of the two roots
            let s = if (b.conj() * disc).re >= 0.0 { -(b + disc) } else { -(b - disc) };
            if s.norm() == 0.0 {
                return Ok(vec![C64::new(0.0, 0.0); 2]);
            }
            Ok(vec![s / (2.0 * a), 2.0 * cc / s])
        }
        4 => {
            let m = Matrix4::<Complex<f64>>::from_fn(|i, j| {
                if i == 0 {
                    -c[n - 1 - j] / lead
                } else if i == j + 1 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let ev = m
                .schur()
                .eigenvalues()
                .ok_or_else(|| Error::NoConvergence("companion eigenvalues".into()))?;
            Ok(ev.iter().copied().collect())
        }
        _ => Err(Error::InvalidInput(format!("degree {n} polynomial"))),
    }
}

pub const REAL_AXIS_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct RootCount {
    pub upper: usize,
    pub lower: usize,
    pub indeterminate: bool,
    pub roots: Vec<[f64; 2]>,
}

fn count(roots: Vec<C64>) -> RootCount {
    let upper = roots.iter().filter(|z| z.im > REAL_AXIS_TOL).count();
    let lower = roots.iter().filter(|z| z.im < -REAL_AXIS_TOL).count();
    RootCount {
        upper,
        lower,
        indeterminate: upper + lower != roots.len(),
        roots: roots.iter().map(|z| [z.re, z.im]).collect(),
    }
}

/// The four boundary polynomials in `z`:
/// `q(xi + z n)`, `A(0, xi + z n)`, `A(nu, xi + z n)` and `z^{-2} A(1, z n)`.
#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub theta: f64,
    pub nu: f64,
    pub counts: [RootCount; 4],
}

impl CoercivityReport {
    pub fn expected(&self) -> bool {
        let want = [(2, 2), (1, 1), (2, 2), (1, 1)];
        self.counts
            .iter()
            .zip(want)
            .all(|(c, w)| !c.indeterminate && (c.upper, c.lower) == w)
    }
}

pub fn coercivity_roots(j: &Jac, lambda: f64, xi_t: [f64; 2], n: [f64; 2], nu: f64) -> Result<[RootCount; 4]> {
    let cross = xi_t[0] * n[1] - xi_t[1] * n[0];
    if cross.abs() < 1e-12 * (xi_t[0].hypot(xi_t[1]) * n[0].hypot(n[1])) {
        return Err(Error::InvalidInput("tangential covector is proportional to the conormal".into()));
    }
    let e0 = pushforward(j, xi_t.map(|v| C64::new(v, 0.0)))?;
    let e1 = pushforward(j, n.map(|v| C64::new(v, 0.0)))?;
    let om = C64::new(lambda, 0.0);
    let i = C64::i();
    // bilinear forms of p and of the complex dot product
    let bp = |a: [C64; 2], b: [C64; 2]| om * om * a[0] * b[0] - (1.0 - om * om) * a[1] * b[1];
    let bs = |a: [C64; 2], b: [C64; 2]| a[0] * b[0] + a[1] * b[1];
    let p = [bp(e0, e0), 2.0 * bp(e0, e1), bp(e1, e1)];
    let s = [bs(e0, e0), 2.0 * bs(e0, e1), bs(e1, e1)];
    let s2 = [s[0] * s[0], 2.0 * s[0] * s[1], s[1] * s[1] + 2.0 * s[0] * s[2], 2.0 * s[1] * s[2], s[2] * s[2]];
    let visc: Vec<C64> = (0..5)
        .map(|k| i * lambda * nu * s2[k] + if k < 3 { p[k] } else { C64::new(0.0, 0.0) })
        .collect();
    let layer = [p[2], C64::new(0.0, 0.0), i * lambda * s[2] * s[2]];
    Ok([
        count(poly_roots(&s2)?),
        count(poly_roots(&p)?),
        count(poly_roots(&visc)?),
        count(poly_roots(&layer)?),
    ])
}

/// Root counts at the boundary point `z(theta)` with the unit tangent as `xi_t`
/// and the outward normal as conormal.
pub fn coercivity_at(dmap: &DeformationMap, theta: f64, nu: f64) -> Result<CoercivityReport> {
    let spec = dmap.spec();
    let x = spec.point(theta, 0);
    let t = spec.point(theta, 1);
    let len = t[0].hypot(t[1]);
    let tang = [t[0] / len, t[1] / len];
    let normal = [tang[1], -tang[0]];
    let j = dmap.extend(x)?.jac;
    Ok(CoercivityReport {
        theta,
        nu,
        counts: coercivity_roots(&j, spec.lambda, tang, normal, nu)?,
    })
}
