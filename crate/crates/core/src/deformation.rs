//! The complex deformation `Xi(tau, .)` of the closed domain into `C^2`.
//!
//! On the boundary `Xi(tau, z(t)) = z(t + i tau h(t))`. Inside, each coordinate
//! `g_{+-} = ell^{+-}(Xi)` is interpolated linearly in `ell^{-+}` between the two
//! boundary points sharing the value of `ell^{+-}`, and `Xi = g_+ L^+ + g_- L^-`.

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::Serialize;

use crate::billiard::Billiard;
use crate::escape::{y_of, EscapeField};
use crate::geometry::{DomainSpec, FourierSeries, RealForms};
use crate::roots::gauss_legendre01;
use crate::{circ_diff, wrap01, Error, Result, Sign, C64};

/// Width of the tangency branch: `|ell - ell(critical)| / |alpha| < TANGENCY_ZONE`
/// where `alpha` is half the second derivative at the characteristic point.
pub const TANGENCY_ZONE: f64 = 1e-3;
/// Step of the finite-difference Jacobian used in the tangency branch.
pub const FD_STEP: f64 = 1e-6;
const GL_NODES: usize = 20;

/// The two boundary points on the level set of `ell^{sign}` through a point,
/// ordered so that `ell^{-sign}(z(down)) <= ell^{-sign}(z(up))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UpDown {
    pub sign: Sign,
    pub theta_down: f64,
    pub theta_up: f64,
}

/// One coordinate `g = ell^{sign}(Xi(tau, x))` with its real gradient.
#[derive(Clone, Copy, Debug)]
pub struct Coordinate {
    pub value: C64,
    pub grad: [C64; 2],
    pub tangency: bool,
}

/// `Xi(tau, x)` and `D_x Xi(tau, x)`.
#[derive(Clone, Copy, Debug)]
pub struct Extension {
    pub xi: [C64; 2],
    /// `jac[i][j] = d Xi_i / d x_j`.
    pub jac: [[C64; 2]; 2],
    /// `g_{+-}` and their gradients, indexed by `Sign::index`.
    pub coords: [Coordinate; 2],
}

impl Extension {
    pub fn det(&self) -> C64 {
        self.jac[0][0] * self.jac[1][1] - self.jac[0][1] * self.jac[1][0]
    }

    pub fn tangency(&self) -> bool {
        self.coords[0].tangency || self.coords[1].tangency
    }
}

#[derive(Clone, Copy, Debug)]
struct CritData {
    value: f64,
    alpha: f64,
}

#[derive(Clone, Debug)]
pub struct DeformationMap {
    pub bil: Billiard,
    pub h: FourierSeries,
    pub tau: f64,
    forms: RealForms,
    crit: [[CritData; 2]; 2],
    gl: (Vec<f64>, Vec<f64>),
}

impl DeformationMap {
    pub fn new(bil: Billiard, h: FourierSeries, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::InvalidInput(format!("tau = {tau}")));
        }
        let hmax = (0..4096)
            .map(|j| h.eval(j as f64 / 4096.0, 0).abs())
            .fold(0.0, f64::max);
        let radius = bil.spec.analyticity_radius;
        if tau.abs() * hmax > radius {
            return Err(Error::Analyticity {
                im: tau.abs() * hmax,
                radius,
            });
        }
        let forms = bil.forms();
        let crit = Sign::BOTH.map(|sign| {
            let th = bil.characteristic_points(sign);
            let v = bil.value_range(sign);
            [0, 1].map(|k| CritData {
                value: v[k],
                alpha: 0.5 * bil.f(sign, th[k], 2),
            })
        });
        Ok(DeformationMap {
            bil,
            h,
            tau,
            forms,
            crit,
            gl: gauss_legendre01(GL_NODES),
        })
    }

    pub fn from_escape(bil: &Billiard, field: &EscapeField, tau: f64) -> Result<Self> {
        Self::new(bil.clone(), field.h.clone(), tau)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.bil.clone(), self.h.clone(), tau)
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.bil.spec
    }

    pub fn forms(&self) -> RealForms {
        self.forms
    }

    /// `Xi(tau, z(t)) = z(t + i tau h(t))`.
    pub fn boundary(&self, t: f64) -> Result<[C64; 2]> {
        let s = C64::new(t, self.tau * self.h.eval(t, 0));
        self.spec().eval_boundary(s, 0)
    }

    /// `d/dt Xi(tau, z(t))`.
    pub fn boundary_tangent(&self, t: f64) -> Result<[C64; 2]> {
        let s = C64::new(t, self.tau * self.h.eval(t, 0));
        let d = self.spec().eval_boundary(s, 1)?;
        let f = C64::new(1.0, self.tau * self.h.eval(t, 1));
        Ok([d[0] * f, d[1] * f])
    }

    pub fn pi_updown(&self, sign: Sign, x: [f64; 2]) -> Result<UpDown> {
        let bil = &self.bil;
        let c = self.forms.ell(sign, x);
        let [lo, hi] = bil.value_range(sign);
        let tol = 1e-10 * (hi - lo);
        if c < lo - tol || c > hi + tol {
            return Err(Error::OutsideDomain);
        }
        let c = c.clamp(lo, hi);
        let [inc, dec] = bil.arcs(sign);
        let a = bil.solve_level(sign, c, inc);
        let b = bil.solve_level(sign, c, dec);
        let other = sign.flip();
        let (ma, mb) = (bil.f(other, a, 0), bil.f(other, b, 0));
        let (down, up, md, mu) = if ma <= mb { (a, b, ma, mb) } else { (b, a, mb, ma) };
        let [olo, ohi] = bil.value_range(other);
        let otol = 1e-10 * (ohi - olo);
        let m = self.forms.ell(other, x);
        if m < md - otol || m > mu + otol {
            return Err(Error::OutsideDomain);
        }
        Ok(UpDown {
            sign,
            theta_down: down,
            theta_up: up,
        })
    }

    fn k(&self, sign: Sign, t: f64) -> Result<C64> {
        Ok(self.forms.ell_c(sign, self.boundary(t)?))
    }

    fn k_prime(&self, sign: Sign, t: f64) -> Result<C64> {
        Ok(self.forms.ell_c(sign, self.boundary_tangent(t)?))
    }

    fn in_tangency_zone(&self, sign: Sign, c: f64) -> bool {
        self.crit[sign.index()]
            .iter()
            .any(|k| (c - k.value).abs() < TANGENCY_ZONE * k.alpha.abs())
    }

    /// Value of `g_{sign}` and the pair it was interpolated from.
    fn g_value(&self, sign: Sign, x: [f64; 2]) -> Result<(C64, UpDown, C64, bool)> {
        let ud = self.pi_updown(sign, x)?;
        let other = sign.flip();
        let (d, u) = (ud.theta_down, ud.theta_up);
        let md = self.bil.f(other, d, 0);
        let kd = self.k(sign, d)?;
        let tangency = self.in_tangency_zone(sign, self.forms.ell(sign, x));
        let r = if tangency {
            // ratio of integrals of k' and m' along the short arc through the tangency
            let delta = circ_diff(u, d);
            if delta.abs() < 1e-14 {
                self.k_prime(sign, d)? / self.bil.f(other, d, 1)
            } else {
                let (nodes, weights) = &self.gl;
                let mut num = C64::new(0.0, 0.0);
                let mut den = 0.0;
                for (s, w) in nodes.iter().zip(weights) {
                    let t = d + delta * s;
                    num += *w * self.k_prime(sign, t)?;
                    den += w * self.bil.f(other, t, 1);
                }
                num / den
            }
        } else {
            let mu = self.bil.f(other, u, 0);
            (self.k(sign, u)? - kd) / (mu - md)
        };
        let value = kd + (self.forms.ell(other, x) - md) * r;
        Ok((value, ud, r, tangency))
    }

    /// `g_{sign}(tau, x)` with its gradient in `x`.
    pub fn coordinate(&self, sign: Sign, x: [f64; 2]) -> Result<Coordinate> {
        let (value, ud, r, tangency) = self.g_value(sign, x)?;
        let grad = if tangency {
            self.fd_grad(sign, x)?
        } else {
            let other = sign.flip();
            let (d, u) = (ud.theta_down, ud.theta_up);
            let grad_s = [self.forms.ell(sign, [1.0, 0.0]), self.forms.ell(sign, [0.0, 1.0])];
            let grad_o = [self.forms.ell(other, [1.0, 0.0]), self.forms.ell(other, [0.0, 1.0])];
            let (md, mu) = (self.bil.f(other, d, 0), self.bil.f(other, u, 0));
            let (mpd, mpu) = (self.bil.f(other, d, 1), self.bil.f(other, u, 1));
            let (kpd, kpu) = (self.k_prime(sign, d)?, self.k_prime(sign, u)?);
            let e = mu - md;
            let off = self.forms.ell(other, x) - md;
            let cd = kpd - mpd * r - off * (kpd - r * mpd) / e;
            let cu = off * (kpu - r * mpu) / e;
            let (fd, fu) = (self.bil.f(sign, d, 1), self.bil.f(sign, u, 1));
            [0, 1].map(|j| cd * (grad_s[j] / fd) + cu * (grad_s[j] / fu) + r * grad_o[j])
        };
        Ok(Coordinate {
            value,
            grad,
            tangency,
        })
    }

    fn fd_grad(&self, sign: Sign, x: [f64; 2]) -> Result<[C64; 2]> {
        let h = FD_STEP;
        let g = |p: [f64; 2]| self.g_value(sign, p).map(|v| v.0);
        let mut out = [C64::new(0.0, 0.0); 2];
        for (j, o) in out.iter_mut().enumerate() {
            let shift = |s: f64| {
                let mut p = x;
                p[j] += s;
                p
            };
            *o = match (g(shift(h)), g(shift(-h))) {
                (Ok(p), Ok(m)) => (p - m) / (2.0 * h),
                (Ok(p1), Err(_)) => {
                    let p2 = g(shift(2.0 * h))?;
                    (-3.0 * g(x)? + 4.0 * p1 - p2) / (2.0 * h)
                }
                (Err(_), Ok(m1)) => {
                    let m2 = g(shift(-2.0 * h))?;
                    (3.0 * g(x)? - 4.0 * m1 + m2) / (2.0 * h)
                }
                (Err(e), Err(_)) => return Err(e),
            };
        }
        Ok(out)
    }

    /// `Xi(tau, x)` and its Jacobian for `x` in the closed domain.
    pub fn extend(&self, x: [f64; 2]) -> Result<Extension> {
        let coords = [self.coordinate(Sign::Plus, x)?, self.coordinate(Sign::Minus, x)?];
        let lp = self.forms.lvec(Sign::Plus);
        let lm = self.forms.lvec(Sign::Minus);
        let (gp, gm) = (&coords[0], &coords[1]);
        let xi = [0, 1].map(|i| gp.value * lp[i] + gm.value * lm[i]);
        let jac = [0, 1].map(|i| [0, 1].map(|j| gp.grad[j] * lp[i] + gm.grad[j] * lm[i]));
        Ok(Extension { xi, jac, coords })
    }

    /// Sample points `c + r (z(t) - c)` with `r = (i + 1) / n`, `t = (j + 1/2) / n`.
    pub fn sample_grid(&self, n: usize) -> Vec<[f64; 2]> {
        polar_samples(self.spec(), n)
    }
}

pub fn polar_samples(spec: &DomainSpec, n: usize) -> Vec<[f64; 2]> {
    let (_, c) = spec.area_centroid();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let r = (i + 1) as f64 / n as f64;
        for j in 0..n {
            let z = spec.point((j as f64 + 0.5) / n as f64, 0);
            out.push([c[0] + r * (z[0] - c[0]), c[1] + r * (z[1] - c[1])]);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DeformationCertificate {
    pub tau: f64,
    pub grid: usize,
    pub samples: usize,
    /// `min Im` of the symmetric difference quotient of `ell^{+-}(D Xi L^{-+})` in `tau`.
    pub transversality_min_im: [f64; 2],
    pub transversality_max_re_over_im: f64,
    /// The same ratio for the one-sided quotient against `tau = 0`.
    pub one_sided_re_over_im: f64,
    pub transversality_pass: bool,
    /// `min |g(x) - g(y)| / |x - y|` over sample pairs, per sign.
    pub injectivity_min_ratio: [f64; 2],
    pub injectivity_pass: bool,
    pub total_reality_max_condition: f64,
    pub total_reality_pass: bool,
    pub min_abs_det: f64,
    pub max_jacobian_defect: f64,
    /// First-order estimate of the `tau` at which `D Xi` degenerates.
    pub tau_max_estimate: f64,
    /// `max |Xi(0, x) - x|`.
    pub identity_error: f64,
    pub identity_pass: bool,
    pub tangency_samples: usize,
}

impl DeformationCertificate {
    pub fn passed(&self) -> bool {
        self.transversality_pass && self.injectivity_pass && self.total_reality_pass && self.identity_pass
    }
}

/// Condition number of `[v1, v2, i v1, i v2]` seen as real vectors in `R^4`.
pub fn total_reality_condition(jac: &[[C64; 2]; 2]) -> f64 {
    let col = |j: usize, rot: bool| {
        let v = [jac[0][j], jac[1][j]];
        let v = if rot { v.map(|c| c * C64::i()) } else { v };
        [v[0].re, v[1].re, v[0].im, v[1].im]
    };
    let cols = [col(0, false), col(1, false), col(0, true), col(1, true)];
    let m = Matrix4::from_fn(|i, j| cols[j][i]);
    let sv = m.singular_values();
    let (mx, mn) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

pub fn verify_deformation(dmap: &DeformationMap, grid: usize) -> Result<DeformationCertificate> {
    let tau = dmap.tau;
    if tau <= 0.0 {
        return Err(Error::InvalidInput("verification needs tau > 0".into()));
    }
    let xs = dmap.sample_grid(grid);
    let minus = dmap.with_tau(-tau)?;
    let zero = dmap.with_tau(0.0)?;
    let forms = dmap.forms();
    let l = Sign::BOTH.map(|s| forms.lvec(s));
    let per: Vec<Result<_>> = xs
        .par_iter()
        .map(|&x| {
            let e = dmap.extend(x)?;
            let em = minus.extend(x)?;
            let e0 = zero.extend(x)?;
            // ell^{+-}(D Xi L^{-+}) = L^{-+} g_{+-}
            let dir = |ext: &Extension, sign: Sign| {
                let g = &ext.coords[sign.index()];
                let v = l[sign.flip().index()];
                g.grad[0] * v[0] + g.grad[1] * v[1]
            };
            let cen = Sign::BOTH.map(|s| (dir(&e, s) - dir(&em, s)) / (2.0 * tau));
            let one = Sign::BOTH.map(|s| (dir(&e, s) - dir(&e0, s)) / tau);
            let id_err = (0..2).map(|i| (e0.xi[i] - x[i]).norm()).fold(0.0, f64::max);
            let defect = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (e.jac[i][j] - if i == j { 1.0 } else { 0.0 }).norm())
                .fold(0.0, f64::max);
            Ok((e, cen, one, id_err, defect))
        })
        .collect();
    let mut rows = Vec::with_capacity(per.len());
    for r in per {
        rows.push(r?);
    }

    let mut min_im = [f64::INFINITY; 2];
    let mut re_ratio = 0.0f64;
    let mut one_ratio = 0.0f64;
    let mut cond = 0.0f64;
    let mut min_det = f64::INFINITY;
    let mut defect = 0.0f64;
    let mut id_err = 0.0f64;
    let mut tangency = 0;
    for (e, cen, one, ie, d) in &rows {
        for k in 0..2 {
            min_im[k] = min_im[k].min(cen[k].im);
            re_ratio = re_ratio.max(cen[k].re.abs() / cen[k].im.abs());
            one_ratio = one_ratio.max(one[k].re.abs() / one[k].im.abs());
        }
        cond = cond.max(total_reality_condition(&e.jac));
        min_det = min_det.min(e.det().norm());
        defect = defect.max(*d);
        id_err = id_err.max(*ie);
        tangency += e.tangency() as usize;
    }

    let inj = Sign::BOTH.map(|s| {
        let vals: Vec<C64> = rows.iter().map(|r| r.0.coords[s.index()].value).collect();
        (0..xs.len())
            .into_par_iter()
            .map(|a| {
                let mut m = f64::INFINITY;
                for b in a + 1..xs.len() {
                    let dx = ((xs[a][0] - xs[b][0]).powi(2) + (xs[a][1] - xs[b][1]).powi(2)).sqrt();
                    if dx > 0.0 {
                        m = m.min((vals[a] - vals[b]).norm() / dx);
                    }
                }
                m
            })
            .reduce(|| f64::INFINITY, f64::min)
    });

    Ok(DeformationCertificate {
        tau,
        grid,
        samples: xs.len(),
        transversality_min_im: min_im,
        transversality_max_re_over_im: re_ratio,
        one_sided_re_over_im: one_ratio,
        transversality_pass: min_im[0] > 0.0 && min_im[1] > 0.0 && re_ratio < 1e-3,
        injectivity_min_ratio: inj,
        injectivity_pass: inj[0] > 1e-9 && inj[1] > 1e-9,
        total_reality_max_condition: cond,
        total_reality_pass: cond.is_finite() && cond < 1e8,
        min_abs_det: min_det,
        max_jacobian_defect: defect,
        tau_max_estimate: if defect > 0.0 { tau / defect } else { f64::INFINITY },
        identity_error: id_err,
        identity_pass: id_err < 1e-12,
        tangency_samples: tangency,
    })
}

/// `d/dtau L^- g_+ (0, x)` from its boundary formula, and the same quantity
/// by a central difference in `tau`. `None` inside the tangency zone, where
/// the closed form is a `0/0` quotient.
pub fn simplified_transversality(dmap: &DeformationMap, x: [f64; 2], step: f64) -> Result<Option<(C64, C64)>> {
    let sign = Sign::Plus;
    if dmap.in_tangency_zone(sign, dmap.forms.ell(sign, x)) {
        return Ok(None);
    }
    let bil = &dmap.bil;
    let ud = dmap.pi_updown(sign, x)?;
    let h = |t: f64| dmap.h.eval(t, 0);
    let (u, d) = (ud.theta_up, ud.theta_down);
    let forms = dmap.forms;
    let num = bil.f(sign, u, 1) * y_of(bil, &h, sign, u);
    let zu = dmap.spec().point(u, 0);
    let zd = dmap.spec().point(d, 0);
    let den = forms.ell(Sign::Minus, [zu[0] - zd[0], zu[1] - zd[1]]);
    let predicted = C64::new(0.0, num / den);
    let lm = forms.lvec(Sign::Minus);
    let dir = |m: &DeformationMap| -> Result<C64> {
        let g = m.coordinate(sign, x)?;
        Ok(g.grad[0] * lm[0] + g.grad[1] * lm[1])
    };
    let fd = (dir(&dmap.with_tau(step)?)? - dir(&dmap.with_tau(-step)?)?) / (2.0 * step);
    Ok(Some((predicted, fd)))
}

/// `max_x |Xi(tau, x) - x|` over the sample grid.
pub fn max_displacement(dmap: &DeformationMap, grid: usize) -> Result<f64> {
    let xs = dmap.sample_grid(grid);
    let v: Vec<Result<f64>> = xs
        .par_iter()
        .map(|&x| {
            let e = dmap.extend(x)?;
            Ok((e.xi[0] - x[0]).norm().max((e.xi[1] - x[1]).norm()))
        })
        .collect();
    let mut m = 0.0f64;
    for r in v {
        m = m.max(r?);
    }
    Ok(m)
}

/// Largest `tau <= tau_hi` (up to bisection resolution) whose certificate passes.
pub fn select_tau(bil: &Billiard, h: &FourierSeries, tau_hi: f64, grid: usize) -> Result<(f64, DeformationCertificate)> {
    let hmax = (0..4096)
        .map(|j| h.eval(j as f64 / 4096.0, 0).abs())
        .fold(0.0, f64::max);
    let cap = tau_hi.min(0.999 * bil.spec.analyticity_radius / hmax.max(1e-300));
    let check = |tau: f64| -> Option<DeformationCertificate> {
        let m = DeformationMap::new(bil.clone(), h.clone(), tau).ok()?;
        verify_deformation(&m, grid).ok().filter(|c| c.passed())
    };
    if let Some(c) = check(cap) {
        return Ok((cap, c));
    }
    let (mut lo, mut hi) = (0.0, cap);
    let mut best = None;
    for _ in 0..10 {
        let mid = 0.5 * (lo + hi);
        match check(mid) {
            Some(c) => {
                lo = mid;
                best = Some((mid, c));
            }
            None => hi = mid,
        }
    }
    best.ok_or_else(|| Error::Certificate(format!("no tau in (0, {cap}] passes")))
}

/// Rows `x1, x2, Re Xi1, Im Xi1, Re Xi2, Im Xi2, Re det, Im det` on the sample grid.
pub fn grid_dump(dmap: &DeformationMap, grid: usize) -> Result<Vec<Vec<f64>>> {
    let xs = dmap.sample_grid(grid);
    let mut rows = Vec::with_capacity(xs.len());
    for x in xs {
        let e = dmap.extend(x)?;
        let d = e.det();
        rows.push(vec![x[0], x[1], e.xi[0].re, e.xi[0].im, e.xi[1].re, e.xi[1].im, d.re, d.im]);
    }
    Ok(rows)
}

pub const GRID_DUMP_HEADER: [&str; 8] = ["x1", "x2", "re_xi1", "im_xi1", "re_xi2", "im_xi2", "re_det", "im_det"];

/// Boundary parameter of a point known to lie on the curve, by nearest sample then Newton.
pub fn boundary_parameter(spec: &DomainSpec, x: [f64; 2]) -> f64 {
    let n = 2048;
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..n {
        let t = j as f64 / n as f64;
        let p = spec.point(t, 0);
        let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
        if d < best.0 {
            best = (d, t);
        }
    }
    let mut t = best.1;
    for _ in 0..30 {
        let p = spec.point(t, 0);
        let d1 = spec.point(t, 1);
        let d2 = spec.point(t, 2);
        let r = [p[0] - x[0], p[1] - x[1]];
        let g = r[0] * d1[0] + r[1] * d1[1];
        let gp = d1[0] * d1[0] + d1[1] * d1[1] + r[0] * d2[0] + r[1] * d2[1];
        let step = g / gp;
        t -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    wrap01(t)
}
