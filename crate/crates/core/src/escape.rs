//! Escape vector fields `X = h(theta) d/dtheta` on the boundary circle whose
//! differences `Y_{+-} = X - (gamma^{+-})^* X` have fixed signs.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::billiard::{iterate, Billiard, CircleMap, DynamicsReport};
use crate::geometry::FourierSeries;
use crate::report::{svg_chart, svg_document, Series};
use crate::{circ_diff, wrap01, Error, Result, Sign};

/// Pullback `g^* Y (t) = Y(g(t)) / g'(t)` of a vector field trivialised by `y`.
pub fn pullback<'a>(g: &'a dyn CircleMap, y: &'a dyn Fn(f64) -> f64) -> impl Fn(f64) -> f64 + 'a {
    move |t| {
        let (u, d) = g.apply(t);
        y(u) / d
    }
}

/// Smooth step equal to 1 on `[0, 1/2]`, 0 on `[1, inf)`, built from `exp(-1/s)`.
pub fn plateau(d: f64) -> f64 {
    let phi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if d <= 0.5 {
        1.0
    } else if d >= 1.0 {
        0.0
    } else {
        let s = 2.0 * (d - 0.5);
        phi(1.0 - s) / (phi(1.0 - s) + phi(s))
    }
}

/// The first vector field `X_0 = h_0 d/dtheta`: `+1` near repelling orbits,
/// `-1` near attracting ones.
#[derive(Clone, Debug, Serialize)]
pub struct FirstField {
    pub sigma_plus: Vec<f64>,
    pub sigma_minus: Vec<f64>,
    /// Radius of the intervals `U_{+-}`; `V_{+-}` use half of it.
    pub radius: f64,
    pub period: usize,
    /// Multiple of `period` with `b^N(S^1 \ V_+) in V_-` and `b^{-N}(S^1 \ V_-) in V_+`.
    pub n_escape: usize,
    /// `min (h_0 - h_0 o b^N / (b^N)')` over the grid.
    pub margin: f64,
    pub grid: usize,
}

impl FirstField {
    pub fn h0(&self, t: f64) -> f64 {
        let r = self.radius;
        let near = |pts: &[f64]| {
            pts.iter()
                .map(|p| plateau(circ_diff(t, *p).abs() / r))
                .fold(0.0, f64::max)
        };
        near(&self.sigma_plus) - near(&self.sigma_minus)
    }

    fn dist(pts: &[f64], t: f64) -> f64 {
        pts.iter()
            .map(|p| circ_diff(t, *p).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_v_plus(&self, t: f64) -> bool {
        Self::dist(&self.sigma_plus, t) < 0.5 * self.radius
    }

    pub fn in_v_minus(&self, t: f64) -> bool {
        Self::dist(&self.sigma_minus, t) < 0.5 * self.radius
    }

    /// `X_0 - (b^N)^* X_0` trivialised.
    pub fn escape_difference(&self, map: &dyn CircleMap, t: f64) -> f64 {
        let (u, d) = iterate(map, t, self.n_escape as i64);
        self.h0(t) - self.h0(u) / d
    }
}

/// Builds `X_0` and the escape time `N` for a Morse-Smale circle map.
pub fn build_x0(map: &dyn CircleMap, dynamics: &DynamicsReport, grid: usize) -> Result<FirstField> {
    if !dynamics.morse_smale {
        return Err(Error::NotMorseSmale(dynamics.reason.clone()));
    }
    let n = dynamics.period.unwrap_or(1);
    let mut all: Vec<f64> = dynamics
        .sigma_plus
        .iter()
        .chain(&dynamics.sigma_minus)
        .copied()
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut gap: f64 = 1.0;
    for k in 0..all.len() {
        let next = if k + 1 < all.len() { all[k + 1] } else { all[0] + 1.0 };
        gap = gap.min(next - all[k]);
    }
    let mut r = (0.45 * gap).min(0.05);
    let sup = |pts: &[f64], r: f64, k: i64| {
        let mut m: f64 = 0.0;
        for p in pts {
            for j in 0..=64 {
                let t = p + r * (2.0 * j as f64 / 64.0 - 1.0);
                m = m.max(iterate(map, t, k).1);
            }
        }
        m
    };
    let mut halvings = 0;
    while sup(&dynamics.sigma_plus, r, -(n as i64)) >= 1.0
        || sup(&dynamics.sigma_minus, r, n as i64) >= 1.0
    {
        r *= 0.5;
        halvings += 1;
        if halvings > 40 {
            return Err(Error::NoConvergence("contracting neighbourhoods".into()));
        }
    }
    let mut field = FirstField {
        sigma_plus: dynamics.sigma_plus.clone(),
        sigma_minus: dynamics.sigma_minus.clone(),
        radius: r,
        period: n,
        n_escape: 0,
        margin: f64::NAN,
        grid,
    };
    let ts: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();
    let mut fwd = ts.clone();
    let mut bwd = ts.clone();
    let cap = 64 * n;
    for k in 1..=cap {
        for j in 0..grid {
            fwd[j] = map.apply(fwd[j]).0;
            bwd[j] = map.apply_inv(bwd[j]).0;
        }
        if k % n != 0 {
            continue;
        }
        let ok = (0..grid).all(|j| {
            (field.in_v_plus(ts[j]) || field.in_v_minus(fwd[j]))
                && (field.in_v_minus(ts[j]) || field.in_v_plus(bwd[j]))
        });
        if ok {
            field.n_escape = k;
            break;
        }
    }
    if field.n_escape == 0 {
        return Err(Error::NoConvergence(format!("no escape time up to {cap}")));
    }
    field.margin = ts
        .iter()
        .map(|&t| field.escape_difference(map, t))
        .fold(f64::INFINITY, f64::min);
    if !(field.margin > 0.0) {
        return Err(Error::Certificate(format!(
            "h0 - h0 o b^N / (b^N)' has minimum {}",
            field.margin
        )));
    }
    Ok(field)
}

/// The averaged field and its sign certificates.
#[derive(Clone, Debug, Serialize)]
pub struct EscapeField {
    pub first: FirstField,
    /// `-max Y_+` and `min Y_-` for the smooth field, in the `|h_0| <= 1` normalisation.
    pub margin_plus: f64,
    pub margin_minus: f64,
    /// Harmonics kept in the real-analytic truncation.
    pub modes: usize,
    pub truncation_error: f64,
    /// Margins re-verified for the truncated field on a staggered grid.
    pub margin_plus_truncated: f64,
    pub margin_minus_truncated: f64,
    /// Factor applied to the truncated field so that `max |h| = 1`.
    pub scale: f64,
    /// The normalised truncated field.
    pub h: FourierSeries,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Evaluates the averaged fields for a billiard with a given `X_0`.
pub struct Averaged<'a> {
    pub bil: &'a Billiard,
    pub first: &'a FirstField,
}

impl Averaged<'_> {
    /// `X_1 = sum_{k < N} (b^k)^* X_0`.
    pub fn h1(&self, t: f64) -> f64 {
        let mut x = wrap01(t);
        let mut d = 1.0;
        let mut acc = 0.0;
        for _ in 0..self.first.n_escape {
            acc += self.first.h0(x) / d;
            let (y, dy) = self.bil.b(x);
            x = y;
            d *= dy;
        }
        acc
    }

    /// `X = 2 X_1 + (gamma^+)^* X_1 + (gamma^-)^* X_1`.
    pub fn h(&self, t: f64) -> f64 {
        let (up, dp) = self.bil.gamma(Sign::Plus, t);
        let (um, dm) = self.bil.gamma(Sign::Minus, t);
        2.0 * self.h1(t) + self.h1(up) / dp + self.h1(um) / dm
    }

    /// `Y_{+-} = X - (gamma^{+-})^* X`.
    pub fn y(&self, sign: Sign, t: f64) -> f64 {
        let (u, d) = self.bil.gamma(sign, t);
        self.h(t) - self.h(u) / d
    }

    /// `X_1 - b^* X_1`.
    pub fn d1(&self, t: f64) -> f64 {
        let (u, d) = self.bil.b(t);
        self.h1(t) - self.h1(u) / d
    }
}

/// `Y_{+-}` for an arbitrary trivialised field.
pub fn y_of(bil: &Billiard, h: &dyn Fn(f64) -> f64, sign: Sign, t: f64) -> f64 {
    let (u, d) = bil.gamma(sign, t);
    h(t) - h(u) / d
}

pub fn build_escape_field(bil: &Billiard, first: &FirstField) -> Result<EscapeField> {
    let grid = first.grid.max(4096);
    let avg = Averaged { bil, first };
    let ts: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();
    let samples: Vec<f64> = ts.iter().map(|&t| avg.h(t)).collect();
    let hs = |t: f64| avg.h(t);
    let mut mp = f64::INFINITY;
    let mut mm = f64::INFINITY;
    for &t in &ts {
        mp = mp.min(-y_of(bil, &hs, Sign::Plus, t));
        mm = mm.min(y_of(bil, &hs, Sign::Minus, t));
    }
    if !(mp > 0.0 && mm > 0.0) {
        return Err(Error::Certificate(format!(
            "escape margins m+ = {mp:e}, m- = {mm:e}"
        )));
    }
    let target = 0.1 * mp.min(mm);
    let mut spectrum: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(grid).process(&mut spectrum);
    let ifft = planner.plan_fft_inverse(grid);
    let mut chosen = None;
    let mut modes = 8;
    while modes < grid / 2 {
        let mut buf = spectrum.clone();
        for (k, c) in buf.iter_mut().enumerate() {
            if k > modes && k < grid - modes {
                *c = Complex::new(0.0, 0.0);
            }
        }
        ifft.process(&mut buf);
        let err = buf
            .iter()
            .zip(&samples)
            .map(|(a, b)| (a.re / grid as f64 - b).abs())
            .fold(0.0, f64::max);
        if err < target {
            chosen = Some((modes, err));
            break;
        }
        modes *= 2;
    }
    let Some((modes, trunc_err)) = chosen else {
        return Err(Error::NoConvergence("Fourier truncation of h".into()));
    };
    let series = FourierSeries::from_samples(&samples, modes);
    let hk = |t: f64| series.eval(t, 0);
    let mut mpt = f64::INFINITY;
    let mut mmt = f64::INFINITY;
    let mut hmax: f64 = 0.0;
    for &t in &ts {
        let s = t + 0.5 / grid as f64;
        mpt = mpt.min(-y_of(bil, &hk, Sign::Plus, s));
        mmt = mmt.min(y_of(bil, &hk, Sign::Minus, s));
        hmax = hmax.max(hk(t).abs()).max(hk(s).abs());
    }
    if !(mpt > 0.0 && mmt > 0.0) {
        return Err(Error::Certificate(format!(
            "truncated margins m+ = {mpt:e}, m- = {mmt:e}"
        )));
    }
    let scale = 1.0 / hmax;
    Ok(EscapeField {
        first: first.clone(),
        margin_plus: mp,
        margin_minus: mm,
        modes,
        truncation_error: trunc_err,
        margin_plus_truncated: mpt,
        margin_minus_truncated: mmt,
        scale,
        h: series.scaled(scale),
        samples,
    })
}

impl EscapeField {
    /// Normalised `h`.
    pub fn eval(&self, t: f64) -> f64 {
        self.h.eval(t, 0)
    }

    pub fn svg(&self, bil: &Billiard) -> String {
        let n = 1024;
        let ts: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        let h = |t: f64| self.h.eval(t, 0);
        let mut body = String::new();
        svg_chart(
            &mut body,
            (40.0, 30.0, 620.0, 300.0),
            "escape field h and Y+- (normalised)",
            &[
                Series {
                    label: "h",
                    color: "black",
                    points: ts.iter().map(|&t| (t, h(t))).collect(),
                },
                Series {
                    label: "Y+",
                    color: "crimson",
                    points: ts.iter().map(|&t| (t, y_of(bil, &h, Sign::Plus, t))).collect(),
                },
                Series {
                    label: "Y-",
                    color: "steelblue",
                    points: ts.iter().map(|&t| (t, y_of(bil, &h, Sign::Minus, t))).collect(),
                },
            ],
        );
        svg_document(700.0, 360.0, &body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_profile() {
        assert_eq!(plateau(0.2), 1.0);
        assert_eq!(plateau(1.5), 0.0);
        assert!((plateau(0.75) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for j in 0..=100 {
            let v = plateau(0.5 + 0.5 * j as f64 / 100.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }
}
