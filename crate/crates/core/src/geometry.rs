//! Fourier boundary parametrisations, the characteristic linear forms, and the
//! lambda-simplicity check.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::roots::newton_bisect;
use crate::{Error, Result, Sign};

const TWO_PI: f64 = 2.0 * PI;
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Real trigonometric series `c0 + sum_k (cos[k] cos 2 pi k t + sin[k] sin 2 pi k t)`.
/// `sin[0]` is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        FourierSeries { cos, sin }
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len()).saturating_sub(1)
    }

    fn coef(&self, k: usize) -> (f64, f64) {
        let a = self.cos.get(k).copied().unwrap_or(0.0);
        let b = if k == 0 {
            0.0
        } else {
            self.sin.get(k).copied().unwrap_or(0.0)
        };
        (a, b)
    }

    /// `order`-th derivative at a real point.
    pub fn eval(&self, t: f64, order: u32) -> f64 {
        let w = C64::from_polar(1.0, TWO_PI * t);
        let mut e = C64::new(1.0, 0.0);
        let mut acc = 0.0;
        for k in 0..=self.degree() {
            let (a, b) = self.coef(k);
            if k == 0 {
                if order == 0 {
                    acc += a;
                }
            } else if a != 0.0 || b != 0.0 {
                // d^m/dt^m e^{i phi} = (i 2 pi k)^m e^{i phi}
                let m = (I * TWO_PI * k as f64).powu(order) * e;
                acc += a * m.re + b * m.im;
            }
            e *= w;
        }
        acc
    }

    /// `order`-th derivative at a complex point (no radius check).
    pub fn eval_c(&self, t: C64, order: u32) -> C64 {
        let w = (I * TWO_PI * t).exp();
        let wi = w.inv();
        let mut ep = C64::new(1.0, 0.0);
        let mut em = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..=self.degree() {
            let (a, b) = self.coef(k);
            if k == 0 {
                if order == 0 {
                    acc += a;
                }
            } else if a != 0.0 || b != 0.0 {
                let dp = (I * TWO_PI * k as f64).powu(order) * ep;
                let dm = (-I * TWO_PI * k as f64).powu(order) * em;
                acc += a * (dp + dm) * 0.5 + b * (dp - dm) / (2.0 * I);
            }
            ep *= w;
            em *= wi;
        }
        acc
    }

    /// Least-squares fit with `modes` harmonics from equispaced samples on `[0, 1)`.
    pub fn from_samples(samples: &[f64], modes: usize) -> Self {
        let n = samples.len();
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = samples
            .iter()
            .map(|&v| rustfft::num_complex::Complex::new(v, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let kmax = modes.min((n - 1) / 2);
        let mut cos = vec![0.0; kmax + 1];
        let mut sin = vec![0.0; kmax + 1];
        cos[0] = buf[0].re / n as f64;
        for k in 1..=kmax {
            // sample_j = sum c_k e^{2 pi i k j / n}; fft gives sum v_j e^{-2 pi i k j / n}
            cos[k] = 2.0 * buf[k].re / n as f64;
            sin[k] = -2.0 * buf[k].im / n as f64;
        }
        FourierSeries { cos, sin }
    }

    pub fn scaled(&self, s: f64) -> Self {
        FourierSeries {
            cos: self.cos.iter().map(|c| c * s).collect(),
            sin: self.sin.iter().map(|c| c * s).collect(),
        }
    }
}

/// The real characteristic forms for a fixed real `lambda`:
/// `ell^{+-}(x) = +-x1 / lambda + x2 / sqrt(1 - lambda^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealForms {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
}

impl RealForms {
    pub fn new(lambda: f64) -> Self {
        RealForms {
            lambda,
            a: 1.0 / lambda,
            b: 1.0 / (1.0 - lambda * lambda).sqrt(),
        }
    }

    pub fn ell(&self, sign: Sign, x: [f64; 2]) -> f64 {
        sign.s() * self.a * x[0] + self.b * x[1]
    }

    pub fn ell_c(&self, sign: Sign, x: [C64; 2]) -> C64 {
        sign.s() * self.a * x[0] + self.b * x[1]
    }

    /// The dual vector `L^{+-} = (+-lambda, sqrt(1 - lambda^2)) / 2`.
    pub fn lvec(&self, sign: Sign) -> [f64; 2] {
        [0.5 * sign.s() * self.lambda, 0.5 / self.b]
    }

    /// `ell^+ ell^-`, the principal symbol factorisation in space variables.
    pub fn quad(&self, x: [C64; 2]) -> C64 {
        self.ell_c(Sign::Plus, x) * self.ell_c(Sign::Minus, x)
    }
}

/// Complex-frequency characteristic forms on the principal branch of
/// `sqrt(1 - w^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearForms {
    pub omega: C64,
    inv_omega: C64,
    root: C64,
}

impl LinearForms {
    pub fn new(omega: C64) -> Result<Self> {
        let q = C64::new(1.0, 0.0) - omega * omega;
        if omega.norm() == 0.0 || (q.im == 0.0 && q.re <= 0.0) || !q.is_finite() {
            return Err(Error::InvalidInput(format!(
                "omega = {omega} is outside the principal-branch domain"
            )));
        }
        Ok(LinearForms {
            omega,
            inv_omega: omega.inv(),
            root: q.sqrt(),
        })
    }

    pub fn ell(&self, sign: Sign, x: [C64; 2]) -> C64 {
        sign.s() * x[0] * self.inv_omega + x[1] / self.root
    }

    pub fn lvec(&self, sign: Sign) -> [C64; 2] {
        [0.5 * sign.s() * self.omega, 0.5 * self.root]
    }
}

/// A planar domain through its boundary parametrisation, rotated by `rotation`
/// (radians, counter-clockwise) after evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub fourier_x: FourierSeries,
    pub fourier_y: FourierSeries,
    #[serde(default)]
    pub rotation: f64,
    pub lambda: f64,
    #[serde(default = "default_radius")]
    pub analyticity_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_residual: Option<f64>,
}

fn default_radius() -> f64 {
    0.15
}

#[derive(Deserialize)]
struct DomainConfig {
    fourier_x: FourierSeries,
    fourier_y: FourierSeries,
    #[serde(default)]
    rotation: f64,
    lambda: f64,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    analyticity_radius: Option<f64>,
}

impl DomainSpec {
    pub fn circle(lambda: f64) -> Self {
        DomainSpec {
            name: "circle".into(),
            fourier_x: FourierSeries::new(vec![0.0, 1.0], vec![]),
            fourier_y: FourierSeries::new(vec![], vec![0.0, 1.0]),
            rotation: 0.0,
            lambda,
            analyticity_radius: default_radius(),
            fit_residual: None,
        }
    }

    pub fn ellipse(a: f64, b: f64, lambda: f64) -> Self {
        DomainSpec {
            name: format!("ellipse({a},{b})"),
            fourier_x: FourierSeries::new(vec![0.0, a], vec![]),
            fourier_y: FourierSeries::new(vec![], vec![0.0, b]),
            rotation: 0.0,
            lambda,
            analyticity_radius: default_radius(),
            fit_residual: None,
        }
    }

    /// The curve `x^4 + y^4 = 1` rotated by `rotation`, fitted with 64 harmonics
    /// of its polar parametrisation `r(t) (cos 2 pi t, sin 2 pi t)`.
    pub fn superellipse4(rotation: f64, lambda: f64) -> Self {
        const MODES: usize = 64;
        let m = 4096;
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..m)
            .map(|j| {
                let p = TWO_PI * j as f64 / m as f64;
                let r = (p.cos().powi(4) + p.sin().powi(4)).powf(-0.25);
                (r * p.cos(), r * p.sin())
            })
            .unzip();
        let fx = FourierSeries::from_samples(&xs, MODES);
        let fy = FourierSeries::from_samples(&ys, MODES);
        let residual = (0..m)
            .map(|j| {
                let t = (j as f64 + 0.5) / m as f64;
                (fx.eval(t, 0).powi(4) + fy.eval(t, 0).powi(4) - 1.0).abs()
            })
            .fold(0.0, f64::max);
        DomainSpec {
            name: "superellipse4".into(),
            fourier_x: fx,
            fourier_y: fy,
            rotation,
            lambda,
            // The polar radius has complex singularities at |Im t| ~ 0.070 turns; stay inside.
            analyticity_radius: 0.05,
            fit_residual: Some(residual),
        }
    }

    /// The domain used throughout the figures: the quartic superellipse rotated
    /// by `pi / 10` with `lambda = 1 / sqrt 2`.
    pub fn figure1() -> Self {
        Self::superellipse4(PI / 10.0, std::f64::consts::FRAC_1_SQRT_2)
    }

    pub fn preset(name: &str, lambda: Option<f64>) -> Result<Self> {
        let lam = lambda.unwrap_or(std::f64::consts::FRAC_1_SQRT_2);
        let spec = match name {
            "circle" | "disk" => Self::circle(lam),
            "ellipse" => Self::ellipse(2.0, 1.0, lam),
            "superellipse4" | "figure1" => Self::superellipse4(PI / 10.0, lam),
            _ => {
                if let Some(args) = name.strip_prefix("ellipse(").and_then(|s| s.strip_suffix(')')) {
                    let v: Vec<f64> = args
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::InvalidInput(format!("bad ellipse axes: {e}")))?;
                    if v.len() != 2 {
                        return Err(Error::InvalidInput("ellipse needs two axes".into()));
                    }
                    Self::ellipse(v[0], v[1], lam)
                } else if let Some(arg) = name
                    .strip_prefix("superellipse4(")
                    .and_then(|s| s.strip_suffix(')'))
                {
                    let rot: f64 = arg
                        .trim()
                        .parse()
                        .map_err(|e| Error::InvalidInput(format!("bad rotation: {e}")))?;
                    Self::superellipse4(rot, lam)
                } else {
                    return Err(Error::InvalidInput(format!("unknown preset '{name}'")));
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let c: DomainConfig =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        let spec = DomainSpec {
            name: c.name.unwrap_or_else(|| "custom".into()),
            fourier_x: c.fourier_x,
            fourier_y: c.fourier_y,
            rotation: c.rotation,
            lambda: c.lambda,
            analyticity_radius: c.analyticity_radius.unwrap_or_else(default_radius),
            fit_residual: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_config_path(path: &Path) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidInput(format!(
                "lambda = {} must lie in (0, 1)",
                self.lambda
            )));
        }
        let finite = |f: &FourierSeries| f.cos.iter().chain(&f.sin).all(|v| v.is_finite());
        if !finite(&self.fourier_x) || !finite(&self.fourier_y) || !self.rotation.is_finite() {
            return Err(Error::InvalidInput("non-finite Fourier coefficient".into()));
        }
        if self.fourier_x.degree() == 0 && self.fourier_y.degree() == 0 {
            return Err(Error::InvalidInput("boundary curve is constant".into()));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        DomainSpec {
            lambda,
            ..self.clone()
        }
    }

    pub fn forms(&self) -> RealForms {
        RealForms::new(self.lambda)
    }

    fn rotate<T>(&self, x: T, y: T) -> [T; 2]
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
    {
        let (s, c) = self.rotation.sin_cos();
        [x * c - y * s, x * s + y * c]
    }

    /// `order`-th derivative of `z` at a real parameter.
    pub fn point(&self, t: f64, order: u32) -> [f64; 2] {
        self.rotate(self.fourier_x.eval(t, order), self.fourier_y.eval(t, order))
    }

    /// `order`-th derivative of the holomorphic extension of `z`.
    pub fn eval_boundary(&self, t: C64, order: u32) -> Result<[C64; 2]> {
        if t.im.abs() > self.analyticity_radius {
            return Err(Error::Analyticity {
                im: t.im.abs(),
                radius: self.analyticity_radius,
            });
        }
        Ok(self.eval_boundary_unchecked(t, order))
    }

    pub(crate) fn eval_boundary_unchecked(&self, t: C64, order: u32) -> [C64; 2] {
        self.rotate(self.fourier_x.eval_c(t, order), self.fourier_y.eval_c(t, order))
    }

    /// `ell^{+-}(z^{(order)}(t))`.
    pub fn ell_boundary(&self, sign: Sign, t: f64, order: u32) -> f64 {
        self.forms().ell(sign, self.point(t, order))
    }

    /// Enclosed area and centroid from boundary integrals.
    pub fn area_centroid(&self) -> (f64, [f64; 2]) {
        let m = 4096;
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for j in 0..m {
            let t = j as f64 / m as f64;
            let p = self.point(t, 0);
            let d = self.point(t, 1);
            let cross = p[0] * d[1] - p[1] * d[0];
            a += 0.5 * cross;
            cx += p[0] * cross / 3.0;
            cy += p[1] * cross / 3.0;
        }
        let dt = 1.0 / m as f64;
        a *= dt;
        (a, [cx * dt / a, cy * dt / a])
    }

    /// Whether `x` lies strictly inside the curve (winding number test).
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let m = 1024;
        let mut wind = 0.0;
        let mut prev = self.point(0.0, 0);
        for j in 1..=m {
            let p = self.point(j as f64 / m as f64, 0);
            let a = (prev[1] - x[1]).atan2(prev[0] - x[0]);
            let b = (p[1] - x[1]).atan2(p[0] - x[0]);
            let mut d = b - a;
            if d > PI {
                d -= TWO_PI;
            } else if d < -PI {
                d += TWO_PI;
            }
            wind += d;
            prev = p;
        }
        (wind / TWO_PI).round() as i64 != 0
    }
}

/// A critical point of `ell^{+-} o z`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalPoint {
    pub theta: f64,
    pub value: f64,
    pub second_derivative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimplicityReport {
    pub simple: bool,
    /// Indexed by `Sign::index`; each sorted as `[minimum, maximum]` when simple.
    pub critical_points: [Vec<CriticalPoint>; 2],
    pub min_abs_second_derivative: f64,
    pub grid: usize,
}

/// Counts and polishes the critical points of `ell^{+-} o z` on a dense grid.
pub fn check_lambda_simple(spec: &DomainSpec) -> SimplicityReport {
    let grid = 4096;
    let forms = spec.forms();
    let mut crit: [Vec<CriticalPoint>; 2] = [Vec::new(), Vec::new()];
    let mut simple = true;
    let mut min_d2 = f64::INFINITY;
    for sign in Sign::BOTH {
        let fp = |t: f64| forms.ell(sign, spec.point(t, 1));
        let fpp = |t: f64| forms.ell(sign, spec.point(t, 2));
        let vals: Vec<f64> = (0..=grid).map(|j| fp(j as f64 / grid as f64)).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let list = &mut crit[sign.index()];
        let mut tangential = Vec::new();
        for j in 0..grid {
            let (a, b) = (vals[j], vals[j + 1]);
            let lo = j as f64 / grid as f64;
            let hi = (j + 1) as f64 / grid as f64;
            if a == 0.0 || a * b < 0.0 {
                let t = newton_bisect(|t| (fp(t), fpp(t)), lo, hi, 1e-14);
                let d2 = fpp(t);
                list.push(CriticalPoint {
                    theta: crate::wrap01(t),
                    value: forms.ell(sign, spec.point(t, 0)),
                    second_derivative: d2,
                });
            } else if j > 0 {
                // Tangential zero of f' without a sign change.
                let c = vals[j].abs();
                if c < 1e-9 * scale && c <= vals[j - 1].abs() && c <= vals[j + 1].abs() {
                    tangential.push(lo);
                }
            }
        }
        // A root sitting on a grid node shows up as a tiny non-crossing value next to it.
        let isolated = tangential.iter().any(|t| {
            list.iter()
                .all(|p| crate::circ_diff(p.theta, *t).abs() > 2.0 / grid as f64)
        });
        if list.len() != 2 || isolated {
            simple = false;
        }
        list.sort_by(|p, q| p.value.partial_cmp(&q.value).unwrap());
        for p in list.iter() {
            min_d2 = min_d2.min(p.second_derivative.abs());
            if p.second_derivative.abs() < 1e-8 * scale.max(1.0) {
                simple = false;
            }
        }
    }
    SimplicityReport {
        simple,
        critical_points: crit,
        min_abs_second_derivative: min_d2,
        grid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_points() {
        let c = DomainSpec::circle(0.5);
        let p = c.point(0.25, 0);
        assert!((p[0]).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        let d = c.point(0.0, 1);
        assert!((d[1] - TWO_PI).abs() < 1e-12);
    }

    #[test]
    fn complex_eval_matches_real_on_axis() {
        let s = DomainSpec::figure1();
        for &t in &[0.0, 0.13, 0.77] {
            for order in 0..4 {
                let a = s.point(t, order);
                let b = s.eval_boundary(C64::new(t, 0.0), order).unwrap();
                let sc = 1.0 + a[0].abs().max(a[1].abs());
                assert!((a[0] - b[0].re).abs() < 1e-9 * sc, "{order}");
                assert!((a[1] - b[1].re).abs() < 1e-9 * sc);
                assert!(b[0].im.abs() < 1e-9 * sc);
            }
        }
    }

    #[test]
    fn analyticity_radius_enforced() {
        let s = DomainSpec::circle(0.5);
        assert!(matches!(
            s.eval_boundary(C64::new(0.1, 0.2), 0),
            Err(Error::Analyticity { .. })
        ));
    }

    #[test]
    fn fourier_fit_roundtrip() {
        let f = FourierSeries::new(vec![0.3, 1.0, 0.0, -0.2], vec![0.0, 0.5, 0.1]);
        let xs: Vec<f64> = (0..64).map(|j| f.eval(j as f64 / 64.0, 0)).collect();
        let g = FourierSeries::from_samples(&xs, 5);
        for k in 0..4 {
            assert!((g.cos[k] - f.coef(k).0).abs() < 1e-14);
            assert!((g.sin[k] - f.coef(k).1).abs() < 1e-14);
        }
    }

    #[test]
    fn superellipse_residual_small() {
        let s = DomainSpec::figure1();
        assert!(s.fit_residual.unwrap() < 1e-10, "{:?}", s.fit_residual);
    }

    #[test]
    fn circle_area_centroid() {
        let (a, c) = DomainSpec::circle(0.5).area_centroid();
        assert!((a - PI).abs() < 1e-12);
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn contains_test() {
        let s = DomainSpec::ellipse(2.0, 1.0, 0.5);
        assert!(s.contains([1.9, 0.0]));
        assert!(!s.contains([0.0, 1.1]));
    }

    #[test]
    fn bad_lambda_rejected() {
        assert!(DomainSpec::preset("circle", Some(1.2)).is_err());
        assert!(DomainSpec::preset("nope", None).is_err());
    }

    #[test]
    fn config_roundtrip() {
        let text = "lambda = 0.5\nrotation = 0.1\n[fourier_x]\ncos = [0.0, 1.0]\n[fourier_y]\nsin = [0.0, 1.0]\n";
        let s = DomainSpec::from_config_str(text).unwrap();
        assert_eq!(s.lambda, 0.5);
        assert_eq!(s.fourier_y.sin, vec![0.0, 1.0]);
        assert!(DomainSpec::from_config_str("lambda = 2").is_err());
    }
}
