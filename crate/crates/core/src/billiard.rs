//! Chess-billiard involutions `gamma^{+-}`, the map `b = gamma^+ o gamma^-` and its
//! periodic-orbit analysis.

use serde::Serialize;

use crate::geometry::{check_lambda_simple, DomainSpec, RealForms};
use crate::roots::newton_bisect;
use crate::{circ_diff, wrap01, Error, Result, Sign};

/// Distance (in turns) from a characteristic point inside which the local
/// Taylor model replaces global root finding.
pub const MORSE_ZONE: f64 = 1e-4;

/// An orientation-preserving or reversing diffeomorphism of `R/Z`.
pub trait CircleMap: Sync {
    /// Image reduced to `[0, 1)` together with the derivative.
    fn apply(&self, t: f64) -> (f64, f64);
    fn apply_inv(&self, t: f64) -> (f64, f64);
}

#[derive(Clone, Debug)]
struct Crit {
    theta: f64,
    value: f64,
    /// Taylor coefficients `f^{(k)}(theta) / k!` for `k = 0..=5`.
    taylor: [f64; 6],
}

/// The involutions of a lambda-simple domain.
#[derive(Clone, Debug)]
pub struct Billiard {
    pub spec: DomainSpec,
    forms: RealForms,
    /// `[sign][0 = minimum, 1 = maximum]`.
    crit: [[Crit; 2]; 2],
}

impl Billiard {
    pub fn new(spec: &DomainSpec) -> Result<Self> {
        spec.validate()?;
        let rep = check_lambda_simple(spec);
        if !rep.simple {
            return Err(Error::NotSimple(format!(
                "critical point counts {} / {}",
                rep.critical_points[0].len(),
                rep.critical_points[1].len()
            )));
        }
        let forms = spec.forms();
        let mk = |sign: Sign, k: usize| {
            let p = rep.critical_points[sign.index()][k];
            let mut taylor = [0.0; 6];
            let mut fact = 1.0;
            for (m, c) in taylor.iter_mut().enumerate() {
                if m > 0 {
                    fact *= m as f64;
                }
                *c = forms.ell(sign, spec.point(p.theta, m as u32)) / fact;
            }
            taylor[1] = 0.0;
            Crit {
                theta: p.theta,
                value: p.value,
                taylor,
            }
        };
        let crit = [
            [mk(Sign::Plus, 0), mk(Sign::Plus, 1)],
            [mk(Sign::Minus, 0), mk(Sign::Minus, 1)],
        ];
        Ok(Billiard {
            spec: spec.clone(),
            forms,
            crit,
        })
    }

    pub fn forms(&self) -> RealForms {
        self.forms
    }

    /// `d^order/dt^order ell^{+-}(z(t))`.
    pub fn f(&self, sign: Sign, t: f64, order: u32) -> f64 {
        self.forms.ell(sign, self.spec.point(t, order))
    }

    /// Characteristic points `[argmin, argmax]` of `ell^{+-} o z`.
    pub fn characteristic_points(&self, sign: Sign) -> [f64; 2] {
        let c = &self.crit[sign.index()];
        [c[0].theta, c[1].theta]
    }

    /// `[min, max]` of `ell^{+-}` over the boundary.
    pub fn value_range(&self, sign: Sign) -> [f64; 2] {
        let c = &self.crit[sign.index()];
        [c[0].value, c[1].value]
    }

    /// `mu^{+-}(t) = sign ell^{+-}(z'(t))`.
    pub fn mu(&self, sign: Sign, t: f64) -> i32 {
        let v = self.f(sign, t, 1);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    }

    /// The two monotone arcs as lifted intervals `(start, end)`: increasing then decreasing.
    pub fn arcs(&self, sign: Sign) -> [(f64, f64); 2] {
        let [lo, hi] = self.characteristic_points(sign);
        let inc = (lo, lo + wrap01(hi - lo));
        let dec = (hi, hi + wrap01(lo - hi));
        [inc, dec]
    }

    /// Solves `ell^{+-}(z(u)) = c` on the given monotone arc.
    pub fn solve_level(&self, sign: Sign, c: f64, arc: (f64, f64)) -> f64 {
        let g = |u: f64| (self.f(sign, u, 0) - c, self.f(sign, u, 1));
        wrap01(newton_bisect(g, arc.0, arc.1, 1e-15))
    }

    /// `gamma^{+-}(t)` and its derivative.
    pub fn gamma(&self, sign: Sign, t: f64) -> (f64, f64) {
        let t = wrap01(t);
        for c in &self.crit[sign.index()] {
            let s = circ_diff(t, c.theta);
            if s.abs() < MORSE_ZONE {
                return morse_gamma(c, s);
            }
        }
        let [inc, dec] = self.arcs(sign);
        let on_inc = wrap01(t - inc.0) < inc.1 - inc.0;
        let target = if on_inc { dec } else { inc };
        let c = self.f(sign, t, 0);
        let u = self.solve_level(sign, c, target);
        let d = self.f(sign, t, 1) / self.f(sign, u, 1);
        (u, d)
    }

    /// `b = gamma^+ o gamma^-`.
    pub fn b(&self, t: f64) -> (f64, f64) {
        let (u, du) = self.gamma(Sign::Minus, t);
        let (v, dv) = self.gamma(Sign::Plus, u);
        (v, du * dv)
    }

    pub fn b_inv(&self, t: f64) -> (f64, f64) {
        let (u, du) = self.gamma(Sign::Plus, t);
        let (v, dv) = self.gamma(Sign::Minus, u);
        (v, du * dv)
    }

    /// `b^k` for any integer `k`.
    pub fn b_pow(&self, t: f64, k: i64) -> (f64, f64) {
        let mut x = wrap01(t);
        let mut d = 1.0;
        for _ in 0..k.unsigned_abs() {
            let (y, dy) = if k > 0 { self.b(x) } else { self.b_inv(x) };
            x = y;
            d *= dy;
        }
        (x, d)
    }

    /// Boundary parameters visited by alternately applying `gamma^-` and `gamma^+`.
    pub fn trajectory(&self, t0: f64, steps: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut t = wrap01(t0);
        out.push(t);
        for k in 0..steps {
            let sign = if k % 2 == 0 { Sign::Minus } else { Sign::Plus };
            t = self.gamma(sign, t).0;
            out.push(t);
        }
        out
    }

    pub fn as_map(&self) -> BilliardMap<'_> {
        BilliardMap(self)
    }

    pub fn involution(&self, sign: Sign) -> Involution<'_> {
        Involution(self, sign)
    }
}

/// Involution `gamma` near a characteristic point: the nontrivial root `u` of
/// `(f(c+u) - f(c+s)) / (u - s) = 0` for the local Taylor polynomial.
fn morse_gamma(c: &Crit, s: f64) -> (f64, f64) {
    let a = &c.taylor;
    let q = |u: f64| {
        // sum_k a_k (u^k - s^k)/(u - s) and its u-derivative
        let mut val = 0.0;
        let mut der = 0.0;
        for (k, ak) in a.iter().enumerate().skip(2) {
            for j in 0..k {
                let sp = s.powi((k - 1 - j) as i32);
                val += ak * u.powi(j as i32) * sp;
                if j > 0 {
                    der += ak * j as f64 * u.powi(j as i32 - 1) * sp;
                }
            }
        }
        (val, der)
    };
    let mut u = -s;
    for _ in 0..8 {
        let (v, d) = q(u);
        let step = v / d;
        u -= step;
        if step.abs() < 1e-18 {
            break;
        }
    }
    let fp = |x: f64| {
        // f'(c + x) / x
        let mut acc = 0.0;
        for (k, ak) in a.iter().enumerate().skip(2) {
            acc += k as f64 * ak * x.powi(k as i32 - 2);
        }
        acc
    };
    let ratio = if s == 0.0 { -1.0 } else { s / u };
    (wrap01(c.theta + u), ratio * fp(s) / fp(u))
}

pub struct BilliardMap<'a>(&'a Billiard);

impl CircleMap for BilliardMap<'_> {
    fn apply(&self, t: f64) -> (f64, f64) {
        self.0.b(t)
    }
    fn apply_inv(&self, t: f64) -> (f64, f64) {
        self.0.b_inv(t)
    }
}

pub struct Involution<'a>(&'a Billiard, Sign);

impl CircleMap for Involution<'_> {
    fn apply(&self, t: f64) -> (f64, f64) {
        self.0.gamma(self.1, t)
    }
    fn apply_inv(&self, t: f64) -> (f64, f64) {
        self.0.gamma(self.1, t)
    }
}

/// Rigid rotation, mostly for tests.
pub struct Rotation(pub f64);

impl CircleMap for Rotation {
    fn apply(&self, t: f64) -> (f64, f64) {
        (wrap01(t + self.0), 1.0)
    }
    fn apply_inv(&self, t: f64) -> (f64, f64) {
        (wrap01(t - self.0), 1.0)
    }
}

/// `g^k` for any integer `k`.
pub fn iterate(g: &dyn CircleMap, t: f64, k: i64) -> (f64, f64) {
    let mut x = wrap01(t);
    let mut d = 1.0;
    for _ in 0..k.unsigned_abs() {
        let (y, dy) = if k > 0 { g.apply(x) } else { g.apply_inv(x) };
        x = y;
        d *= dy;
    }
    (x, d)
}

/// Continuous lift `R -> R` of an orientation-preserving circle map.
pub struct Lift<'a> {
    map: &'a dyn CircleMap,
    disp: Vec<f64>,
}

impl<'a> Lift<'a> {
    pub fn new(map: &'a dyn CircleMap, n: usize) -> Self {
        let mut disp: Vec<f64> = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let t = j as f64 / n as f64;
            let mut d: f64 = map.apply(t % 1.0).0 - (t % 1.0);
            if let Some(&prev) = disp.last() {
                d += (prev - d).round();
            } else {
                d = wrap01(d);
            }
            disp.push(d);
        }
        Lift { map, disp }
    }

    /// Lifted image and derivative.
    pub fn apply(&self, x: f64) -> (f64, f64) {
        let base = x.floor();
        let t = x - base;
        let n = self.disp.len() - 1;
        let s = t * n as f64;
        let j = (s.floor() as usize).min(n - 1);
        let w = s - j as f64;
        let guess = (1.0 - w) * self.disp[j] + w * self.disp[j + 1];
        let (y, dy) = self.map.apply(t);
        let raw = y - t;
        let d = raw + (guess - raw).round();
        (x + d, dy)
    }

    /// Mean displacement over `iters` steps from `x0`.
    pub fn rotation_estimate(&self, x0: f64, iters: usize) -> f64 {
        let mut x = x0;
        for _ in 0..iters {
            x = self.apply(x).0;
        }
        (x - x0) / iters as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicOrbit {
    pub points: Vec<f64>,
    /// `(b^n)'` along the orbit.
    pub multiplier: f64,
    pub log_multiplier: f64,
    pub repelling: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicsReport {
    pub rotation_number: f64,
    /// `(p, q)` in lowest terms when periodic points were found.
    pub rational: Option<(i64, usize)>,
    pub period: Option<usize>,
    pub orbits: Vec<PeriodicOrbit>,
    /// Every grid point is periodic (`b^q = id` numerically).
    pub identity_power: bool,
    pub morse_smale: bool,
    pub reason: String,
    pub min_abs_log_multiplier: f64,
    /// Repelling periodic points.
    pub sigma_plus: Vec<f64>,
    /// Attracting periodic points.
    pub sigma_minus: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct DynamicsOptions {
    pub grid_n: usize,
    pub max_period: usize,
    pub rotation_iters: usize,
    /// Orbits with `|log (b^n)'|` below this are non-hyperbolic.
    pub ms_threshold: f64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions {
            grid_n: 4096,
            max_period: 64,
            rotation_iters: 2000,
            ms_threshold: 1e-6,
        }
    }
}

/// Finds the periodic orbits of an orientation-preserving circle map and
/// decides the Morse-Smale property.
pub fn analyze_dynamics(map: &dyn CircleMap, opts: &DynamicsOptions) -> DynamicsReport {
    let n = opts.grid_n;
    let lift = Lift::new(map, n);
    let grid: Vec<f64> = (0..n).map(|j| j as f64 / n as f64).collect();
    let mut cur = grid.clone();
    let mut deriv = vec![1.0; n];
    let mut found: Option<(i64, usize)> = None;
    for q in 1..=opts.max_period {
        for j in 0..n {
            let (y, d) = lift.apply(cur[j]);
            cur[j] = y;
            deriv[j] *= d;
        }
        let (lo, hi) = cur
            .iter()
            .zip(&grid)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, t)| {
                (lo.min(x - t), hi.max(x - t))
            });
        let p = lo.ceil();
        if p <= hi + 1e-12 {
            found = Some((p as i64, q));
            break;
        }
    }
    let rho_est = lift.rotation_estimate(0.0, opts.rotation_iters);
    let mut rep = DynamicsReport {
        rotation_number: rho_est,
        rational: found,
        period: None,
        orbits: vec![],
        identity_power: false,
        morse_smale: false,
        reason: String::new(),
        min_abs_log_multiplier: f64::INFINITY,
        sigma_plus: vec![],
        sigma_minus: vec![],
    };
    let Some((p, q)) = found else {
        rep.reason = format!("no periodic point with period <= {}", opts.max_period);
        return rep;
    };
    rep.rotation_number = p as f64 / q as f64;
    rep.period = Some(q);
    let pf = p as f64;
    let gvals: Vec<f64> = cur.iter().zip(&grid).map(|(x, t)| x - t - pf).collect();
    if gvals.iter().all(|g| g.abs() < 1e-10) {
        rep.identity_power = true;
        rep.min_abs_log_multiplier = 0.0;
        rep.reason = format!("b^{q} is the identity: every point is periodic");
        return rep;
    }
    let gq = |t: f64| {
        let mut x = t;
        let mut d = 1.0;
        for _ in 0..q {
            let (y, dy) = lift.apply(x);
            x = y;
            d *= dy;
        }
        (x - t - pf, d - 1.0)
    };
    let mut roots: Vec<f64> = Vec::new();
    for j in 0..n {
        let a = gvals[j];
        let b = gvals[(j + 1) % n];
        let lo = grid[j];
        let hi = lo + 1.0 / n as f64;
        if a == 0.0 {
            roots.push(lo);
        } else if a * b < 0.0 {
            roots.push(wrap01(newton_bisect(gq, lo, hi, 1e-14)));
        } else if a.abs() < 1e-9 && a.abs() <= gvals[(j + n - 1) % n].abs() && a.abs() <= b.abs() {
            rep.reason = format!("tangential periodic point near {lo}");
        }
    }
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut pts = vec![roots[i]];
        let mut x = roots[i];
        for _ in 1..q {
            x = map.apply(x).0;
            pts.push(x);
        }
        for (k, r) in roots.iter().enumerate() {
            if pts.iter().any(|y| circ_diff(*y, *r).abs() < 1e-7) {
                used[k] = true;
            }
        }
        let mult = iterate(map, roots[i], q as i64).1;
        let lm = mult.ln();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rep.min_abs_log_multiplier = rep.min_abs_log_multiplier.min(lm.abs());
        if mult > 1.0 {
            rep.sigma_plus.extend(&pts);
        } else {
            rep.sigma_minus.extend(&pts);
        }
        rep.orbits.push(PeriodicOrbit {
            points: pts,
            multiplier: mult,
            log_multiplier: lm,
            repelling: mult > 1.0,
        });
    }
    rep.sigma_plus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rep.sigma_minus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if rep.orbits.is_empty() {
        rep.reason = "no transverse periodic point".into();
    } else if rep.min_abs_log_multiplier <= opts.ms_threshold {
        rep.reason = format!(
            "non-hyperbolic periodic orbit, |log (b^n)'| = {:e}",
            rep.min_abs_log_multiplier
        );
    } else if rep.reason.is_empty() {
        rep.morse_smale = true;
        rep.reason = format!("{} hyperbolic orbit(s) of period {q}", rep.orbits.len());
    }
    rep
}

/// Largest violations of the involution and sign identities over sample points.
#[derive(Clone, Debug, Default, Serialize)]
pub struct IdentityCheck {
    pub involution: f64,
    pub level: f64,
    pub max_gamma_derivative: f64,
    pub min_b_derivative: f64,
    pub sign_failures: usize,
    pub samples: usize,
}

/// Checks `gamma o gamma = id`, level preservation, orientation and the sign
/// relations between `mu^{+-}` and chord directions at the given parameters.
pub fn check_identities(bil: &Billiard, thetas: &[f64]) -> IdentityCheck {
    let mut out = IdentityCheck {
        max_gamma_derivative: f64::NEG_INFINITY,
        min_b_derivative: f64::INFINITY,
        samples: thetas.len(),
        ..Default::default()
    };
    let forms = bil.forms();
    for &t in thetas {
        for sign in Sign::BOTH {
            let (u, du) = bil.gamma(sign, t);
            let (back, _) = bil.gamma(sign, u);
            out.involution = out.involution.max(circ_diff(back, t).abs());
            out.level = out.level.max((bil.f(sign, u, 0) - bil.f(sign, t, 0)).abs());
            out.max_gamma_derivative = out.max_gamma_derivative.max(du);
            let far = bil
                .characteristic_points(sign)
                .iter()
                .all(|c| circ_diff(t, *c).abs() > 1e-3);
            if far {
                let zt = bil.spec.point(t, 0);
                let zu = bil.spec.point(u, 0);
                let chord = forms.ell(sign.flip(), [zu[0] - zt[0], zu[1] - zt[1]]);
                let lhs = chord.signum() as i32;
                let rhs = sign.s() as i32 * bil.mu(sign, t);
                if lhs != rhs || bil.mu(sign, u) != -bil.mu(sign, t) {
                    out.sign_failures += 1;
                }
            }
        }
        out.min_b_derivative = out.min_b_derivative.min(bil.b(t).1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn circle_involutions_closed_form() {
        let b = Billiard::new(&DomainSpec::circle(FRAC_1_SQRT_2)).unwrap();
        for &t in &[0.0, 0.1, 0.3, 0.55, 0.9] {
            let (g, d) = b.gamma(Sign::Plus, t);
            assert!(circ_diff(g, 0.25 - t).abs() < 1e-12, "{t} {g}");
            assert!((d + 1.0).abs() < 1e-9);
            let (g, _) = b.gamma(Sign::Minus, t);
            assert!(circ_diff(g, 0.75 - t).abs() < 1e-12);
            let (bt, db) = b.b(t);
            assert!(circ_diff(bt, t + 0.5).abs() < 1e-12);
            assert!((db - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn morse_zone_matches_global_solve() {
        let b = Billiard::new(&DomainSpec::figure1()).unwrap();
        for sign in Sign::BOTH {
            for c in b.characteristic_points(sign) {
                for s in [1.5e-4, -1.5e-4, 0.9e-4, -0.9e-4, 1e-7, 0.0] {
                    let (g, d) = b.gamma(sign, c + s);
                    // mirrored point sits roughly at c - s
                    assert!(circ_diff(g, c - s).abs() < 1e-6, "{s}");
                    let lv = b.f(sign, g, 0) - b.f(sign, c + s, 0);
                    assert!(lv.abs() < 1e-13);
                    assert!(d < 0.0 && (d + 1.0).abs() < 1e-2);
                }
            }
        }
    }

    #[test]
    fn rotation_lift() {
        let r = Rotation(0.3);
        let lift = Lift::new(&r, 64);
        assert!((lift.apply(2.9).0 - 3.2).abs() < 1e-14);
        assert!((lift.rotation_estimate(0.0, 100) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn disk_is_not_morse_smale() {
        let b = Billiard::new(&DomainSpec::circle(FRAC_1_SQRT_2)).unwrap();
        let rep = analyze_dynamics(&b.as_map(), &DynamicsOptions::default());
        assert_eq!(rep.rational, Some((1, 2)));
        assert!(rep.identity_power);
        assert!(!rep.morse_smale);
    }
}
