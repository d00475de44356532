use std::f64::consts::{FRAC_1_SQRT_2, PI};

use iwave::billiard::{analyze_dynamics, check_identities, Billiard, CircleMap, DynamicsOptions};
use iwave::escape::{build_escape_field, build_x0, pullback, Averaged};
use iwave::geometry::{check_lambda_simple, DomainSpec};
use iwave::{circ_diff, wrap01, Sign};
use proptest::prelude::*;

fn presets() -> Vec<DomainSpec> {
    vec![
        DomainSpec::circle(FRAC_1_SQRT_2),
        DomainSpec::ellipse(2.0, 1.0, 0.5),
        DomainSpec::figure1(),
    ]
}

#[test]
fn unit_circle_is_simple_with_quarter_turn_critical_points() {
    let rep = check_lambda_simple(&DomainSpec::circle(FRAC_1_SQRT_2));
    assert!(rep.simple);
    // ell^+ o z = 2 sin(2 pi t + pi/4): extrema at t = 1/8 and 5/8
    let plus: Vec<f64> = rep.critical_points[0].iter().map(|p| p.theta).collect();
    assert!((plus[1] - 0.125).abs() < 1e-12 && (plus[0] - 0.625).abs() < 1e-12);
    assert!((rep.critical_points[0][1].value - 2.0).abs() < 1e-12);
}

#[test]
fn ellipse_half_lambda_is_simple() {
    let rep = check_lambda_simple(&DomainSpec::ellipse(2.0, 1.0, 0.5));
    assert!(rep.simple);
    assert!(rep.critical_points.iter().all(|c| c.len() == 2));
}

#[test]
fn wavy_curve_is_not_simple() {
    // A strongly corrugated boundary has extra critical points for ell^+.
    let mut s = DomainSpec::circle(FRAC_1_SQRT_2);
    s.fourier_x.cos = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3];
    assert!(!check_lambda_simple(&s).simple);
    assert!(Billiard::new(&s).is_err());
}

#[test]
fn figure1_dynamics_is_morse_smale() {
    let bil = Billiard::new(&DomainSpec::figure1()).unwrap();
    let rep = analyze_dynamics(&bil.as_map(), &DynamicsOptions::default());
    assert!(rep.morse_smale, "{}", rep.reason);
    assert_eq!(rep.period, Some(2));
    assert!(rep.min_abs_log_multiplier > 1e-3);
    // gamma^{+-} swap attracting and repelling orbits
    for sign in Sign::BOTH {
        for p in &rep.sigma_minus {
            let g = bil.gamma(sign, *p).0;
            assert!(rep.sigma_plus.iter().any(|q| circ_diff(g, *q).abs() < 1e-9));
        }
    }
}

#[test]
fn disk_rotation_by_half() {
    let bil = Billiard::new(&DomainSpec::circle(FRAC_1_SQRT_2)).unwrap();
    for j in 0..50 {
        let t = j as f64 / 50.0 + 0.003;
        assert!(circ_diff(bil.b(t).0, t + 0.5).abs() < 1e-10);
    }
}

#[test]
fn identities_on_presets() {
    let ts: Vec<f64> = (0..400).map(|j| wrap01(j as f64 * 0.618_033_988_749 + 0.01)).collect();
    for spec in presets() {
        let bil = Billiard::new(&spec).unwrap();
        let chk = check_identities(&bil, &ts);
        assert!(chk.involution < 1e-10, "{} {}", spec.name, chk.involution);
        assert!(chk.level < 1e-10);
        assert!(chk.max_gamma_derivative < 0.0);
        assert!(chk.min_b_derivative > 0.0);
        assert_eq!(chk.sign_failures, 0, "{}", spec.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn involution_and_level(t in 0.0f64..1.0, which in 0usize..3, plus in any::<bool>()) {
        let spec = &presets()[which];
        let bil = Billiard::new(spec).unwrap();
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let (u, du) = bil.gamma(sign, t);
        prop_assert!(circ_diff(bil.gamma(sign, u).0, t).abs() < 1e-10);
        prop_assert!((bil.f(sign, u, 0) - bil.f(sign, t, 0)).abs() < 1e-10);
        prop_assert!(du < 0.0);
        // (gamma^-)^{-1} o (gamma^+)^{-1} inverts b
        let (bt, db) = bil.b(t);
        let (back, dback) = bil.b_inv(bt);
        prop_assert!(circ_diff(back, t).abs() < 1e-10);
        prop_assert!(db > 0.0 && (db * dback - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pullback_composes(t in 0.0f64..1.0) {
        let bil = Billiard::new(&DomainSpec::figure1()).unwrap();
        let y = |s: f64| (2.0 * PI * s).sin() + 0.3;
        let gp = bil.involution(Sign::Plus);
        let gm = bil.involution(Sign::Minus);
        let bmap = bil.as_map();
        // b^* Y = (gamma^-)^* (gamma^+)^* Y
        let inner = pullback(&gp, &y);
        let composed = pullback(&gm, &inner);
        let direct = pullback(&bmap, &y);
        prop_assert!((composed(t) - direct(t)).abs() < 1e-9 * (1.0 + direct(t).abs()));
    }
}

/// `theta + 1/2 + 0.03 sin(4 pi theta)`: period two, hyperbolic.
struct Synthetic;

impl CircleMap for Synthetic {
    fn apply(&self, t: f64) -> (f64, f64) {
        let a = 0.03;
        (
            wrap01(t + 0.5 + a * (4.0 * PI * t).sin()),
            1.0 + 4.0 * PI * a * (4.0 * PI * t).cos(),
        )
    }
    fn apply_inv(&self, t: f64) -> (f64, f64) {
        let mut x = t - 0.5;
        for _ in 0..60 {
            let (y, d) = self.apply(x);
            x -= circ_diff(y, t) / d;
        }
        let d = self.apply(x).1;
        (wrap01(x), 1.0 / d)
    }
}

#[test]
fn synthetic_map_first_field() {
    let rep = analyze_dynamics(&Synthetic, &DynamicsOptions::default());
    assert!(rep.morse_smale, "{}", rep.reason);
    assert_eq!(rep.period, Some(2));
    for p in [0.0, 0.5] {
        assert!(rep.sigma_plus.iter().any(|q| circ_diff(*q, p).abs() < 1e-10));
    }
    for p in [0.25, 0.75] {
        assert!(rep.sigma_minus.iter().any(|q| circ_diff(*q, p).abs() < 1e-10));
    }
    let x0 = build_x0(&Synthetic, &rep, 4096).unwrap();
    assert_eq!(x0.n_escape % 2, 0);
    assert!(x0.margin > 0.0);
    for j in 0..997 {
        let t = j as f64 / 997.0;
        assert!(x0.escape_difference(&Synthetic, t) > 0.0);
        assert!(x0.h0(t).abs() <= 1.0);
    }
}

#[test]
fn circle_has_no_escape_field() {
    let bil = Billiard::new(&DomainSpec::circle(FRAC_1_SQRT_2)).unwrap();
    let rep = analyze_dynamics(&bil.as_map(), &DynamicsOptions::default());
    assert!(build_x0(&bil.as_map(), &rep, 4096).is_err());
}

#[test]
fn figure1_escape_field_identities() {
    let bil = Billiard::new(&DomainSpec::figure1()).unwrap();
    let rep = analyze_dynamics(&bil.as_map(), &DynamicsOptions::default());
    let x0 = build_x0(&bil.as_map(), &rep, 4096).unwrap();
    let esc = build_escape_field(&bil, &x0).unwrap();
    println!(
        "N = {}, r = {}, m+ = {}, m- = {}, modes = {}, trunc m+ = {}, m- = {}",
        x0.n_escape,
        x0.radius,
        esc.margin_plus,
        esc.margin_minus,
        esc.modes,
        esc.margin_plus_truncated,
        esc.margin_minus_truncated
    );
    assert!(esc.margin_plus > 0.0 && esc.margin_minus > 0.0);
    assert!(esc.margin_plus_truncated > 0.0 && esc.margin_minus_truncated > 0.0);
    let avg = Averaged { bil: &bil, first: &x0 };
    let bmap = bil.as_map();
    let n = x0.n_escape as i64;
    for j in 0..200 {
        let t = (j as f64 + 0.37) / 200.0;
        // telescoping
        let (bn, dbn) = iwave::billiard::iterate(&bmap, t, n);
        let rhs = x0.h0(t) - x0.h0(bn) / dbn;
        assert!((avg.d1(t) - rhs).abs() < 1e-9);
        // averaging identities
        let (gm, dgm) = bil.gamma(Sign::Minus, t);
        let (bi, dbi) = bil.b_inv(t);
        let yp = avg.d1(gm) / dgm - avg.d1(bi) / dbi;
        assert!((avg.y(Sign::Plus, t) - yp).abs() < 1e-9);
        let ym = avg.d1(t) - avg.d1(gm) / dgm;
        assert!((avg.y(Sign::Minus, t) - ym).abs() < 1e-9);
    }
}
