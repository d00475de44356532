mod common;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use iwave::billiard::Billiard;
use iwave::deformation::{
    max_displacement, simplified_transversality, verify_deformation, DeformationMap, TANGENCY_ZONE,
};
use iwave::geometry::{DomainSpec, FourierSeries};
use iwave::{circ_diff, Error, Sign, C64};
use proptest::prelude::*;

fn circle_map(tau: f64) -> DeformationMap {
    let bil = Billiard::new(&DomainSpec::circle(FRAC_1_SQRT_2)).unwrap();
    DeformationMap::new(bil, FourierSeries::new(vec![1.0], vec![]), tau).unwrap()
}

#[test]
fn circle_chord_through_origin() {
    let m = circle_map(0.0);
    // ell^+ = 0 is the line x1 = -x2: angles 3 pi / 4 and 7 pi / 4
    let ud = m.pi_updown(Sign::Plus, [0.0, 0.0]).unwrap();
    assert!((ud.theta_down - 0.875).abs() < 1e-12, "{ud:?}");
    assert!((ud.theta_up - 0.375).abs() < 1e-12);
    let f = m.forms();
    let p = |t: f64| m.spec().point(t, 0);
    assert!(f.ell(Sign::Minus, p(ud.theta_down)) < f.ell(Sign::Minus, p(ud.theta_up)));
}

#[test]
fn updown_on_boundary_and_at_tangency() {
    let m = circle_map(0.0);
    let t = 0.3;
    let x = m.spec().point(t, 0);
    let ud = m.pi_updown(Sign::Plus, x).unwrap();
    let hit = circ_diff(ud.theta_down, t).abs().min(circ_diff(ud.theta_up, t).abs());
    assert!(hit < 1e-10);
    let c = m.bil.characteristic_points(Sign::Minus)[1];
    let ud = m.pi_updown(Sign::Minus, m.spec().point(c, 0)).unwrap();
    assert!(circ_diff(ud.theta_down, ud.theta_up).abs() < 1e-7);
    assert!(matches!(m.pi_updown(Sign::Plus, [1.5, 0.0]), Err(Error::OutsideDomain)));
}

#[test]
fn circle_boundary_closed_form() {
    let m = circle_map(0.1);
    let z = m.boundary(0.0).unwrap();
    let a = 0.2 * PI;
    assert!((z[0] - C64::new(a.cosh(), 0.0)).norm() < 1e-12);
    assert!((z[1] - C64::new(0.0, a.sinh())).norm() < 1e-12);
}

#[test]
fn zero_tau_is_identity() {
    let m = common::figure1_dmap(0.0);
    for x in m.sample_grid(12) {
        let e = m.extend(x).unwrap();
        for i in 0..2 {
            assert!((e.xi[i] - x[i]).norm() < 1e-12);
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                // finite differences in the tangency branch
                assert!((e.jac[i][j] - id).norm() < 5e-9, "{:?}", e.jac);
            }
        }
    }
}

#[test]
fn conjugate_deformation() {
    let p = common::figure1_dmap(0.02);
    let m = p.with_tau(-0.02).unwrap();
    for j in 0..40 {
        let t = j as f64 / 40.0 + 0.01;
        let (a, b) = (p.boundary(t).unwrap(), m.boundary(t).unwrap());
        assert!((a[0].conj() - b[0]).norm() < 1e-14 && (a[1].conj() - b[1]).norm() < 1e-14);
    }
    let x = p.sample_grid(8)[20];
    let (a, b) = (p.extend(x).unwrap(), m.extend(x).unwrap());
    assert!((a.xi[0].conj() - b.xi[0]).norm() < 1e-13);
}

#[test]
fn extension_matches_boundary_and_duality() {
    let m = common::figure1_dmap(0.02);
    let f = m.forms();
    for j in 0..64 {
        let t = (j as f64 + 0.3) / 64.0;
        let x = m.spec().point(t, 0);
        let e = m.extend(x).unwrap();
        let z = m.boundary(t).unwrap();
        assert!((e.xi[0] - z[0]).norm() < 1e-10 && (e.xi[1] - z[1]).norm() < 1e-10, "t = {t}");
        for s in Sign::BOTH {
            assert!((f.ell_c(s, e.xi) - e.coords[s.index()].value).norm() < 1e-13);
        }
    }
}

#[test]
fn analytic_jacobian_matches_differences() {
    let m = common::figure1_dmap(0.02);
    let h = 1e-6;
    let mut checked = 0;
    for x in m.sample_grid(10).into_iter().step_by(3) {
        let e = m.extend(x).unwrap();
        if e.tangency() {
            continue;
        }
        for j in 0..2 {
            let mut p = x;
            let mut q = x;
            p[j] += h;
            q[j] -= h;
            let (Ok(ep), Ok(eq)) = (m.extend(p), m.extend(q)) else { continue };
            for i in 0..2 {
                let fd = (ep.xi[i] - eq.xi[i]) / (2.0 * h);
                assert!((fd - e.jac[i][j]).norm() < 1e-7, "{fd} {}", e.jac[i][j]);
            }
            checked += 1;
        }
    }
    assert!(checked > 40);
}

#[test]
fn tangency_seam_is_continuous() {
    let m = common::figure1_dmap(0.02);
    let bil = &m.bil;
    for sign in Sign::BOTH {
        let [lo, hi] = bil.value_range(sign);
        let [tlo, thi] = bil.characteristic_points(sign);
        for (v, t, dir) in [(hi, thi, -1.0), (lo, tlo, 1.0)] {
            let alpha = 0.5 * bil.f(sign, t, 2).abs();
            let point = |c: f64| {
                let [inc, dec] = bil.arcs(sign);
                let a = m.spec().point(bil.solve_level(sign, c, inc), 0);
                let b = m.spec().point(bil.solve_level(sign, c, dec), 0);
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
            };
            let edge = v + dir * TANGENCY_ZONE * alpha;
            let inside = m.coordinate(sign, point(edge - dir * 1e-11)).unwrap();
            let outside = m.coordinate(sign, point(edge + dir * 1e-11)).unwrap();
            assert!(inside.tangency && !outside.tangency);
            assert!((inside.value - outside.value).norm() < 1e-8);
            for j in 0..2 {
                assert!((inside.grad[j] - outside.grad[j]).norm() < 1e-5);
            }
        }
    }
}

#[test]
fn transversality_closed_form() {
    let m = common::figure1_dmap(0.0);
    let mut n = 0;
    for x in m.sample_grid(16).into_iter().step_by(5) {
        if let Some((pred, fd)) = simplified_transversality(&m, x, 1e-5).unwrap() {
            assert!(pred.im > 0.0);
            assert!((pred - fd).norm() < 1e-6 * pred.norm().max(1.0), "{pred} {fd}");
            n += 1;
        }
    }
    assert!(n > 20);
}

#[test]
fn displacement_is_first_order() {
    let m = common::figure1_dmap(0.0);
    let slopes: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&t| max_displacement(&m.with_tau(t).unwrap(), 16).unwrap() / t)
        .collect();
    for w in slopes.windows(2) {
        assert!((w[0] / w[1] - 1.0).abs() < 0.2, "{slopes:?}");
    }
}

#[test]
fn figure1_certificate_at_small_tau() {
    let m = common::figure1_dmap(0.02);
    let c = verify_deformation(&m, 32).unwrap();
    println!("{}", serde_json::to_string(&c).unwrap());
    assert!(c.passed());
    assert!(c.transversality_min_im[0] > 0.0 && c.transversality_min_im[1] > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn disk_identity_at_zero(r in 0.0f64..0.99, t in 0.0f64..1.0) {
        let m = circle_map(0.0);
        let x = [r * (2.0 * PI * t).cos(), r * (2.0 * PI * t).sin()];
        let e = m.extend(x).unwrap();
        prop_assert!((e.xi[0] - x[0]).norm() < 1e-12 && (e.xi[1] - x[1]).norm() < 1e-12);
    }
}
