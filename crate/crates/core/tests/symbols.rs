mod common;

use std::f64::consts::FRAC_1_SQRT_2;

use iwave::billiard::Billiard;
use iwave::deformation::DeformationMap;
use iwave::geometry::{DomainSpec, FourierSeries};
use iwave::symbols::*;
use iwave::C64;
use proptest::prelude::*;

const L: f64 = FRAC_1_SQRT_2;

fn real(w: f64) -> C64 {
    C64::new(w, 0.0)
}

fn jac(a: [f64; 4]) -> Jac {
    [[real(a[0]), real(a[1])], [real(a[2]), real(a[3])]]
}

#[test]
fn flat_examples() {
    let s = flat_symbols(real(L), 0.0, [1.0, 1.0]).unwrap();
    assert!(s.p.norm() < 1e-15);
    assert!((s.q - 4.0).norm() < 1e-15);
    let s = flat_symbols(real(L), 0.0, [1.0, 0.0]).unwrap();
    assert!((s.p - 0.5).norm() < 1e-15);
    assert!(flat_symbols(real(1.5), 0.0, [1.0, 0.0]).is_err());
}

#[test]
fn sixth_order_symbol_reduces_to_p() {
    // d2^2 - w^2 Lap has symbol w^2 |xi|^2 - xi2^2 = p
    let w = C64::new(0.7, 0.1);
    let s = flat_symbols(w, 0.0, [0.3, -1.2]).unwrap();
    assert!((s.a6 - s.p).norm() < 1e-14);
    let s = flat_symbols(w, 0.5, [0.3, -1.2]).unwrap();
    let n2: f64 = 0.09 + 1.44;
    let want = s.p + 2.0 * C64::i() * w * 0.5 * n2 * n2 - 0.25 * n2.powi(3);
    assert!((s.a6 - want).norm() < 1e-13);
}

#[test]
fn identity_jacobian_is_flat() {
    let w = C64::new(0.68, 0.2);
    let a = deformed_symbols(&IDENTITY, w, 0.3, [0.4, 0.9]).unwrap();
    let b = flat_symbols(w, 0.3, [0.4, 0.9]).unwrap();
    assert!((a.a - b.a).norm() < 1e-15 && (a.a6 - b.a6).norm() < 1e-15);
}

#[test]
fn singular_lower_bound_on_a_ray() {
    let s = deformed_symbols(&IDENTITY, real(L), 1.0, [1.0, 0.0]).unwrap();
    // |p + i lambda| >= lambda |xi|^4
    assert!(s.a.norm() - L > 0.0);
    assert!(singular_ratio(s.p, s.q, L) > 0.0);
}

#[test]
fn flat_inviscid_inequality_degenerates() {
    let bil = Billiard::new(&DomainSpec::circle(L)).unwrap();
    let m = DeformationMap::new(bil, FourierSeries::new(vec![1.0], vec![]), 0.0).unwrap();
    let mut o = CertifyOptions::around(L);
    o.grid = 4;
    o.omega_box = (L, L, 0.0, 0.0);
    o.omega_samples = (1, 1);
    let c = certify_ellipticity(&m, &o).unwrap();
    // zero up to the finite-difference Jacobian near tangencies
    assert!(c.inviscid_slack.abs() < 1e-8, "{}", c.inviscid_slack);
}

#[test]
fn figure1_certificates() {
    let m = common::figure1_dmap(0.02);
    let c = certify_ellipticity(&m, &CertifyOptions::around(L)).unwrap();
    println!("{}", serde_json::to_string(&c).unwrap());
    assert!(c.inviscid_pass && c.singular_pass);
    assert!(c.c0 < C0_LIMIT);
}

#[test]
fn flat_root_counts() {
    let n = [0.6, 0.8];
    let xi = [1.0, -0.3];
    let r = coercivity_roots(&IDENTITY, L, xi, n, 0.1).unwrap();
    // |xi + z n|^2 vanishes at (-<xi, n> +- i |xi ^ n|) / |n|^2, each twice
    let (dot, cr) = (xi[0] * n[0] + xi[1] * n[1], xi[0] * n[1] - xi[1] * n[0]);
    for z in &r[0].roots {
        assert!((z[0] + dot).abs() < 1e-6 && (z[1].abs() - cr.abs()).abs() < 1e-6, "{z:?}");
    }
    assert_eq!((r[0].upper, r[0].lower), (2, 2));
    // a real hyperbolic quadratic: real roots
    assert!(r[1].indeterminate);
    assert_eq!((r[3].upper, r[3].lower), (1, 1));
}

#[test]
fn deformed_root_counts_on_boundary() {
    let m = common::figure1_dmap(0.02);
    for k in 0..16 {
        for nu in [1e-4, 1e-2, 1.0] {
            let rep = coercivity_at(&m, (k as f64 + 0.25) / 16.0, nu).unwrap();
            assert!(rep.expected(), "{}", serde_json::to_string(&rep).unwrap());
        }
    }
}

#[test]
fn polynomial_roots_are_roots() {
    let c = [C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 1.0), C64::new(3.0, 0.0), C64::new(1.0, -1.0)];
    for z in poly_roots(&c).unwrap() {
        let v = c.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * z + a);
        assert!(v.norm() < 1e-10);
    }
}

#[test]
fn parameter_norm_examples() {
    assert!((param_weight(1.0, 2.0, 0.01, [10.0, 0.0]) - 404.0).abs() < 1e-10);
    let spec: Vec<([f64; 2], f64)> = (0..9)
        .flat_map(|i| (0..9).map(move |j| ([i as f64 - 4.0, j as f64 - 4.0], 1.0 / (1.0 + (i + j) as f64))))
        .collect();
    let hs = |r: f64| {
        let s: f64 = spec.iter().map(|(x, m)| (1.0 + x[0] * x[0] + x[1] * x[1]).powf(r) * m * m).sum();
        s.sqrt()
    };
    assert!((param_norm(1.0, 2.0, 1.0, &spec, 1.0) / hs(3.0) - 1.0).abs() < 1e-12);
    assert_eq!(param_norm(1.0, 0.0, 0.3, &spec, 1.0), param_norm(1.0, 0.0, 0.01, &spec, 1.0));
    assert!(param_norm(2.0, 1.0, 0.1, &spec, 1.0) > param_norm(1.0, 1.0, 0.1, &spec, 1.0));
    assert!(param_norm(1.0, 2.0, 0.1, &spec, 1.0) > param_norm(1.0, 1.0, 0.1, &spec, 1.0));
}

fn arb_jac() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-2.0f64..2.0).prop_filter("nonsingular", |a| (a[0] * a[3] - a[1] * a[2]).abs() > 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn factored_p(w in 0.05f64..0.95, wi in -0.5f64..0.5, x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let om = C64::new(w, wi);
        let a = flat_symbols(om, 0.0, [x, y]).unwrap().p;
        let b = p_factored(om, [x, y]).unwrap();
        prop_assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn cramer_form(j in arb_jac(), w in 0.1f64..0.9, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let jj = jac(j);
        let a = deformed_symbols(&jj, real(w), 0.0, [x, y]).unwrap().p;
        let b = deformed_p_cramer(&jj, w, [x, y]).unwrap();
        prop_assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn contravariant(j in arb_jac(), k in arb_jac(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let (jj, kk) = (jac(j), jac(k));
        let kj: Jac = [0, 1].map(|r| [0, 1].map(|c| kk[r][0] * jj[0][c] + kk[r][1] * jj[1][c]));
        let xi = [real(x), real(y)];
        let a = pushforward(&kj, xi).unwrap();
        let b = pushforward(&kk, pushforward(&jj, xi).unwrap()).unwrap();
        prop_assert!((a[0] - b[0]).norm() + (a[1] - b[1]).norm() < 1e-10 * (1.0 + a[0].norm() + a[1].norm()));
    }

    #[test]
    fn homogeneity(j in arb_jac(), s in 0.1f64..10.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let jj = jac(j);
        let a = deformed_symbols(&jj, real(L), 0.0, [x, y]).unwrap();
        let b = deformed_symbols(&jj, real(L), 0.0, [s * x, s * y]).unwrap();
        prop_assert!((b.p - s * s * a.p).norm() < 1e-10 * (1.0 + b.p.norm()));
        prop_assert!((b.q - s.powi(4) * a.q).norm() < 1e-10 * (1.0 + b.q.norm()));
    }

    #[test]
    fn root_counts_scale_invariant(t in 0.0f64..1.0, s in 0.2f64..5.0) {
        let m = common::figure1_dmap(0.02);
        let spec = m.spec();
        let x = spec.point(t, 0);
        let d = spec.point(t, 1);
        let n = [d[1], -d[0]];
        let j = m.extend(x).unwrap().jac;
        let a = coercivity_roots(&j, L, d, n, 0.01).unwrap();
        let b = coercivity_roots(&j, L, [s * d[0], s * d[1]], n, 0.01 / (s * s)).unwrap();
        for k in 0..4 {
            prop_assert_eq!((a[k].upper, a[k].lower), (b[k].upper, b[k].lower));
        }
    }

    #[test]
    fn slack_monotone_in_im_omega(ix in 0usize..64, dir in 0.0f64..std::f64::consts::PI, im in 0.0f64..1.0) {
        let m = common::figure1_dmap(0.02);
        let x = m.sample_grid(8)[ix];
        let j = m.extend(x).unwrap().jac;
        let xi = [dir.cos(), dir.sin()];
        let c0 = 20.0;
        let slack = |wi: f64| {
            let p = deformed_symbols(&j, C64::new(L, wi), 0.0, xi).unwrap().p;
            p.im + c0 * 0.02 * p.re.abs() - (0.02 + wi) / c0
        };
        prop_assert!(slack(im + 0.05) >= slack(im) - 1e-12);
    }
}
