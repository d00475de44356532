#![allow(dead_code)]

use std::sync::OnceLock;

use iwave::billiard::{analyze_dynamics, Billiard, DynamicsOptions, DynamicsReport};
use iwave::deformation::DeformationMap;
use iwave::escape::{build_escape_field, build_x0, EscapeField};
use iwave::geometry::DomainSpec;

pub struct Fixture {
    pub bil: Billiard,
    pub dynamics: DynamicsReport,
    pub field: EscapeField,
}

pub fn figure1() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let bil = Billiard::new(&DomainSpec::figure1()).unwrap();
        let dynamics = analyze_dynamics(&bil.as_map(), &DynamicsOptions::default());
        let x0 = build_x0(&bil.as_map(), &dynamics, 4096).unwrap();
        let field = build_escape_field(&bil, &x0).unwrap();
        Fixture { bil, dynamics, field }
    })
}

pub fn figure1_dmap(tau: f64) -> DeformationMap {
    let f = figure1();
    DeformationMap::from_escape(&f.bil, &f.field, tau).unwrap()
}
