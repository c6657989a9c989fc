//! End-to-end behaviour of the canonical protocol.

use dmme_core::algebra::{DensityMatrix, Picture};
use dmme_core::bath::{rates, BathParams, ProtocolSnapshot};
use dmme_core::controls::{AnsatzProtocol, Protocol, ProtocolParams};
use dmme_core::dynamics::{evolve, EvolutionOptions, Target};
use dmme_core::invariant::{eigensystem, integrate_g, Drive};
use dmme_core::ode::{linspace, Tolerances};

fn dist(a: [f64; 6], b: [f64; 6]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn canonical() -> AnsatzProtocol {
    AnsatzProtocol::new(ProtocolParams::default()).unwrap()
}

#[test]
fn rates_positive_inside_and_vanish_at_the_end() {
    let p = canonical();
    let bath = BathParams::default();
    let grid = linspace(0.0, p.duration(), 401);
    let at = |t: f64| rates(&ProtocolSnapshot::new(t, p.g(t), p.fields(t)), &bath).unwrap();
    let interior =
        grid[..400].iter().map(|&t| at(t)).map(|r| r.gamma32().min(r.gamma24())).fold(f64::INFINITY, f64::min);
    assert!(interior > 0.0, "{interior}");
    // both transitions close at t = T: xi23 -> 0 and alpha24 -> 0
    let end = at(p.duration());
    assert_eq!(end.gamma32(), 0.0);
    assert!(end.gamma24() < 1e-8, "{}", end.gamma24());
    assert!(!end.reversal());
}

#[test]
fn invariant_round_trip() {
    let p = canonical();
    let fwd = linspace(0.0, p.duration(), 201);
    let g = integrate_g(&p.g(0.0), &p, &fwd, Tolerances::default()).unwrap();
    let last = *g.last().unwrap();
    assert!(dist(last.0, p.g(p.duration()).0) < 1e-8);
    let back: Vec<f64> = fwd.iter().rev().copied().collect();
    let g0 = integrate_g(&last, &p, &back, Tolerances::default()).unwrap();
    assert!(dist(g0.last().unwrap().0, p.g(0.0).0) < 1e-8);
}

#[test]
fn dark_state_ignores_lamb_shift() {
    let p = canonical();
    let psi3 = eigensystem(&p.g(0.0)).unwrap().states[2];
    let curve = |lamb: bool| {
        let bath = BathParams { include_lamb_shift: lamb, ..BathParams::default() };
        let opts = EvolutionOptions { target: Some(Target::Eigenstate(3)), ..EvolutionOptions::new(p.duration(), 201) };
        evolve(&DensityMatrix::pure(&psi3, Picture::Schroedinger), &p, &bath, &opts).unwrap().fidelity.unwrap()
    };
    let (off, on) = (curve(false), curve(true));
    let diff = off.iter().zip(&on).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-6, "{diff}");
}

#[test]
fn fields_are_smooth_and_finite() {
    let p = canonical();
    for t in linspace(0.0, p.duration(), 1001) {
        let f = p.fields(t);
        assert!(f.f.is_finite() && f.j.is_finite() && f.j != 0.0, "t={t}");
    }
}
