use dmme_core::algebra::{c, hermitian_eigenvalues, operator_norm, DensityMatrix, Picture, PureState};
use dmme_core::bath::BathParams;
use dmme_core::controls::{AnsatzProtocol, Protocol, ProtocolParams, Variant};
use dmme_core::dynamics::{
    adiabatic_steady_populations, evolve, instantaneous_generator, picture_transform, EvolutionOptions,
};
use dmme_core::invariant::{invariance_residual, system_hamiltonian, Drive, Fields};
use nalgebra::Vector4;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ProtocolParams> {
    (0.5..2.0f64, 0.1..0.9f64, 0.005..0.1f64, 0.5..2.0f64, any::<bool>()).prop_map(
        |(gamma, delta, g2m, omega_e, sin3)| ProtocolParams {
            gamma,
            delta,
            g2m,
            omega_e,
            variant: if sin3 { Variant::Sin3 } else { Variant::Cos2 },
            ..ProtocolParams::default()
        },
    )
}

fn ket() -> impl Strategy<Value = PureState> {
    prop::array::uniform8(-1.0..1.0f64).prop_filter_map("zero vector", |a| {
        PureState::normalized(Vector4::new(c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7]))).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prescribed_g_is_an_invariant(p in params(), frac in 0.0..1.0f64) {
        let Ok(proto) = AnsatzProtocol::new(p) else { return Ok(()) };
        let t = frac * proto.duration();
        let g = proto.g(t);
        let scale = 1.0 + g.0.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(invariance_residual(&g, &proto.g_dot(t), proto.fields(t)) <= 1e-8 * scale);
        let (l0, lt) = (proto.g(0.0).eigenvalues(), g.eigenvalues());
        for k in 0..4 {
            prop_assert!((l0[k] - lt[k]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn generators_preserve_trace_and_hermiticity(
        p in params(),
        frac in 0.0..0.95f64,
        temperature in 0.0..2.0f64,
        interaction in any::<bool>(),
    ) {
        let Ok(proto) = AnsatzProtocol::new(p) else { return Ok(()) };
        let bath = BathParams { temperature, ..BathParams::default() };
        let picture = if interaction { Picture::Interaction } else { Picture::Schroedinger };
        let l = instantaneous_generator(&proto, &bath, frac * proto.duration(), picture, false).unwrap().liouvillian();
        let scale = 1.0 + l.matrix.norm();
        prop_assert!(l.trace_preservation_defect() <= 1e-12 * scale);
        prop_assert!(l.hermiticity_preservation_defect() <= 1e-12 * scale);
    }

    #[test]
    fn steady_populations_balance(n32 in 0.0..20.0f64, n24 in 0.0..20.0f64) {
        let [p2, p3, p4] = adiabatic_steady_populations(n32, n24).unwrap();
        prop_assert!((p2 + p3 + p4 - 1.0).abs() <= 1e-12);
        prop_assert!(p2.min(p3).min(p4) >= 0.0);
        prop_assert!((p2 * (n32 + 1.0) - p3 * n32).abs() <= 1e-12);
        prop_assert!((p4 * (n24 + 1.0) - p2 * n24).abs() <= 1e-12);
    }

    #[test]
    fn picture_round_trip(psi in ket(), f in -5.0..5.0f64, j in -2.0..2.0f64, t in 0.0..1.0f64) {
        let h = system_hamiltonian(Fields { f, j });
        let u = (h * c(0.0, -t)).exp();
        let rho = DensityMatrix::pure(&psi, Picture::Interaction);
        let s = picture_transform(&rho, &u).unwrap();
        prop_assert_eq!(s.picture(), Picture::Schroedinger);
        let back = picture_transform(&s, &u).unwrap();
        prop_assert!(operator_norm(&(back.matrix() - rho.matrix())) <= 1e-10);
        let (a, b) = (hermitian_eigenvalues(rho.matrix()), hermitian_eigenvalues(s.matrix()));
        for k in 0..4 {
            prop_assert!((a[k] - b[k]).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_stay_physical(p in params(), psi in ket(), temperature in 0.0..2.0f64) {
        let Ok(proto) = AnsatzProtocol::new(p) else { return Ok(()) };
        let bath = BathParams { temperature, ..BathParams::default() };
        let opts = EvolutionOptions::new(proto.duration(), 41);
        let tr = evolve(&DensityMatrix::pure(&psi, Picture::Schroedinger), &proto, &bath, &opts).unwrap();
        for r in &tr.records {
            prop_assert!(r.diagnostics.trace_defect <= 1e-8);
            prop_assert!(r.diagnostics.min_eigenvalue >= -1e-8);
            let xi = r.rates.frequencies.xi23_sq + r.rates.frequencies.xi24_sq;
            prop_assert!((xi - 4.0).abs() <= 1e-10);
        }
    }
}
