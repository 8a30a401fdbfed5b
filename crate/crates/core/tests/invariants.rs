use std::f64::consts::{PI, TAU};

use glvortex_core::applied::{precompute, DriveSpec, FourierSeries};
use glvortex_core::energetics::{energy_identity, modified_energy};
use glvortex_core::f64::{Grid, State};
use glvortex_core::grid::{EdgeField, NodeField};
use glvortex_core::reduced::renormalized_energy_at;
use glvortex_core::tdgl::{ansatz, apply_gauge, step, CoreProfile, Scheme, StepperConfig, VortexSpec};
use glvortex_core::vortex::{detect, vorticity};
use proptest::prelude::*;

fn driven(grid: &Grid) -> glvortex_core::applied::PrecomputedFields<f64> {
    let drive = DriveSpec {
        j_ex: 1.0,
        h_ex: 1.0,
        j_nu: FourierSeries::new(vec![0.0, 1.0]),
        i_nu: FourierSeries::zero(),
        h_trace: None,
    };
    precompute(&drive, grid, 1e-12).unwrap()
}

fn pos() -> impl Strategy<Value = [f64; 2]> {
    (0.3f64..0.7, 0.3f64..0.7).prop_map(|(x, y)| [x, y])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// One explicit step commutes with a time-independent gauge transform.
    #[test]
    fn step_is_gauge_covariant(a in pos(), d in prop_oneof![Just(1), Just(-1)],
                               k in 1.0f64..4.0, amp in 0.1f64..3.0) {
        let g = Grid::square(1.0, 25).unwrap();
        let eps = 4.0 * g.h;
        let pre = driven(&g);
        let mut s = State::vacuum(&g);
        s.v = ansatz(&g, &[VortexSpec { pos: a, degree: d }], eps, CoreProfile::Tanh);
        s.b = EdgeField::from_fn(&g, |p| [(k * p[1]).sin(), (k * p[0]).cos()]);
        let xi = NodeField::from_fn(&g, |p| amp * (PI * k * p[0] * p[1]).sin());
        let cfg = StepperConfig::new(&g, eps, 0.2, Scheme::ExplicitEuler, 1.0, 1);
        let lhs = step(&g, &apply_gauge(&g, &s, &xi), &pre, &cfg).unwrap();
        let rhs = apply_gauge(&g, &step(&g, &s, &pre, &cfg).unwrap(), &xi);
        for (x, y) in lhs.v.data.iter().zip(&rhs.v.data) {
            prop_assert!((x - y).norm() < 1e-11);
        }
        for (x, y) in lhs.b.x.iter().zip(&rhs.b.x).chain(lhs.b.y.iter().zip(&rhs.b.y)) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    /// Total plaquette winding equals 2π times the sum of degrees, and the
    /// detector recovers each vortex.
    #[test]
    fn winding_counts_degrees(a in pos(), b in pos(), da in prop_oneof![Just(1), Just(-1)], db in prop_oneof![Just(1), Just(-1)]) {
        prop_assume!((a[0] - b[0]).hypot(a[1] - b[1]) > 0.2);
        let g = Grid::square(1.0, 41).unwrap();
        let mut s = State::vacuum(&g);
        s.v = ansatz(&g, &[VortexSpec { pos: a, degree: da }, VortexSpec { pos: b, degree: db }], 0.05, CoreProfile::Tanh);
        let w = vorticity(&g, &s);
        prop_assert!((w.total_winding - TAU * f64::from(da + db)).abs() < 1e-8);
        let dets = detect(&g, &s);
        prop_assert_eq!(dets.len(), 2);
        for (p, d) in [(a, da), (b, db)] {
            prop_assert!(dets.iter().any(|x| x.degree == d && (x.pos[0] - p[0]).hypot(x.pos[1] - p[1]) < 2.0 * g.h));
        }
    }

    /// The renormalized energy does not depend on how the vortices are listed.
    #[test]
    fn renormalized_energy_is_permutation_invariant(a in pos(), b in pos(), da in prop_oneof![Just(1), Just(-1)]) {
        prop_assume!((a[0] - b[0]).hypot(a[1] - b[1]) > 0.1);
        let g = Grid::square(1.0, 33).unwrap();
        let w1 = renormalized_energy_at(&g, &[a, b], &[da, 1], 1e-12).unwrap();
        let w2 = renormalized_energy_at(&g, &[b, a], &[1, da], 1e-12).unwrap();
        prop_assert!((w1 - w2).abs() < 1e-9 * (1.0 + w1.abs()));
    }
}

/// Short driven explicit run: the modified-energy identity closes to a
/// residual that shrinks with the step.
#[test]
fn driven_identity_residual_is_first_order() {
    let g = Grid::square(1.0, 33).unwrap();
    let eps = 4.0 * g.h;
    let pre = driven(&g);
    let mut s = State::vacuum(&g);
    s.v = ansatz(&g, &[VortexSpec { pos: [0.45, 0.55], degree: 1 }], eps, CoreProfile::Tanh);
    let mean_residual = |factor: f64| {
        let cfg = StepperConfig::new(&g, eps, factor, Scheme::ExplicitEuler, 1.0, 1);
        let mut cur = s.clone();
        let mut acc = 0.0;
        let n = (0.2 / factor).round() as usize * 20;
        for _ in 0..n {
            let next = step(&g, &cur, &pre, &cfg).unwrap();
            acc += energy_identity(&g, &cur, &next, &pre, eps).unwrap().residual.abs();
            cur = next;
        }
        (acc / n as f64, modified_energy(&g, &cur, &pre, eps))
    };
    let (r1, _) = mean_residual(0.2);
    let (r2, _) = mean_residual(0.1);
    assert!(r1 / r2 > 1.7, "{r1} vs {r2}");
}
