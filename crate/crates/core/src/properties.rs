use std::f64::consts::TAU;

use approx::{abs_diff_eq, assert_abs_diff_eq};
use proptest::prelude::*;

use crate::exterior::holomorphic_three_form;
use crate::gluing::{im_xi_on_frame, GraphJet};
use crate::slag::{compact_residual, deformed_frame_residual};
use crate::{
    error_density, evaluate, omega_restriction, standard_symplectic_form, tangent_frame,
    ComplexStructure, Cutoff, GluingConfig, KForm, NeckPoint, Vec6,
};

fn vec6() -> impl Strategy<Value = Vec6> {
    prop::array::uniform6(-2.0f64..2.0).prop_map(|a| Vec6::new(a).unwrap())
}

/// `(delta, r, theta, kappa)` with `r` inside the neck `[delta, sqrt(delta)]`.
fn neck_sample() -> impl Strategy<Value = (f64, NeckPoint)> {
    (-3.0f64..-0.6, 0.0f64..1.0, 0.0..TAU, 0.0..TAU).prop_map(|(ld, t, th, k)| {
        let delta = 10f64.powf(ld);
        let s = delta.ln() * (1.0 - 0.5 * t);
        (delta, NeckPoint::from_polar(s.exp(), th, k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn forms_are_multilinear_and_alternating(u in vec6(), v in vec6(), w in vec6(), a in -3.0f64..3.0) {
        let omega = standard_symplectic_form();
        let (_, im) = holomorphic_three_form();
        let lhs = evaluate(&omega, &[a * u + w, v]).unwrap();
        let rhs = a * evaluate(&omega, &[u, v]).unwrap() + evaluate(&omega, &[w, v]).unwrap();
        prop_assert!(abs_diff_eq!(lhs, rhs, epsilon = 1e-11));
        prop_assert!(abs_diff_eq!(
            evaluate(&omega, &[u, v]).unwrap(),
            -evaluate(&omega, &[v, u]).unwrap(),
            epsilon = 1e-12
        ));
        let uvw = evaluate(&im, &[u, v, w]).unwrap();
        prop_assert!(abs_diff_eq!(uvw, -evaluate(&im, &[v, u, w]).unwrap(), epsilon = 1e-11));
        prop_assert!(abs_diff_eq!(uvw, evaluate(&im, &[v, w, u]).unwrap(), epsilon = 1e-11));
        prop_assert!(abs_diff_eq!(evaluate(&im, &[u, u, w]).unwrap(), 0.0, epsilon = 1e-11));
    }

    #[test]
    fn wedge_of_one_forms_is_a_determinant(u in vec6(), v in vec6(), i in 0usize..6, j in 0usize..6) {
        prop_assume!(i != j);
        let f = KForm::coordinate(i).wedge(&KForm::coordinate(j));
        let expected = u[i] * v[j] - u[j] * v[i];
        prop_assert!(abs_diff_eq!(evaluate(&f, &[u, v]).unwrap(), expected, epsilon = 1e-12));
    }

    #[test]
    fn omega_is_complex_structure_invariant(u in vec6(), v in vec6()) {
        let j = ComplexStructure::standard();
        let omega = standard_symplectic_form();
        let before = evaluate(&omega, &[u, v]).unwrap();
        let after = evaluate(&omega, &[j.apply(&u), j.apply(&v)]).unwrap();
        prop_assert!(abs_diff_eq!(before, after, epsilon = 1e-11));
        prop_assert!(abs_diff_eq!(j.apply(&j.apply(&u)).norm(), u.norm(), epsilon = 1e-12));
    }

    #[test]
    fn neck_is_lagrangian((delta, p) in neck_sample()) {
        let cfg = GluingConfig::new(delta).unwrap();
        let frame = tangent_frame(&p, &cfg).unwrap();
        for w in omega_restriction(&frame) {
            prop_assert!(w.abs() <= 1e-12);
        }
        let closed_form = error_density(&p, &cfg).unwrap();
        prop_assert!(abs_diff_eq!(closed_form, im_xi_on_frame(&frame), epsilon = 1e-12));
    }

    #[test]
    fn fully_glued_neck_is_special_lagrangian((delta, p) in neck_sample()) {
        let cfg = GluingConfig::new(delta).unwrap().with_cutoff(Cutoff::Constant(1.0)).unwrap();
        let frame = tangent_frame(&p, &cfg).unwrap();
        prop_assert!(im_xi_on_frame(&frame).abs() <= 1e-12);
    }

    #[test]
    fn deformed_frame_matches_compact_form(
        (delta, p) in neck_sample(),
        s in prop::array::uniform4(-0.5f64..0.5),
    ) {
        let cfg = GluingConfig::new(delta).unwrap();
        let jet = GraphJet::radial(&p, &cfg).unwrap();
        let s = [[s[0], s[1]], [s[1], s[3]]];
        prop_assert!(abs_diff_eq!(deformed_frame_residual(&jet, s), compact_residual(&jet, s), epsilon = 1e-12));
    }
}

#[test]
fn flat_region_is_exactly_lagrangian() {
    let cfg = GluingConfig::new(0.01).unwrap();
    let f = tangent_frame(&NeckPoint::from_polar(0.5, 1.0, 2.0), &cfg).unwrap();
    assert_abs_diff_eq!(omega_restriction(&f)[0], 0.0);
    assert_abs_diff_eq!(im_xi_on_frame(&f), 0.0);
}
