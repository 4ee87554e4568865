//! Randomized invariants.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector4};
use proptest::prelude::*;

use paramp_entangle::closedform::{separability, squeeze_angle};
use paramp_entangle::model::{
    embed_pairs, pair_blocks, quadrature_transform, symplectic_form, symplectic_form_individual, threshold_detuning,
    transform_matrix, TransformDirection,
};
use paramp_entangle::riccati::{full_riccati_rhs, pair_riccati_rhs, rotated_variance, steady_algebraic, PairCovariance};
use paramp_entangle::{
    drift_matrix, reduce_to_pairs, threshold, Basis, CovarianceMatrix4, DriveModel, OscillatorPairParams,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Drive strictly below threshold: `χ = fraction · √(1 + δ²)`.
fn stable_drive() -> impl Strategy<Value = (f64, f64)> {
    (0.0..60.0f64, 0.0..0.98f64).prop_map(|(delta, fraction)| (fraction * (1.0 + delta * delta).sqrt(), delta))
}

fn params() -> impl Strategy<Value = OscillatorPairParams> {
    (0.0..50.0f64, 0.05..1.0f64, -3.0..3.0f64)
        .prop_map(|(n, eta, log_mu)| OscillatorPairParams::symmetric(1.0, n, eta, 10f64.powf(log_mu)))
}

fn physical_pair() -> impl Strategy<Value = PairCovariance> {
    (0.3..20.0f64, 0.3..20.0f64, -0.99..0.99f64).prop_filter_map("uncertainty bound", |(vx, vy, r)| {
        let c = r * (vx * vy).sqrt();
        (vx * vy - c * c >= 0.25).then(|| PairCovariance::new(vx, vy, c))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn full_rhs_blocks_equal_pair_rhs(
        (chi, delta) in stable_drive(),
        p in params(),
        ca in physical_pair(),
        cb in physical_pair(),
        two in any::<bool>(),
    ) {
        let drive = if two {
            DriveModel::ModelTwo { chi, coupling: delta }
        } else {
            DriveModel::ModelOne { chi, detuning: delta }
        };
        let a = drift_matrix(&drive, &p).unwrap();
        let (pa, pb) = reduce_to_pairs(&drive, &p).unwrap();
        let v = CovarianceMatrix4::from_pairs(a.basis, &ca, &cb);
        let dv = full_riccati_rhs(&v, &a, &p).unwrap();
        prop_assert!((dv - dv.transpose()).amax() <= 1e-12 * dv.amax().max(1.0));
        let blocks = pair_blocks(a.basis, &dv);
        for (block, (pair, cov)) in blocks.iter().zip([(pa, ca), (pb, cb)]) {
            let d = pair_riccati_rhs(&cov, &pair, &p);
            let scale = d.v_x.abs().max(d.v_y.abs()).max(d.c.abs()).max(1.0);
            prop_assert!((block[(0, 0)] - d.v_x).abs() <= 1e-12 * scale);
            prop_assert!((block[(1, 1)] - d.v_y).abs() <= 1e-12 * scale);
            prop_assert!((block[(0, 1)] - d.c).abs() <= 1e-12 * scale);
        }
        // nothing couples the two pairs
        let mixed = dv - embed_pairs(a.basis, &blocks[0], &blocks[1]);
        prop_assert!(mixed.amax() <= 1e-12 * dv.amax().max(1.0));
    }

    #[test]
    fn newton_root_is_physical_and_stabilizing((chi, delta) in stable_drive(), p in params()) {
        let (a, b) = reduce_to_pairs(&DriveModel::ModelOne { chi, detuning: delta }, &p).unwrap();
        let k = p.conditioning_rate();
        for pair in [a, b] {
            let v = steady_algebraic(&pair, &p, None).unwrap();
            prop_assert!(v.v_x > 0.0 && v.v_y > 0.0);
            prop_assert!(v.determinant() >= 0.25 - 1e-9, "{v:?}");
            let closed: Matrix2<f64> = pair.drift_block() - v.as_matrix() * k;
            prop_assert!(closed.trace() < 0.0 && closed.determinant() > 0.0);
        }
    }

    #[test]
    fn closed_form_matches_newton((chi, delta) in stable_drive(), p in params()) {
        let (a, b) = reduce_to_pairs(&DriveModel::ModelOne { chi, detuning: delta }, &p).unwrap();
        let closed = separability(&a, &b, &p).unwrap();
        let va = steady_algebraic(&a, &p, None).unwrap().min_variance();
        let vb = steady_algebraic(&b, &p, None).unwrap().min_variance();
        prop_assert!(rel(closed.v_alpha_plus, va) <= 1e-6);
        prop_assert!(rel(closed.v_alpha_minus, vb) <= 1e-6);
        prop_assert!(rel(closed.s, 2.0 * (va * vb).sqrt()) <= 1e-6);
    }

    #[test]
    fn result_bookkeeping((chi, delta) in stable_drive(), p in params()) {
        let (a, b) = reduce_to_pairs(&DriveModel::ModelOne { chi, detuning: delta }, &p).unwrap();
        let r = separability(&a, &b, &p).unwrap();
        prop_assert!(rel(r.s, 2.0 * (r.v_alpha_plus * r.v_alpha_minus).sqrt()) <= 1e-12);
        prop_assert_eq!(r.entangled, r.s < 1.0);
        prop_assert_eq!(r.log_negativity.is_some(), r.s < 1.0);
        if let Some(e) = r.log_negativity {
            prop_assert!((e + r.s.ln()).abs() <= 1e-12);
        }
    }

    #[test]
    fn squeeze_angle_beats_every_sampled_angle(
        (chi, delta) in stable_drive(),
        p in params(),
        phase in 0.0..1.0f64,
    ) {
        prop_assume!(chi > 1e-3);
        let (a, b) = reduce_to_pairs(&DriveModel::ModelOne { chi, detuning: delta }, &p).unwrap();
        for pair in [a, b] {
            let cov = steady_algebraic(&pair, &p, None).unwrap();
            let alpha = squeeze_angle(&pair, &p).unwrap().angle;
            let best = rotated_variance(&cov, alpha);
            let tol = 1e-9 * cov.max_variance();
            for i in 0..1000 {
                let theta = PI * ((i as f64 + phase) / 1000.0 - 0.5);
                prop_assert!(best <= rotated_variance(&cov, theta) + tol);
            }
        }
    }

    #[test]
    fn asymmetric_damping_never_helps_on_figure_set(
        chi in prop::sample::select(vec![25.0, 50.0]),
        ratio in 1.0..4.0f64,
        log_mu in -2.0..3.0f64,
    ) {
        let mu = 10f64.powf(log_mu);
        let sym = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, mu);
        let mut asym = sym;
        asym.gamma1 = 2.0 * ratio / (1.0 + ratio);
        asym.gamma2 = 2.0 / (1.0 + ratio);
        // each curve sits at its own threshold, as in the bundled recipes
        let sym_drive = DriveModel::ModelTwo { chi, coupling: threshold_detuning(chi, 1.0).unwrap() };
        let coupling = threshold_detuning(chi + asym.damping_half_difference().abs(), 1.0).unwrap();
        let asym_drive = DriveModel::ModelTwo { chi, coupling };
        let (a, b) = reduce_to_pairs(&sym_drive, &sym).unwrap();
        let s_sym = separability(&a, &b, &sym).unwrap().s;
        let (a, b) = reduce_to_pairs(&asym_drive, &asym).unwrap();
        let s_asym = separability(&a, &b, &asym).unwrap().s;
        prop_assert!(s_asym >= s_sym - 1e-9, "{s_asym} < {s_sym}");
    }

    #[test]
    fn basis_transforms_are_orthogonal_and_symplectic(x in prop::array::uniform4(-10.0..10.0f64)) {
        let omega = symplectic_form_individual();
        for dir in [TransformDirection::IndividualToCollective, TransformDirection::IndividualToUV] {
            let t: Matrix4<f64> = transform_matrix(dir);
            prop_assert!((t * t.transpose() - Matrix4::identity()).amax() < 1e-14);
            let basis = match dir {
                TransformDirection::IndividualToUV => Basis::UV,
                _ => Basis::CollectiveXY,
            };
            prop_assert!((t * omega * t.transpose() - symplectic_form(basis)).amax() < 1e-14);
            let v = Vector4::from(x);
            let back = quadrature_transform(&quadrature_transform(&v, dir), dir.inverse());
            prop_assert!((back - v).amax() < 1e-13);
        }
    }

    #[test]
    fn threshold_matches_drift_eigenvalues(chi in 0.0..40.0f64, delta in -40.0..40.0f64) {
        let p = OscillatorPairParams::symmetric(1.0, 0.0, 1.0, 0.0);
        let (a, _) = reduce_to_pairs(&DriveModel::ModelOne { chi, detuning: delta }, &p).unwrap();
        let th = threshold(&a);
        prop_assert!(rel(th.chi_th, (1.0 + delta * delta).sqrt()) < 1e-14);
        let margin = (chi - th.chi_th).abs() / th.chi_th;
        prop_assume!(margin > 1e-9);
        prop_assert_eq!(th.stable, a.max_real_eigenvalue() < 0.0);
    }

    #[test]
    fn heisenberg_bound_holds_at_steady_state((chi, delta) in stable_drive(), p in params()) {
        let (a, b) = reduce_to_pairs(&DriveModel::ModelOne { chi, detuning: delta }, &p).unwrap();
        let va = steady_algebraic(&a, &p, None).unwrap();
        let vb = steady_algebraic(&b, &p, None).unwrap();
        let full = CovarianceMatrix4::from_pairs(Basis::CollectiveXY, &va, &vb);
        let (lo, _) = full.symplectic_eigenvalues();
        prop_assert!(lo >= 0.5 - 1e-9);
    }
}
