//! Monte Carlo behaviour of the conditional-mean and filter simulators.

use nalgebra::{Matrix4, Vector4};

use paramp_entangle::closedform::squeeze_angle;
use paramp_entangle::model::threshold_detuning;
use paramp_entangle::riccati::{lyapunov_unconditional, rotated_variance, steady_algebraic};
use paramp_entangle::trajectories::{
    default_dt, simulate_conditional_means, simulate_truth_and_filter, FilterReport, GainSchedule, Scheme,
    TrajectoryConfig,
};
use paramp_entangle::{drift_matrix, reduce_to_pairs, CovarianceMatrix4, DriveModel, Error, OscillatorPairParams};

fn config(dt: f64, duration: f64, n_traj: usize, seed: u64) -> TrajectoryConfig {
    TrajectoryConfig {
        dt,
        duration,
        n_traj,
        seed,
        scheme: Scheme::EulerMaruyama,
        record_stride: 0,
        jobs: 0,
    }
}

fn conditional(drive: &DriveModel, p: &OscillatorPairParams) -> CovarianceMatrix4 {
    let (a, b) = reduce_to_pairs(drive, p).unwrap();
    CovarianceMatrix4::from_pairs(
        drive.basis(),
        &steady_algebraic(&a, p, None).unwrap(),
        &steady_algebraic(&b, p, None).unwrap(),
    )
}

fn within(est: &Matrix4<f64>, se: &Matrix4<f64>, target: &Matrix4<f64>, k: f64) -> bool {
    (0..4).all(|i| (0..4).all(|j| (est[(i, j)] - target[(i, j)]).abs() <= k * se[(i, j)] + 1e-12))
}

/// Innovation increments carry `4ημ E_ii dt²` on top of `dt`.
fn assert_innovations_white(r: &FilterReport, p: &OscillatorPairParams) {
    let c2 = 4.0 * p.efficiency * p.measurement_rate;
    for i in 0..4 {
        let expected = 1.0 + c2 * r.error_covariance[(i, i)] * r.dt;
        let z = (r.innovation_variance_ratio[i] - expected) / r.innovation_variance_se[i];
        assert!(z.abs() < 4.0, "innovation ratio {} vs {expected} (se {})", r.innovation_variance_ratio[i], r.innovation_variance_se[i]);
    }
}

#[test]
fn unmeasured_filter_error_is_unconditional_covariance() {
    let p = OscillatorPairParams::symmetric(1.0, 1.0, 1.0, 0.0);
    let drive = DriveModel::ModelOne { chi: 0.5, detuning: 0.5 };
    let drift = drift_matrix(&drive, &p).unwrap();
    let u = lyapunov_unconditional(&drift, &p).unwrap();
    assert!((conditional(&drive, &p).matrix - u.matrix).amax() < 1e-10);
    let r = simulate_truth_and_filter(&drift, &u, &p, &config(2e-3, 4.0, 400, 11)).unwrap();
    assert!(within(&r.error_covariance, &r.error_covariance_se, &u.matrix, 4.0), "{:?}", r.error_covariance);
}

#[test]
fn vacuum_unit_measurement_error_is_half() {
    let p = OscillatorPairParams::symmetric(1.0, 0.0, 1.0, 1.0);
    let drive = DriveModel::ModelOne { chi: 0.0, detuning: 0.0 };
    let drift = drift_matrix(&drive, &p).unwrap();
    let v = conditional(&drive, &p);
    assert!((v.matrix - Matrix4::identity() * 0.5).amax() < 1e-12);
    let r = simulate_truth_and_filter(&drift, &v, &p, &config(2e-3, 4.0, 400, 5)).unwrap();
    assert!(within(&r.error_covariance, &r.error_covariance_se, &v.matrix, 4.0), "{:?}", r.error_covariance);
    assert_innovations_white(&r, &p);
}

#[test]
fn strong_drive_filter_beats_zero_point_on_optimal_quadrature() {
    let p = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 6.0);
    let drive = DriveModel::ModelOne {
        chi: 25.0,
        detuning: 624f64.sqrt(),
    };
    let drift = drift_matrix(&drive, &p).unwrap();
    let v = conditional(&drive, &p);
    let dt = default_dt(&drift, &p);
    let r = simulate_truth_and_filter(&drift, &v, &p, &config(dt, 1.0, 200, 3)).unwrap();
    let (a, b) = reduce_to_pairs(&drive, &p).unwrap();
    let err = CovarianceMatrix4::new(r.error_covariance, drift.basis).pairs();
    for ((pair, e), model) in [a, b].iter().zip(err).zip(v.pairs()) {
        let alpha = squeeze_angle(pair, &p).unwrap().angle;
        let measured = rotated_variance(&e, alpha);
        let predicted = rotated_variance(&model, alpha);
        assert!(measured < 0.5, "{measured}");
        assert!((measured - predicted).abs() < 0.05 * predicted, "{measured} vs {predicted}");
    }
    assert_innovations_white(&r, &p);
}

#[test]
fn law_of_total_variance_small_ensemble() {
    let p = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 6.0);
    let drive = DriveModel::ModelOne {
        chi: 5.0,
        detuning: threshold_detuning(10.0, 1.0).unwrap(),
    };
    let drift = drift_matrix(&drive, &p).unwrap();
    let v = conditional(&drive, &p);
    let u = lyapunov_unconditional(&drift, &p).unwrap();
    let dt = default_dt(&drift, &p) * 5.0;
    let set = simulate_conditional_means(&drift, &GainSchedule::Steady(v), &p, &Vector4::zeros(), &config(dt, 8.0, 2000, 99))
        .unwrap();
    let st = set.final_stats;
    let resid = st.covariance + v.matrix - u.matrix;
    let z = resid.component_div(&st.covariance_se);
    assert!(z.amax() < 4.0, "{z:?}");
}

#[test]
fn noiseless_means_follow_matrix_exponential_to_first_order() {
    let p = OscillatorPairParams::symmetric(1.0, 2.0, 1.0, 0.0);
    let drive = DriveModel::ModelTwo { chi: 0.6, coupling: 1.5 };
    let drift = drift_matrix(&drive, &p).unwrap();
    let m0 = Vector4::new(1.0, -0.5, 0.3, 2.0);
    let exact = (drift.matrix * 2.0).exp() * m0;
    let gain = GainSchedule::Steady(lyapunov_unconditional(&drift, &p).unwrap());
    let err = |dt: f64| {
        let s = simulate_conditional_means(&drift, &gain, &p, &m0, &config(dt, 2.0, 3, 1)).unwrap();
        // without measurement every path is the same deterministic one
        assert!(s.paths.iter().all(|x| x == &s.paths[0]));
        (s.paths[0].last().unwrap() - exact).amax()
    };
    let (e1, e2) = (err(1e-3), err(5e-4));
    assert!(e1 < 1e-2, "{e1}");
    let order = (e1 / e2).log2();
    assert!((order - 1.0).abs() < 0.05, "{order}");
}

#[test]
fn halving_default_step_changes_moments_within_noise() {
    let p = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 6.0);
    let drive = DriveModel::ModelOne {
        chi: 5.0,
        detuning: threshold_detuning(10.0, 1.0).unwrap(),
    };
    let drift = drift_matrix(&drive, &p).unwrap();
    let v = conditional(&drive, &p);
    let dt = default_dt(&drift, &p);
    let m0 = Vector4::new(1.0, 0.0, -1.0, 0.5);
    let run = |dt: f64, seed: u64| {
        simulate_conditional_means(&drift, &GainSchedule::Steady(v), &p, &m0, &config(dt, 0.5, 10_000, seed))
            .unwrap()
            .final_stats
    };
    let (coarse, fine) = (run(dt, 1), run(dt / 2.0, 2));
    let se = (coarse.covariance_se.component_mul(&coarse.covariance_se) + fine.covariance_se.component_mul(&fine.covariance_se))
        .map(f64::sqrt);
    assert!(within(&coarse.covariance, &se, &fine.covariance, 3.0));
    let mse = (coarse.mean_se.component_mul(&coarse.mean_se) + fine.mean_se.component_mul(&fine.mean_se)).map(f64::sqrt);
    for i in 0..4 {
        assert!((coarse.mean[i] - fine.mean[i]).abs() <= 3.0 * mse[i]);
    }
}

#[test]
fn seeded_runs_are_reproducible_across_thread_counts() {
    let p = OscillatorPairParams::symmetric(1.0, 1.0, 0.5, 2.0);
    let drive = DriveModel::ModelTwo { chi: 1.0, coupling: 1.0 };
    let drift = drift_matrix(&drive, &p).unwrap();
    let v = conditional(&drive, &p);
    let mut cfg = config(1e-3, 0.5, 64, 42);
    cfg.record_stride = 50;
    let run = |jobs: usize| {
        let mut c = cfg;
        c.jobs = jobs;
        simulate_conditional_means(&drift, &GainSchedule::Steady(v), &p, &Vector4::zeros(), &c).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(1));
    assert_eq!(one, run(4));
    assert_eq!(one.times.len(), 11);
    let mut other = cfg;
    other.seed = 43;
    let changed = simulate_conditional_means(&drift, &GainSchedule::Steady(v), &p, &Vector4::zeros(), &other).unwrap();
    assert_ne!(one.paths, changed.paths);
}

#[test]
fn transient_gain_approaches_steady_gain() {
    let p = OscillatorPairParams::symmetric(1.0, 0.0, 1.0, 1.0);
    let drive = DriveModel::ModelOne { chi: 0.5, detuning: 1.0 };
    let drift = drift_matrix(&drive, &p).unwrap();
    let v = conditional(&drive, &p);
    let start = CovarianceMatrix4::isotropic(paramp_entangle::v0(&p), drift.basis);
    let cfg = config(1e-3, 6.0, 2000, 8);
    let steady = simulate_conditional_means(&drift, &GainSchedule::Steady(v), &p, &Vector4::zeros(), &cfg).unwrap();
    let transient = simulate_conditional_means(&drift, &GainSchedule::FromInitial(start), &p, &Vector4::zeros(), &cfg).unwrap();
    let (a, b) = (steady.final_stats, transient.final_stats);
    let se = (a.covariance_se.component_mul(&a.covariance_se) + b.covariance_se.component_mul(&b.covariance_se)).map(f64::sqrt);
    // the transient gain is larger early on, which only matters near t = 0
    assert!(within(&a.covariance, &se, &b.covariance, 4.0));
}

#[test]
fn oversized_step_is_rejected() {
    let p = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 6.0);
    let drive = DriveModel::ModelOne {
        chi: 25.0,
        detuning: 624f64.sqrt(),
    };
    let drift = drift_matrix(&drive, &p).unwrap();
    let v = conditional(&drive, &p);
    let r = simulate_conditional_means(&drift, &GainSchedule::Steady(v), &p, &Vector4::zeros(), &config(0.2, 1.0, 2, 0));
    assert!(matches!(r, Err(Error::StepTooLarge(_))));
    let r = simulate_truth_and_filter(&drift, &v, &p, &config(0.2, 1.0, 2, 0));
    assert!(matches!(r, Err(Error::StepTooLarge(_))));
    let bad = CovarianceMatrix4::isotropic(1.0, paramp_entangle::Basis::UV);
    assert!(matches!(
        simulate_truth_and_filter(&drift, &bad, &p, &config(1e-4, 1.0, 2, 0)),
        Err(Error::BasisMismatch { .. })
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    let p = OscillatorPairParams::symmetric(1.0, 0.0, 1.0, 1.0);
    let drive = DriveModel::ModelOne { chi: 0.0, detuning: 0.0 };
    let drift = drift_matrix(&drive, &p).unwrap();
    let gain = GainSchedule::Steady(CovarianceMatrix4::isotropic(0.5, drift.basis));
    for cfg in [config(0.0, 1.0, 1, 0), config(1e-3, 1e-4, 1, 0), config(1e-3, 1.0, 0, 0)] {
        let r = simulate_conditional_means(&drift, &gain, &p, &Vector4::zeros(), &cfg);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
