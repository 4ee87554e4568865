//! Conditional-mean ensemble and the law of total variance.

use nalgebra::Vector4;
use paramp_entangle::riccati::{lyapunov_unconditional, steady_algebraic};
use paramp_entangle::trajectories::{default_dt, simulate_conditional_means, GainSchedule, Scheme, TrajectoryConfig};
use paramp_entangle::{drift_matrix, reduce_to_pairs, CovarianceMatrix4, DriveModel, OscillatorPairParams};

fn main() -> paramp_entangle::Result<()> {
    let params = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 6.0);
    let drive = DriveModel::ModelOne {
        chi: 5.0,
        detuning: 99f64.sqrt(),
    };
    let drift = drift_matrix(&drive, &params)?;
    let (a, b) = reduce_to_pairs(&drive, &params)?;
    let v_cond = CovarianceMatrix4::from_pairs(
        drift.basis,
        &steady_algebraic(&a, &params, None)?,
        &steady_algebraic(&b, &params, None)?,
    );
    let v_uncond = lyapunov_unconditional(&drift, &params)?;
    let cfg = TrajectoryConfig {
        dt: default_dt(&drift, &params),
        duration: 10.0,
        n_traj: 2000,
        seed: 1,
        scheme: Scheme::EulerMaruyama,
        record_stride: 0,
        jobs: 0,
    };
    let set = simulate_conditional_means(&drift, &GainSchedule::Steady(v_cond), &params, &Vector4::zeros(), &cfg)?;
    let st = &set.final_stats;
    let z = (st.covariance + v_cond.matrix - v_uncond.matrix).component_div(&st.covariance_se);
    println!("basis {:?}", drift.basis.labels());
    println!("Var(means) + V_cond - V_uncond, in standard errors:{z:.2}");
    println!("largest |z| = {:.2}", z.amax());
    Ok(())
}
