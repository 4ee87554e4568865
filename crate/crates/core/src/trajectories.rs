//! Monte Carlo conditional means, truth-plus-filter simulation, and the
//! lab-frame check of the rotating-wave approximation.
//!
//! Conditional means follow
//!
//! ```text
//! dm = A m dt + 2√(ημ) V dW
//! ```
//!
//! with four independent unit Wiener increments. Trajectory `i` draws its
//! noise from `ChaCha8Rng::seed_from_u64(seed)` switched to stream `i`, so
//! results do not depend on how trajectories are scheduled across threads.

use std::io::Write;

use nalgebra::{Matrix4, SVector, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reduce_to_pairs, Basis, DriftMatrix4, DriveModel, OscillatorPairParams};
use crate::ode::{Dopri5, OdeOptions};
use crate::riccati::{full_riccati_rhs, lyapunov_unconditional, spectral_radius, CovarianceMatrix4};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

/// Largest `dt · ρ(A)` accepted by the simulators.
pub const MAX_STEP_RATE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub duration: f64,
    pub n_traj: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Steps between recorded samples; `0` keeps only the endpoints.
    #[serde(default)]
    pub record_stride: usize,
    /// Worker threads; `0` uses the global pool.
    #[serde(default)]
    pub jobs: usize,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "duration {} must be at least dt {}",
                self.duration, self.dt
            )));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        ((self.duration / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Step actually taken, so that the last step lands on `duration`.
    pub fn effective_dt(&self) -> f64 {
        self.duration / self.n_steps() as f64
    }
}

/// `1e-3 / max(γ̄, ρ(A))`.
pub fn default_dt(drift: &DriftMatrix4, params: &OscillatorPairParams) -> f64 {
    1e-3 / params.gamma_mean().max(spectral_radius(&drift.matrix))
}

fn check_step(dt: f64, m: &Matrix4<f64>) -> Result<()> {
    let rate = dt * spectral_radius(m);
    if rate > MAX_STEP_RATE {
        return Err(Error::StepTooLarge(rate));
    }
    Ok(())
}

/// Covariance used to form the innovation gain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GainSchedule {
    /// Fixed steady-state covariance.
    Steady(CovarianceMatrix4),
    /// Covariance integrated alongside the means from this initial value.
    FromInitial(CovarianceMatrix4),
}

/// Mean, covariance and standard errors of an ensemble of 4-vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleStats {
    pub n: usize,
    pub mean: Vector4<f64>,
    /// Sample covariance with the `n - 1` denominator.
    pub covariance: Matrix4<f64>,
    pub mean_se: Vector4<f64>,
    /// Gaussian standard error of each covariance entry,
    /// `√((Σ_ii Σ_jj + Σ_ij²)/(n - 1))`.
    pub covariance_se: Matrix4<f64>,
}

impl EnsembleStats {
    /// Statistics accumulated in slice order.
    pub fn from_samples(samples: &[Vector4<f64>]) -> Self {
        let n = samples.len();
        let nf = n as f64;
        let mean = samples.iter().fold(Vector4::zeros(), |acc, x| acc + x) / nf;
        let mut covariance = Matrix4::zeros();
        for x in samples {
            let d = x - mean;
            covariance += d * d.transpose();
        }
        let denom = (n.max(2) - 1) as f64;
        covariance /= denom;
        let mean_se = covariance.diagonal().map(|v| (v / nf).sqrt());
        let covariance_se = Matrix4::from_fn(|i, j| {
            let s = &covariance;
            ((s[(i, i)] * s[(j, j)] + s[(i, j)] * s[(i, j)]) / denom).sqrt()
        });
        Self {
            n,
            mean,
            covariance,
            mean_se,
            covariance_se,
        }
    }
}

/// Output of [`simulate_conditional_means`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub basis: Basis,
    /// Times of the recorded samples (always includes `0` and `duration`).
    pub times: Vec<f64>,
    /// `paths[i][k]` is trajectory `i` at `times[k]`.
    pub paths: Vec<Vec<Vector4<f64>>>,
    /// Statistics of the final values.
    pub final_stats: EnsembleStats,
}

impl TrajectorySet {
    /// Long-format CSV: `traj_id,t,<basis labels>`, floats in shortest
    /// round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let labels = self.basis.labels();
        writeln!(w, "traj_id,t,{},{},{},{}", labels[0], labels[1], labels[2], labels[3])?;
        for (i, path) in self.paths.iter().enumerate() {
            for (t, x) in self.times.iter().zip(path) {
                writeln!(w, "{i},{t:?},{:?},{:?},{:?},{:?}", x[0], x[1], x[2], x[3])?;
            }
        }
        Ok(())
    }
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn normal4(rng: &mut ChaCha8Rng) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.sample(StandardNormal))
}

fn run_indexed<T, F>(n: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if jobs == 0 {
        return Ok((0..n).into_par_iter().map(&f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}

fn record_indices(n_steps: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = if stride == 0 {
        vec![0]
    } else {
        (0..n_steps).step_by(stride).collect()
    };
    idx.push(n_steps);
    idx
}

/// Per-step gain matrices `2√(ημ)·V_k`; a single entry for a steady gain.
fn gain_path(
    drift: &DriftMatrix4,
    schedule: &GainSchedule,
    params: &OscillatorPairParams,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<Matrix4<f64>>> {
    let scale = 2.0 * (params.efficiency * params.measurement_rate).sqrt();
    match schedule {
        GainSchedule::Steady(v) => {
            if v.basis != drift.basis {
                return Err(Error::BasisMismatch {
                    covariance: v.basis,
                    drift: drift.basis,
                });
            }
            Ok(vec![v.matrix * scale])
        }
        GainSchedule::FromInitial(v0) => {
            let mut v = *v0;
            let mut out = Vec::with_capacity(n_steps);
            let f = |m: &Matrix4<f64>| full_riccati_rhs(&CovarianceMatrix4::new(*m, v.basis), drift, params);
            for _ in 0..n_steps {
                out.push(v.matrix * scale);
                let m = v.matrix;
                let k1 = f(&m)?;
                let k2 = f(&(m + k1 * (0.5 * dt)))?;
                let k3 = f(&(m + k2 * (0.5 * dt)))?;
                let k4 = f(&(m + k3 * dt))?;
                v.matrix = m + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            }
            Ok(out)
        }
    }
}

/// Samples `cfg.n_traj` conditional-mean paths from `initial_mean`.
pub fn simulate_conditional_means(
    drift: &DriftMatrix4,
    gain: &GainSchedule,
    params: &OscillatorPairParams,
    initial_mean: &Vector4<f64>,
    cfg: &TrajectoryConfig,
) -> Result<TrajectorySet> {
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    let dt = cfg.effective_dt();
    check_step(dt, &drift.matrix)?;
    let gains = gain_path(drift, gain, params, dt, n_steps)?;
    let step_matrix = Matrix4::identity() + drift.matrix * dt;
    let sqrt_dt = dt.sqrt();
    let records = record_indices(n_steps, cfg.record_stride);
    let times: Vec<f64> = records.iter().map(|&k| k as f64 * dt).collect();
    let noisy = params.measurement_rate > 0.0 && params.efficiency > 0.0;

    let run = |i: usize| -> Vec<Vector4<f64>> {
        let mut rng = rng_for(cfg.seed, i);
        let mut m = *initial_mean;
        let mut out = Vec::with_capacity(records.len());
        let mut next = 0;
        for k in 0..=n_steps {
            if records[next] == k {
                out.push(m);
                next += 1;
                if k == n_steps {
                    break;
                }
            }
            let mut m_new = step_matrix * m;
            if noisy {
                let g = if gains.len() == 1 { &gains[0] } else { &gains[k] };
                m_new += g * normal4(&mut rng) * sqrt_dt;
            }
            m = m_new;
        }
        out
    };
    let paths = run_indexed(cfg.n_traj, cfg.jobs, run)?;
    let finals: Vec<Vector4<f64>> = paths.iter().map(|p| *p.last().expect("non-empty path")).collect();
    if let Some(bad) = finals.iter().find(|x| !x.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite(format!("trajectory reached {bad:?}")));
    }
    Ok(TrajectorySet {
        basis: drift.basis,
        times,
        paths,
        final_stats: EnsembleStats::from_samples(&finals),
    })
}

/// Estimation-quality summary from [`simulate_truth_and_filter`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterReport {
    pub basis: Basis,
    /// Time- and ensemble-averaged `(x - m)(x - m)ᵀ`.
    pub error_covariance: Matrix4<f64>,
    /// Standard error of each entry from per-trajectory batch means.
    pub error_covariance_se: Matrix4<f64>,
    /// Sample variance of the innovation increments divided by `dt`.
    pub innovation_variance_ratio: Vector4<f64>,
    /// Standard error of that ratio.
    pub innovation_variance_se: Vector4<f64>,
    /// Statistics of the final filtered means.
    pub filtered_stats: EnsembleStats,
    /// Statistics of the final true states.
    pub truth_stats: EnsembleStats,
    pub dt: f64,
}

/// Simulates the true quadratures, a measurement record
/// `dy = 2√(ημ)·x dt + dξ`, and the Kalman filter fed by it.
///
/// True states start from `N(0, V_cond)` and the filter from zero, so the
/// estimation error is stationary from the first step.
pub fn simulate_truth_and_filter(
    drift: &DriftMatrix4,
    v_cond: &CovarianceMatrix4,
    params: &OscillatorPairParams,
    cfg: &TrajectoryConfig,
) -> Result<FilterReport> {
    cfg.validate()?;
    if v_cond.basis != drift.basis {
        return Err(Error::BasisMismatch {
            covariance: v_cond.basis,
            drift: drift.basis,
        });
    }
    let n_steps = cfg.n_steps();
    let dt = cfg.effective_dt();
    let c = 2.0 * (params.efficiency * params.measurement_rate).sqrt();
    let gain = v_cond.matrix * c;
    let closed = drift.matrix - gain * c;
    check_step(dt, &drift.matrix)?;
    check_step(dt, &closed)?;
    let chol = v_cond
        .matrix
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("conditional covariance is not positive definite".into()))?
        .l();
    let step_matrix = Matrix4::identity() + drift.matrix * dt;
    let sqrt_dt = dt.sqrt();
    let proc_scale = (params.diffusion() * dt).sqrt();
    let cap = 1e12;

    struct One {
        err_avg: Matrix4<f64>,
        innov_sq: Vector4<f64>,
        truth: Vector4<f64>,
        filtered: Vector4<f64>,
        diverged: Option<f64>,
    }

    let run = |i: usize| -> One {
        let mut rng = rng_for(cfg.seed, i);
        let mut x = chol * normal4(&mut rng);
        let mut m = Vector4::zeros();
        let mut err_acc = Matrix4::zeros();
        let mut innov_sq = Vector4::zeros();
        for k in 0..n_steps {
            let w = normal4(&mut rng);
            let xi = normal4(&mut rng);
            let innov = (x - m) * (c * dt) + xi * sqrt_dt;
            innov_sq += innov.component_mul(&innov);
            let m_new = step_matrix * m + gain * innov;
            x = step_matrix * x + w * proc_scale;
            m = m_new;
            let e = x - m;
            err_acc += e * e.transpose();
            if k % 1024 == 0 && x.amax() > cap {
                return One {
                    err_avg: err_acc,
                    innov_sq,
                    truth: x,
                    filtered: m,
                    diverged: Some(k as f64 * dt),
                };
            }
        }
        One {
            err_avg: err_acc / n_steps as f64,
            innov_sq: innov_sq / (n_steps as f64 * dt),
            truth: x,
            filtered: m,
            diverged: None,
        }
    };
    let runs = run_indexed(cfg.n_traj, cfg.jobs, run)?;
    if let Some(r) = runs.iter().find(|r| r.diverged.is_some()) {
        return Err(Error::Diverged {
            t: r.diverged.unwrap_or(0.0),
            value: r.truth.amax(),
            cap,
        });
    }
    let n = runs.len() as f64;
    let denom = (runs.len().max(2) - 1) as f64;
    let err_mean = runs.iter().fold(Matrix4::zeros(), |a, r| a + r.err_avg) / n;
    let err_var = runs.iter().fold(Matrix4::zeros(), |a, r| {
        let d = r.err_avg - err_mean;
        a + d.component_mul(&d)
    }) / denom;
    let innov_mean = runs.iter().fold(Vector4::zeros(), |a, r| a + r.innov_sq) / n;
    let innov_var = runs.iter().fold(Vector4::zeros(), |a, r| {
        let d = r.innov_sq - innov_mean;
        a + d.component_mul(&d)
    }) / denom;
    let truth: Vec<Vector4<f64>> = runs.iter().map(|r| r.truth).collect();
    let filtered: Vec<Vector4<f64>> = runs.iter().map(|r| r.filtered).collect();
    Ok(FilterReport {
        basis: drift.basis,
        error_covariance: err_mean,
        error_covariance_se: err_var.map(|v| (v / n).sqrt()),
        innovation_variance_ratio: innov_mean,
        innovation_variance_se: innov_var.map(|v| (v / n).sqrt()),
        filtered_stats: EnsembleStats::from_samples(&filtered),
        truth_stats: EnsembleStats::from_samples(&truth),
        dt,
    })
}

/// Lowest mechanical frequency accepted by [`labframe_rwa_check`]:
/// twenty times the largest rotating-frame rate.
pub fn rwa_frequency_requirement(drive: &DriveModel, params: &OscillatorPairParams) -> f64 {
    20.0 * drive
        .chi()
        .abs()
        .max(drive.detuning().abs())
        .max(params.gamma1)
        .max(params.gamma2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabFrameConfig {
    /// Total integration time; the second half is averaged.
    pub duration: f64,
    pub rtol: f64,
}

impl Default for LabFrameConfig {
    fn default() -> Self {
        Self {
            duration: 20.0,
            rtol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabFrameReport {
    /// Demodulated lab-frame covariance averaged over the second half.
    pub labframe: CovarianceMatrix4,
    /// Rotating-frame Lyapunov steady state.
    pub rotating: CovarianceMatrix4,
    /// `max |ΔV_ij| / √(V_ii V_jj)`.
    pub deviation: f64,
    pub omega_m: f64,
    pub accepted_steps: usize,
}

/// Lab-frame drift for individual `(x1, p1, x2, p2)` at time `t`.
fn lab_drift(drive: &DriveModel, params: &OscillatorPairParams, omega: f64, t: f64) -> Matrix4<f64> {
    let (g1, g2) = (params.gamma1, params.gamma2);
    let mut m = Matrix4::new(
        -g1, omega, 0.0, 0.0, //
        -omega, -g1, 0.0, 0.0, //
        0.0, 0.0, -g2, omega, //
        0.0, 0.0, -omega, -g2,
    );
    match *drive {
        DriveModel::ModelOne { chi, detuning } => {
            let k = 4.0 * chi * (2.0 * (omega - detuning) * t).cos();
            m[(1, 2)] -= k;
            m[(3, 0)] -= k;
        }
        DriveModel::ModelTwo { chi, coupling } => {
            let k = 4.0 * chi * (2.0 * omega * t).sin();
            m[(1, 0)] -= k;
            m[(3, 2)] -= k;
            m[(1, 2)] -= 2.0 * coupling;
            m[(3, 0)] -= 2.0 * coupling;
        }
    }
    m
}

/// Map from lab `(x1, p1, x2, p2)` to rotating `(X1, Y1, X2, Y2)`.
fn demodulation(drive: &DriveModel, omega: f64, t: f64) -> Matrix4<f64> {
    let (theta, flip) = match *drive {
        DriveModel::ModelOne { detuning, .. } => ((omega - detuning) * t, -1.0),
        DriveModel::ModelTwo { .. } => (omega * t, 1.0),
    };
    let (s, c) = theta.sin_cos();
    Matrix4::new(
        c, -s, 0.0, 0.0, //
        flip * s, flip * c, 0.0, 0.0, //
        0.0, 0.0, c, -s, //
        0.0, 0.0, flip * s, flip * c,
    )
}

/// Integrates the lab-frame covariance of both oscillators with `μ = 0`,
/// demodulates it, and compares its late-time average with the
/// rotating-frame Lyapunov solution.
pub fn labframe_rwa_check(
    drive: &DriveModel,
    params: &OscillatorPairParams,
    cfg: &LabFrameConfig,
) -> Result<LabFrameReport> {
    params.validate()?;
    drive.validate()?;
    if params.measurement_rate != 0.0 {
        return Err(Error::InvalidParameter("the lab-frame check is unconditional; set μ = 0".into()));
    }
    let omega = params
        .mech_frequency
        .ok_or_else(|| Error::InvalidParameter("mechanical frequency is required".into()))?;
    let required = rwa_frequency_requirement(drive, params);
    if omega < required {
        return Err(Error::FrequencyTooLow { omega_m: omega, required });
    }
    // rotating-frame target; pair reduction also rejects unsupported asymmetry
    reduce_to_pairs(drive, params)?;
    let drift = crate::model::drift_matrix(drive, params)?;
    let rotating = lyapunov_unconditional(&drift, params)?;

    let n = params.bath_occupation + 0.5;
    let q = Matrix4::from_diagonal(&Vector4::new(
        2.0 * params.gamma1 * n,
        2.0 * params.gamma1 * n,
        2.0 * params.gamma2 * n,
        2.0 * params.gamma2 * n,
    ));
    let t_avg = 0.5 * cfg.duration;
    let make_rhs = |averaging: bool| {
        move |t: f64, y: &SVector<f64, 32>| {
            let p = Matrix4::from_column_slice(&y.as_slice()[..16]);
            let a = lab_drift(drive, params, omega, t);
            let ap = a * p;
            let dp = ap + ap.transpose() + q;
            let mut out = SVector::<f64, 32>::zeros();
            out.as_mut_slice()[..16].copy_from_slice(dp.as_slice());
            if averaging {
                let r = demodulation(drive, omega, t);
                let rp = r * p * r.transpose();
                out.as_mut_slice()[16..].copy_from_slice(rp.as_slice());
            }
            out
        }
    };
    let mut y = SVector::<f64, 32>::zeros();
    let thermal = Matrix4::<f64>::identity() * n;
    y.as_mut_slice()[..16].copy_from_slice(thermal.as_slice());
    let opts = OdeOptions {
        rtol: cfg.rtol,
        atol: cfg.rtol * 1e-3,
        h_max: 0.5 / omega,
        ..OdeOptions::default()
    };
    let cap = 1e12;
    let valid = |y: &SVector<f64, 32>| y.iter().all(|v| v.is_finite());
    let mut accepted_steps = 0;
    for (t0, t_end, averaging) in [(0.0, t_avg, false), (t_avg, cfg.duration, true)] {
        let rhs = make_rhs(averaging);
        let mut ode = Dopri5::new(&rhs, t0, y, opts);
        while ode.t() < t_end {
            ode.step(&rhs, &valid, t_end)?;
            let big = ode.y().amax();
            if big > cap {
                return Err(Error::Diverged { t: ode.t(), value: big, cap });
            }
        }
        accepted_steps += ode.accepted_steps();
        y = *ode.y();
    }
    let acc = Matrix4::from_column_slice(&y.as_slice()[16..]) / (cfg.duration - t_avg);
    let ind = (acc + acc.transpose()) * 0.5;
    let to_basis = drift.basis.from_individual();
    let lab = to_basis * ind * to_basis.transpose();
    let target = rotating.matrix;
    let mut deviation = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let scale = (target[(i, i)] * target[(j, j)]).sqrt();
            deviation = deviation.max((lab[(i, j)] - target[(i, j)]).abs() / scale);
        }
    }
    Ok(LabFrameReport {
        labframe: CovarianceMatrix4::new(lab, drift.basis),
        rotating,
        deviation,
        omega_m: omega,
        accepted_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::drift_matrix;

    fn params(n: f64, mu: f64) -> OscillatorPairParams {
        OscillatorPairParams::symmetric(1.0, n, 1.0, mu)
    }

    fn cfg(dt: f64, duration: f64, n_traj: usize) -> TrajectoryConfig {
        TrajectoryConfig {
            dt,
            duration,
            n_traj,
            seed: 7,
            scheme: Scheme::EulerMaruyama,
            record_stride: 0,
            jobs: 0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 1.0, 1).validate().is_err());
        assert!(cfg(0.1, 0.01, 1).validate().is_err());
        assert!(cfg(0.1, 1.0, 0).validate().is_err());
        assert!(cfg(0.1, 1.0, 1).validate().is_ok());
    }

    #[test]
    fn effective_dt_lands_on_duration() {
        let c = cfg(0.3, 1.0, 1);
        assert_eq!(c.n_steps(), 4);
        assert!((c.effective_dt() * 4.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn step_too_large_is_rejected() {
        let p = params(1.0, 1.0);
        let d = drift_matrix(&DriveModel::ModelOne { chi: 5.0, detuning: 10.0 }, &p).unwrap();
        let g = GainSchedule::Steady(CovarianceMatrix4::isotropic(1.0, d.basis));
        let err = simulate_conditional_means(&d, &g, &p, &Vector4::zeros(), &cfg(0.1, 1.0, 1)).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge(_)));
    }

    #[test]
    fn noise_free_means_decay_exponentially() {
        let p = params(1.0, 0.0);
        let d = drift_matrix(&DriveModel::ModelOne { chi: 0.0, detuning: 0.0 }, &p).unwrap();
        let g = GainSchedule::Steady(CovarianceMatrix4::isotropic(1.5, d.basis));
        let m0 = Vector4::new(1.0, -2.0, 0.5, 0.0);
        let set = simulate_conditional_means(&d, &g, &p, &m0, &cfg(1e-4, 1.0, 2)).unwrap();
        let last = set.paths[0].last().unwrap();
        assert!((last - m0 * (-1.0f64).exp()).amax() < 1e-4);
        assert_eq!(set.paths[0], set.paths[1]);
    }

    #[test]
    fn same_seed_same_paths_across_thread_counts() {
        let p = params(1.0, 2.0);
        let d = drift_matrix(&DriveModel::ModelOne { chi: 0.5, detuning: 1.0 }, &p).unwrap();
        let g = GainSchedule::Steady(CovarianceMatrix4::isotropic(1.0, d.basis));
        let mut c = cfg(1e-2, 1.0, 16);
        c.record_stride = 10;
        c.jobs = 1;
        let a = simulate_conditional_means(&d, &g, &p, &Vector4::zeros(), &c).unwrap();
        c.jobs = 4;
        let b = simulate_conditional_means(&d, &g, &p, &Vector4::zeros(), &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times.len(), 11);
        assert_ne!(a.paths[0], a.paths[1]);
    }

    #[test]
    fn stats_of_known_samples() {
        let s = [Vector4::new(1.0, 0.0, 0.0, 0.0), Vector4::new(-1.0, 0.0, 0.0, 0.0)];
        let st = EnsembleStats::from_samples(&s);
        assert_eq!(st.mean, Vector4::zeros());
        assert_eq!(st.covariance[(0, 0)], 2.0);
        assert_eq!(st.covariance[(1, 1)], 0.0);
    }

    #[test]
    fn csv_header_uses_basis_labels() {
        let set = TrajectorySet {
            basis: Basis::UV,
            times: vec![0.0],
            paths: vec![vec![Vector4::new(1.0, 2.0, 3.0, 4.0)]],
            final_stats: EnsembleStats::from_samples(&[Vector4::zeros()]),
        };
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "traj_id,t,U1,U2,V1,V2\n0,0.0,1.0,2.0,3.0,4.0\n");
    }

    #[test]
    fn frequency_gate() {
        let p = params(1.0, 0.0).with_mech_frequency(50.0);
        let drive = DriveModel::ModelOne { chi: 5.0, detuning: 5.0 };
        let err = labframe_rwa_check(&drive, &p, &LabFrameConfig::default()).unwrap_err();
        assert!(matches!(err, Error::FrequencyTooLow { .. }));
    }

    #[test]
    fn labframe_undriven_is_thermal() {
        let p = params(2.0, 0.0).with_mech_frequency(100.0);
        let r = labframe_rwa_check(
            &DriveModel::ModelTwo { chi: 0.0, coupling: 0.0 },
            &p,
            &LabFrameConfig::default(),
        )
        .unwrap();
        assert!(r.deviation < 1e-6, "{}", r.deviation);
    }
}
