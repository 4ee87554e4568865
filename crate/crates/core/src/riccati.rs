//! Conditional covariance evolution.
//!
//! Each quadrature pair carries three second moments `(V_X, V_Y, C)` that
//! obey a closed Riccati system; the same dynamics in matrix form is
//!
//! ```text
//! dV/dt = A V + V Aᵀ + 2γ̄V₀·I - 4ημ V²
//! ```
//!
//! which reduces exactly to the pair equations when `V` is block diagonal.
//! Steady states are found three ways: by integrating the flow
//! ([`integrate_pair_to_steady`], [`integrate_full_to_steady`]), by Newton
//! iteration on the pair right-hand side ([`steady_algebraic`]), and for
//! `μ = 0` by a direct Lyapunov solve ([`lyapunov_unconditional`]).

use nalgebra::{Matrix2, Matrix3, Matrix4, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    pair_blocks, threshold, v0, Basis, DriftMatrix4, OscillatorPairParams, PairSubsystem,
};
use crate::ode::{Dopri5, OdeOptions};

/// Second moments of one quadrature pair, in zero-point units (vacuum = 1/2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCovariance {
    pub v_x: f64,
    pub v_y: f64,
    /// Symmetrized cross-covariance `½⟨XY + YX⟩`.
    pub c: f64,
}

impl PairCovariance {
    pub fn new(v_x: f64, v_y: f64, c: f64) -> Self {
        Self { v_x, v_y, c }
    }

    pub fn isotropic(v: f64) -> Self {
        Self::new(v, v, 0.0)
    }

    /// `V_X V_Y - C²`, bounded below by 1/4 for a physical state.
    pub fn determinant(&self) -> f64 {
        self.v_x * self.v_y - self.c * self.c
    }

    pub fn as_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.v_x, self.c, self.c, self.v_y)
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Self::new(m[(0, 0)], m[(1, 1)], 0.5 * (m[(0, 1)] + m[(1, 0)]))
    }

    /// Smallest variance over all rotated quadratures.
    pub fn min_variance(&self) -> f64 {
        let mean = 0.5 * (self.v_x + self.v_y);
        let half_diff = 0.5 * (self.v_x - self.v_y);
        let r = half_diff.hypot(self.c);
        // mean - r loses precision when strongly squeezed; use det / λmax
        let det = self.determinant();
        det / (mean + r)
    }

    pub fn max_variance(&self) -> f64 {
        let half_diff = 0.5 * (self.v_x - self.v_y);
        0.5 * (self.v_x + self.v_y) + half_diff.hypot(self.c)
    }

    pub fn is_finite(&self) -> bool {
        self.v_x.is_finite() && self.v_y.is_finite() && self.c.is_finite()
    }

    fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.v_x, self.v_y, self.c)
    }

    fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Symmetric 4×4 covariance with its basis tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceMatrix4 {
    pub matrix: Matrix4<f64>,
    pub basis: Basis,
}

impl CovarianceMatrix4 {
    pub fn new(matrix: Matrix4<f64>, basis: Basis) -> Self {
        Self { matrix, basis }
    }

    pub fn isotropic(v: f64, basis: Basis) -> Self {
        Self::new(Matrix4::identity() * v, basis)
    }

    /// Block-diagonal covariance assembled from two pair covariances.
    pub fn from_pairs(basis: Basis, first: &PairCovariance, second: &PairCovariance) -> Self {
        Self::new(
            crate::model::embed_pairs(basis, &first.as_matrix(), &second.as_matrix()),
            basis,
        )
    }

    pub fn pairs(&self) -> [PairCovariance; 2] {
        pair_blocks(self.basis, &self.matrix).map(|b| PairCovariance::from_matrix(&b))
    }

    /// Both symplectic eigenvalues `(ν₋, ν₊)`; a physical state has `ν₋ ≥ 1/2`.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let [(q1, p1), (q2, p2)] = self.basis.conjugate_indices();
        let m = &self.matrix;
        let det2 = |a: usize, b: usize, c: usize, d: usize| m[(a, c)] * m[(b, d)] - m[(a, d)] * m[(b, c)];
        let det_a = det2(q1, p1, q1, p1);
        let det_b = det2(q2, p2, q2, p2);
        let det_c = det2(q1, p1, q2, p2);
        let delta = det_a + det_b + 2.0 * det_c;
        let det = m.determinant();
        let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
        let lo = 0.5 * (delta - disc);
        let hi = 0.5 * (delta + disc);
        // lo = det / hi is better conditioned
        let lo = if hi > 0.0 { det / hi } else { lo };
        (lo.max(0.0).sqrt(), hi.max(0.0).sqrt())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.matrix - self.matrix.transpose()).amax() <= tol
    }
}

/// Time derivative of a pair's second moments.
///
/// ```text
/// dV_X/dt = -2γV_X + 2(sχ - δ)C + 2γV₀ - 4ημ(V_X² + C²)
/// dV_Y/dt = -2γV_Y + 2(sχ + δ)C + 2γV₀ - 4ημ(V_Y² + C²)
/// dC/dt   = -2γC + δ(V_X - V_Y) + sχ(V_X + V_Y) - 4ημ C(V_X + V_Y)
/// ```
pub fn pair_riccati_rhs(
    cov: &PairCovariance,
    pair: &PairSubsystem,
    params: &OscillatorPairParams,
) -> PairCovariance {
    let g = pair.gamma_mean;
    let sc = pair.label.sign() * pair.chi_eff;
    let d = pair.delta_eff;
    let diff = params.diffusion();
    let k = params.conditioning_rate();
    let PairCovariance { v_x, v_y, c } = *cov;
    PairCovariance {
        v_x: -2.0 * g * v_x + 2.0 * (sc - d) * c + diff - k * (v_x * v_x + c * c),
        v_y: -2.0 * g * v_y + 2.0 * (sc + d) * c + diff - k * (v_y * v_y + c * c),
        c: -2.0 * g * c + d * (v_x - v_y) + sc * (v_x + v_y) - k * c * (v_x + v_y),
    }
}

/// Matrix form `A V + V Aᵀ + 2γ̄V₀·I - 4ημ V²`.
pub fn full_riccati_rhs(
    cov: &CovarianceMatrix4,
    drift: &DriftMatrix4,
    params: &OscillatorPairParams,
) -> Result<Matrix4<f64>> {
    if cov.basis != drift.basis {
        return Err(Error::BasisMismatch {
            covariance: cov.basis,
            drift: drift.basis,
        });
    }
    Ok(full_rhs_matrix(&cov.matrix, &drift.matrix, params.diffusion(), params.conditioning_rate()))
}

fn full_rhs_matrix(v: &Matrix4<f64>, a: &Matrix4<f64>, diffusion: f64, k: f64) -> Matrix4<f64> {
    let av = a * v;
    let mut out = av + av.transpose() - (v * v) * k;
    for i in 0..4 {
        out[(i, i)] += diffusion;
    }
    // exact symmetry regardless of rounding in the products
    (out + out.transpose()) * 0.5
}

/// Controls for the steady-state integrators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyOptions {
    /// Stop when `max|dV/dt| < rel_tol · max|V| · γ̄`.
    pub rel_tol: f64,
    /// Integration horizon; `None` uses [`default_t_max`].
    pub t_max: Option<f64>,
    /// Any entry beyond this magnitude is reported as divergence.
    pub divergence_cap: f64,
    /// Slack on the uncertainty bound checked at every accepted step.
    pub heisenberg_tol: f64,
    pub ode: OdeOptions,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            t_max: None,
            divergence_cap: 1e12,
            heisenberg_tol: 1e-9,
            ode: OdeOptions {
                rtol: 1e-13,
                atol: 1e-16,
                ..OdeOptions::default()
            },
        }
    }
}

/// What an integration to steady state produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyReport<T> {
    pub state: T,
    /// Time at which the stopping criterion was met.
    pub t_converged: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Smallest `V_X V_Y - C²` over every accepted step (pair flows), or the
    /// smallest squared symplectic eigenvalue (full flows).
    pub min_uncertainty: f64,
}

/// `50/γ̄` stretched by `1/|1 - χ/χ_th|` of the pair closest to threshold,
/// with the stretch capped at `1e4`.
pub fn default_t_max(pairs: &[PairSubsystem]) -> f64 {
    let mut stretch = 1.0f64;
    let mut gamma = f64::INFINITY;
    for p in pairs {
        let th = threshold(p);
        let gap = (1.0 - p.chi_eff.abs() / th.chi_th).abs();
        stretch = stretch.max(if gap > 0.0 { 1.0 / gap } else { 1e4 });
        gamma = gamma.min(p.gamma_mean);
    }
    50.0 / gamma * stretch.min(1e4)
}

/// Generic driver: integrate `rhs` until the scaled derivative falls below
/// `opts.rel_tol`.
pub fn integrate_to_steady<const N: usize, F, V, U>(
    rhs: F,
    init: SVector<f64, N>,
    valid: V,
    uncertainty: U,
    rate_scale: f64,
    t_max: f64,
    opts: &SteadyOptions,
) -> Result<SteadyReport<SVector<f64, N>>>
where
    F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
    V: Fn(&SVector<f64, N>) -> bool,
    U: Fn(&SVector<f64, N>) -> f64,
{
    let cap = opts.divergence_cap;
    let bounded = |y: &SVector<f64, N>| y.iter().all(|x| x.is_finite());
    let accept = |y: &SVector<f64, N>| bounded(y) && (y.amax() > cap || valid(y));
    let mut ode = Dopri5::new(&rhs, 0.0, init, opts.ode);
    let mut min_unc = uncertainty(&init);
    let scaled_residual =
        |y: &SVector<f64, N>, dy: &SVector<f64, N>| dy.amax() / (y.amax().max(f64::MIN_POSITIVE) * rate_scale);

    if scaled_residual(&init, ode.dydt()) < opts.rel_tol {
        return Ok(SteadyReport {
            state: init,
            t_converged: 0.0,
            accepted_steps: 0,
            rejected_steps: 0,
            min_uncertainty: min_unc,
        });
    }
    while ode.t() < t_max {
        ode.step(&rhs, &accept, t_max)?;
        let y = *ode.y();
        let big = y.amax();
        if big > cap {
            return Err(Error::Diverged {
                t: ode.t(),
                value: big,
                cap,
            });
        }
        min_unc = min_unc.min(uncertainty(&y));
        if scaled_residual(&y, ode.dydt()) < opts.rel_tol {
            return Ok(SteadyReport {
                state: y,
                t_converged: ode.t(),
                accepted_steps: ode.accepted_steps(),
                rejected_steps: ode.rejected_steps(),
                min_uncertainty: min_unc,
            });
        }
    }
    Err(Error::NotConverged {
        t_max,
        residual: scaled_residual(ode.y(), ode.dydt()),
    })
}

/// Integrates one pair's Riccati flow to steady state.
pub fn integrate_pair_to_steady(
    pair: &PairSubsystem,
    params: &OscillatorPairParams,
    init: &PairCovariance,
    opts: &SteadyOptions,
) -> Result<SteadyReport<PairCovariance>> {
    let floor = 0.25 - opts.heisenberg_tol;
    let rhs = |_t: f64, y: &Vector3<f64>| {
        pair_riccati_rhs(&PairCovariance::from_vector(y), pair, params).to_vector()
    };
    let valid = |y: &Vector3<f64>| y[0] > 0.0 && y[1] > 0.0 && y[0] * y[1] - y[2] * y[2] >= floor;
    let unc = |y: &Vector3<f64>| y[0] * y[1] - y[2] * y[2];
    let t_max = opts.t_max.unwrap_or_else(|| default_t_max(std::slice::from_ref(pair)));
    let r = integrate_to_steady(rhs, init.to_vector(), valid, unc, pair.gamma_mean, t_max, opts)?;
    Ok(SteadyReport {
        state: PairCovariance::from_vector(&r.state),
        t_converged: r.t_converged,
        accepted_steps: r.accepted_steps,
        rejected_steps: r.rejected_steps,
        min_uncertainty: r.min_uncertainty,
    })
}

/// Integrates the full 4×4 Riccati flow to steady state.
pub fn integrate_full_to_steady(
    drift: &DriftMatrix4,
    params: &OscillatorPairParams,
    init: &CovarianceMatrix4,
    opts: &SteadyOptions,
) -> Result<SteadyReport<CovarianceMatrix4>> {
    if init.basis != drift.basis {
        return Err(Error::BasisMismatch {
            covariance: init.basis,
            drift: drift.basis,
        });
    }
    let basis = drift.basis;
    let (diff, k) = (params.diffusion(), params.conditioning_rate());
    let a = drift.matrix;
    let rhs = |_t: f64, y: &SVector<f64, 16>| {
        let v = Matrix4::from_column_slice(y.as_slice());
        SVector::<f64, 16>::from_column_slice(full_rhs_matrix(&v, &a, diff, k).as_slice())
    };
    let sq_symplectic_min = |y: &SVector<f64, 16>| {
        let cov = CovarianceMatrix4::new(Matrix4::from_column_slice(y.as_slice()), basis);
        let (lo, _) = cov.symplectic_eigenvalues();
        lo * lo
    };
    let floor = 0.25 - opts.heisenberg_tol;
    let valid = |y: &SVector<f64, 16>| {
        let m = Matrix4::from_column_slice(y.as_slice());
        m.cholesky().is_some() && sq_symplectic_min(y) >= floor
    };
    let t_max = opts.t_max.unwrap_or_else(|| {
        let g = params.gamma_mean();
        let blocks = pair_blocks(basis, &a);
        let pairs: Vec<PairSubsystem> = blocks
            .iter()
            .map(|b| {
                // recover (|χ|, δ) from the block off-diagonals
                let chi = 0.5 * (b[(0, 1)] + b[(1, 0)]);
                let delta = 0.5 * (b[(1, 0)] - b[(0, 1)]);
                PairSubsystem::new(crate::model::PairLabel::PlusPair, chi.abs(), delta, g)
            })
            .collect();
        default_t_max(&pairs)
    });
    let init_vec = SVector::<f64, 16>::from_column_slice(init.matrix.as_slice());
    let r = integrate_to_steady(rhs, init_vec, valid, sq_symplectic_min, params.gamma_mean(), t_max, opts)?;
    let m = Matrix4::from_column_slice(r.state.as_slice());
    Ok(SteadyReport {
        state: CovarianceMatrix4::new((m + m.transpose()) * 0.5, basis),
        t_converged: r.t_converged,
        accepted_steps: r.accepted_steps,
        rejected_steps: r.rejected_steps,
        min_uncertainty: r.min_uncertainty,
    })
}

/// Samples a pair's flow from `init` at the requested (sorted) times.
pub fn pair_flow(
    pair: &PairSubsystem,
    params: &OscillatorPairParams,
    init: &PairCovariance,
    times: &[f64],
    ode_opts: OdeOptions,
) -> Result<Vec<PairCovariance>> {
    let rhs = |_t: f64, y: &Vector3<f64>| {
        pair_riccati_rhs(&PairCovariance::from_vector(y), pair, params).to_vector()
    };
    let mut ode = Dopri5::new(&rhs, 0.0, init.to_vector(), ode_opts);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > ode.t() {
            ode.integrate_to(&rhs, &|_| true, t, |_, _| {})?;
        }
        out.push(PairCovariance::from_vector(ode.y()));
    }
    Ok(out)
}

/// Samples the full 4×4 flow at the requested (sorted) times.
pub fn full_flow(
    drift: &DriftMatrix4,
    params: &OscillatorPairParams,
    init: &CovarianceMatrix4,
    times: &[f64],
    ode_opts: OdeOptions,
) -> Result<Vec<CovarianceMatrix4>> {
    if init.basis != drift.basis {
        return Err(Error::BasisMismatch {
            covariance: init.basis,
            drift: drift.basis,
        });
    }
    let (diff, k, a) = (params.diffusion(), params.conditioning_rate(), drift.matrix);
    let rhs = |_t: f64, y: &SVector<f64, 16>| {
        let v = Matrix4::from_column_slice(y.as_slice());
        SVector::<f64, 16>::from_column_slice(full_rhs_matrix(&v, &a, diff, k).as_slice())
    };
    let mut ode = Dopri5::new(&rhs, 0.0, SVector::from_column_slice(init.matrix.as_slice()), ode_opts);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > ode.t() {
            ode.integrate_to(&rhs, &|_| true, t, |_, _| {})?;
        }
        out.push(CovarianceMatrix4::new(Matrix4::from_column_slice(ode.y().as_slice()), drift.basis));
    }
    Ok(out)
}

fn pair_jacobian(cov: &PairCovariance, pair: &PairSubsystem, k: f64) -> Matrix3<f64> {
    let g = pair.gamma_mean;
    let sc = pair.label.sign() * pair.chi_eff;
    let (a, b) = (sc - pair.delta_eff, sc + pair.delta_eff);
    let PairCovariance { v_x, v_y, c } = *cov;
    Matrix3::new(
        -2.0 * g - 2.0 * k * v_x, 0.0, 2.0 * a - 2.0 * k * c,
        0.0, -2.0 * g - 2.0 * k * v_y, 2.0 * b - 2.0 * k * c,
        b - k * c, a - k * c, -2.0 * g - k * (v_x + v_y),
    )
}

/// Magnitude of the terms in each pair equation, for relative residuals.
fn pair_term_scale(cov: &PairCovariance, pair: &PairSubsystem, params: &OscillatorPairParams) -> Vector3<f64> {
    let g = pair.gamma_mean;
    let (chi, d) = (pair.chi_eff.abs(), pair.delta_eff.abs());
    let (diff, k) = (params.diffusion(), params.conditioning_rate());
    let PairCovariance { v_x, v_y, c } = *cov;
    let c = c.abs();
    Vector3::new(
        2.0 * g * v_x.abs() + 2.0 * (chi + d) * c + diff + k * (v_x * v_x + c * c),
        2.0 * g * v_y.abs() + 2.0 * (chi + d) * c + diff + k * (v_y * v_y + c * c),
        2.0 * g * c + (d + chi) * (v_x.abs() + v_y.abs()) + k * c * (v_x.abs() + v_y.abs()),
    )
}

/// Largest componentwise `|F_i| / (sum of |terms_i|)` of the pair equations.
pub fn pair_relative_residual(cov: &PairCovariance, pair: &PairSubsystem, params: &OscillatorPairParams) -> f64 {
    let f = pair_riccati_rhs(cov, pair, params).to_vector();
    let s = pair_term_scale(cov, pair, params);
    f.component_div(&s.map(|x| x.max(f64::MIN_POSITIVE))).amax()
}

fn is_hurwitz2(m: &Matrix2<f64>) -> bool {
    let scale = m.norm_squared();
    m.trace() < 0.0 && m.determinant() > 1e-12 * scale
}

/// Unconditional (`μ`-free conditioning) steady state of one pair:
/// `A V + V Aᵀ + 2γ̄V₀·I = 0`.
pub fn lyapunov_pair(pair: &PairSubsystem, params: &OscillatorPairParams) -> Result<PairCovariance> {
    let a = pair.drift_block();
    if !is_hurwitz2(&a) {
        return Err(Error::NotHurwitz(pair.max_real_eigenvalue()));
    }
    let zero = PairCovariance::isotropic(0.0);
    let j = pair_jacobian(&zero, pair, 0.0);
    let d = params.diffusion();
    let x = j
        .lu()
        .solve(&Vector3::new(-d, -d, 0.0))
        .ok_or_else(|| Error::NotHurwitz(pair.max_real_eigenvalue()))?;
    Ok(PairCovariance::from_vector(&x))
}

/// Newton iteration on the three pair equations.
///
/// Without an explicit guess the iteration starts from a covariance whose
/// closed-loop matrix `A - 4ημV` is Hurwitz (the Lyapunov solution when it
/// qualifies, else `V₀·I`, else a large multiple of the identity), which
/// makes every iterate stabilizing and lands on the physical root.
pub fn steady_algebraic(
    pair: &PairSubsystem,
    params: &OscillatorPairParams,
    initial_guess: Option<PairCovariance>,
) -> Result<PairCovariance> {
    let k = params.conditioning_rate();
    let a = pair.drift_block();
    let closed_loop_ok = |v: &PairCovariance| is_hurwitz2(&(a - v.as_matrix() * k));
    let mut x = match initial_guess {
        Some(g) => g,
        None => {
            let v0 = v0(params);
            match lyapunov_pair(pair, params) {
                Ok(l) if closed_loop_ok(&l) => l,
                _ if closed_loop_ok(&PairCovariance::isotropic(v0)) => PairCovariance::isotropic(v0),
                _ if k > 0.0 => {
                    let c = v0 + 2.0 * (pair.max_real_eigenvalue() + pair.gamma_mean) / k;
                    PairCovariance::isotropic(c)
                }
                _ => {
                    return Err(Error::NoConvergence(
                        "no unconditional steady state above threshold".into(),
                    ))
                }
            }
        }
    };

    let mut converged = false;
    for _ in 0..200 {
        let f = pair_riccati_rhs(&x, pair, params).to_vector();
        let j = pair_jacobian(&x, pair, k);
        let step = j
            .lu()
            .solve(&(-f))
            .ok_or_else(|| Error::NoConvergence("singular jacobian".into()))?;
        let xv = x.to_vector() + step;
        x = PairCovariance::from_vector(&xv);
        if !x.is_finite() {
            return Err(Error::NoConvergence("iterate became non-finite".into()));
        }
        if step.amax() <= 4.0 * f64::EPSILON * xv.amax() {
            converged = true;
            break;
        }
    }
    let res = pair_relative_residual(&x, pair, params);
    if !(converged || res < 1e-13) {
        return Err(Error::NoConvergence(format!("iteration cap hit, residual {res:e}")));
    }
    if res > 1e-12 {
        return Err(Error::NoConvergence(format!("residual {res:e} above 1e-12")));
    }
    if !(x.v_x > 0.0 && x.v_y > 0.0 && x.determinant() > 0.0) {
        return Err(Error::NoConvergence(format!("converged to a non-physical root {x:?}")));
    }
    Ok(x)
}

/// Largest real part among the eigenvalues of a 4×4 matrix.
pub fn max_real_eigenvalue(m: &Matrix4<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral radius of a 4×4 matrix.
pub fn spectral_radius(m: &Matrix4<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solves `A X + X Aᵀ + Q = 0` by vectorization.
pub fn solve_lyapunov4(a: &Matrix4<f64>, q: &Matrix4<f64>) -> Option<Matrix4<f64>> {
    let mut big = SMatrix::<f64, 16, 16>::zeros();
    let id = Matrix4::<f64>::identity();
    // vec(AX + XAᵀ) = (I ⊗ A + A ⊗ I) vec(X) with column-major vec
    for bi in 0..4 {
        for bj in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    big[(bi * 4 + i, bj * 4 + j)] += id[(bi, bj)] * a[(i, j)] + a[(bi, bj)] * id[(i, j)];
                }
            }
        }
    }
    let rhs = -SVector::<f64, 16>::from_column_slice(q.as_slice());
    let x = big.lu().solve(&rhs)?;
    let m = Matrix4::from_column_slice(x.as_slice());
    Some((m + m.transpose()) * 0.5)
}

/// Unconditional steady covariance `A V + V Aᵀ + 2γ̄V₀·I = 0`.
pub fn lyapunov_unconditional(
    drift: &DriftMatrix4,
    params: &OscillatorPairParams,
) -> Result<CovarianceMatrix4> {
    let re = max_real_eigenvalue(&drift.matrix);
    if re >= 0.0 {
        return Err(Error::NotHurwitz(re));
    }
    let q = Matrix4::identity() * params.diffusion();
    let v = solve_lyapunov4(&drift.matrix, &q).ok_or(Error::NotHurwitz(re))?;
    Ok(CovarianceMatrix4::new(v, drift.basis))
}

/// Variance of the rotated quadrature `cos θ X + sin θ Y`.
pub fn rotated_variance(cov: &PairCovariance, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * c * cov.v_x + s * s * cov.v_y + (2.0 * theta).sin() * cov.c
}
