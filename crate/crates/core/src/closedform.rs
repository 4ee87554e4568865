//! Analytic steady-state squeezing and separability.
//!
//! For one pair with parametric rate `χ`, detuning `δ`, damping `γ` and
//! threshold `χ_th = √(γ² + δ²)`, the best conditional quadrature variance is
//!
//! ```text
//! V_α = (√(G² + 4γ²·SNR) - G) / (4ημ),   G = γ + χ·sin 2α
//! ```
//!
//! with `cos 2α` fixed by `(χ, δ, SNR)`. Evaluation uses algebraically
//! equivalent forms that stay finite at `μ → 0` and `SNR → ∞`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reduce_to_pairs, threshold, v0, DriveModel, OscillatorPairParams, PairSubsystem};
use crate::riccati::{rotated_variance, steady_algebraic, PairCovariance};

/// `2ημV₀/γ̄`.
pub fn snr(params: &OscillatorPairParams) -> f64 {
    2.0 * params.efficiency * params.measurement_rate * v0(params) / params.gamma_mean()
}

/// Optimal quadrature angle for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeAngle {
    /// Angle `θ` minimizing `cos²θ V_X + sin²θ V_Y + sin 2θ C`, in `(-π/2, π/2]`.
    pub angle: f64,
    /// Set when the pair is undriven and every angle is equally good.
    pub degenerate: bool,
}

/// Printed `cos 2α` for one pair, in a form free of cancellation.
pub fn cos_two_alpha(pair: &PairSubsystem, params: &OscillatorPairParams) -> f64 {
    let g = pair.gamma_mean;
    let chi = pair.chi_eff.abs();
    let th2 = g * g + pair.delta_eff * pair.delta_eff;
    let chi2 = chi * chi;
    let r = snr(params);
    let g2r = g * g * r;
    let p = th2 + chi2 + 4.0 * g2r;
    let q = (th2 - chi2).powi(2) + 8.0 * (th2 + chi2) * g2r + 16.0 * g2r * g2r;
    let denom = p + q.sqrt();
    if denom <= 0.0 {
        return 0.0;
    }
    (pair.delta_eff * (2.0 / denom).sqrt()).clamp(-1.0, 1.0)
}

/// Closed-form minimum conditional variance of one pair.
pub fn optimal_variance(pair: &PairSubsystem, params: &OscillatorPairParams) -> f64 {
    let c = cos_two_alpha(pair, params);
    let gm = pair.gamma_mean + pair.chi_eff.abs() * (1.0 - c * c).max(0.0).sqrt();
    let d = params.diffusion();
    let k = params.conditioning_rate();
    d / (gm + (gm * gm + k * d).sqrt())
}

fn check_domain(pair: &PairSubsystem, params: &OscillatorPairParams) -> Result<()> {
    if params.measurement_rate == 0.0 && !threshold(pair).stable {
        return Err(Error::NonFinite(format!(
            "{} has no steady state without measurement (|χ| = {} ≥ χ_th = {})",
            pair.label.name(),
            pair.chi_eff.abs(),
            threshold(pair).chi_th
        )));
    }
    Ok(())
}

/// Optimal angle, with the branch of `cos 2α` chosen against the steady
/// pair covariance.
pub fn squeeze_angle(pair: &PairSubsystem, params: &OscillatorPairParams) -> Result<SqueezeAngle> {
    if pair.chi_eff == 0.0 {
        return Ok(SqueezeAngle {
            angle: 0.0,
            degenerate: true,
        });
    }
    check_domain(pair, params)?;
    let cov = steady_algebraic(pair, params, None)?;
    let c = cos_two_alpha(pair, params);
    Ok(SqueezeAngle {
        angle: best_branch(&cov, c),
        degenerate: false,
    })
}

fn best_branch(cov: &PairCovariance, c: f64) -> f64 {
    let s = (1.0 - c * c).max(0.0).sqrt();
    let mut best = (f64::INFINITY, 0.0);
    for cc in [c, -c] {
        for ss in [s, -s] {
            let theta = 0.5 * ss.atan2(cc);
            let v = rotated_variance(cov, theta);
            if v < best.0 {
                best = (v, theta);
            }
        }
    }
    best.1
}

/// Separability and entanglement summary for a pair of pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementResult {
    /// `2√(V_α₊ V_α₋)`; below one certifies entanglement.
    pub s: f64,
    /// `-ln S`, present only when `S < 1`.
    pub log_negativity: Option<f64>,
    /// Optimal angle of the first pair.
    pub alpha: f64,
    /// Optimal angle of the second pair.
    pub alpha_minus: f64,
    pub v_alpha_plus: f64,
    pub v_alpha_minus: f64,
    pub entangled: bool,
    pub angle_degenerate: bool,
}

impl EntanglementResult {
    fn from_variances(va: f64, vb: f64, alpha: SqueezeAngle, alpha_minus: SqueezeAngle) -> Result<Self> {
        let s = 2.0 * (va * vb).sqrt();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NonFinite(format!("separability evaluated to {s}")));
        }
        let entangled = s < 1.0;
        Ok(Self {
            s,
            log_negativity: entangled.then(|| -s.ln()),
            alpha: alpha.angle,
            alpha_minus: alpha_minus.angle,
            v_alpha_plus: va,
            v_alpha_minus: vb,
            entangled,
            angle_degenerate: alpha.degenerate || alpha_minus.degenerate,
        })
    }
}

/// Closed-form separability. Each pair uses its own `χ`, so unequal
/// damping is handled by combining the per-pair optimal variances.
pub fn separability(
    pair_a: &PairSubsystem,
    pair_b: &PairSubsystem,
    params: &OscillatorPairParams,
) -> Result<EntanglementResult> {
    check_domain(pair_a, params)?;
    check_domain(pair_b, params)?;
    let va = optimal_variance(pair_a, params);
    let vb = optimal_variance(pair_b, params);
    EntanglementResult::from_variances(va, vb, squeeze_angle(pair_a, params)?, squeeze_angle(pair_b, params)?)
}

/// Separability from the numerically solved steady covariances.
pub fn separability_riccati(
    pair_a: &PairSubsystem,
    pair_b: &PairSubsystem,
    params: &OscillatorPairParams,
) -> Result<EntanglementResult> {
    let ca = steady_algebraic(pair_a, params, None)?;
    let cb = steady_algebraic(pair_b, params, None)?;
    let angle = |pair: &PairSubsystem, cov: &PairCovariance| {
        if pair.chi_eff == 0.0 {
            SqueezeAngle {
                angle: 0.0,
                degenerate: true,
            }
        } else {
            let (s, c) = (2.0 * cov.c, cov.v_x - cov.v_y);
            // minimizer of the rotated variance
            let theta = 0.5 * (-s).atan2(-c);
            SqueezeAngle {
                angle: theta,
                degenerate: false,
            }
        }
    };
    EntanglementResult::from_variances(ca.min_variance(), cb.min_variance(), angle(pair_a, &ca), angle(pair_b, &cb))
}

/// Closed-form separability for a drive configuration.
pub fn separability_for_drive(drive: &DriveModel, params: &OscillatorPairParams) -> Result<EntanglementResult> {
    let (a, b) = reduce_to_pairs(drive, params)?;
    separability(&a, &b, params)
}

/// Result of scanning the measurement rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuScan {
    pub mu_star: f64,
    pub s_min: f64,
    /// `(μ, S)` per grid point; `None` where the point was outside the
    /// convergent domain.
    pub curve: Vec<(f64, Option<f64>)>,
}

/// Evaluates [`separability`] on every `μ` in the grid.
pub fn min_separability_over_mu(
    drive: &DriveModel,
    params: &OscillatorPairParams,
    mu_grid: &[f64],
) -> Result<MuScan> {
    if mu_grid.is_empty() {
        return Err(Error::InvalidParameter("μ grid is empty".into()));
    }
    if mu_grid.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::InvalidParameter("μ grid must be positive and finite".into()));
    }
    if mu_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("μ grid must be sorted".into()));
    }
    let curve: Vec<(f64, Option<f64>)> = mu_grid
        .par_iter()
        .map(|&mu| {
            let p = params.with_measurement_rate(mu);
            (mu, separability_for_drive(drive, &p).ok().map(|r| r.s))
        })
        .collect();
    let (mu_star, s_min) = curve
        .iter()
        .filter_map(|&(m, s)| s.map(|s| (m, s)))
        .fold((f64::NAN, f64::INFINITY), |best, (m, s)| if s < best.1 { (m, s) } else { best });
    if !s_min.is_finite() {
        return Err(Error::NonFinite("no grid point produced a finite separability".into()));
    }
    Ok(MuScan { mu_star, s_min, curve })
}

/// `count` points spaced evenly in `log10` between `start` and `stop`.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (start.log10(), stop.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}
