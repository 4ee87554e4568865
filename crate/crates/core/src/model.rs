//! Parameter types, drift matrices and the reduction of both drive schemes
//! to two independent quadrature pairs.
//!
//! Rates are plain `f64` in whatever unit the caller chooses; the solvers
//! only ever see ratios. The command-line front end normalizes everything to
//! the mean damping rate before calling in here.
//!
//! Quadrature orderings:
//!
//! ```text
//! individual      (X1, Y1, X2, Y2)
//! CollectiveXY    (X+, X-, Y+, Y-)    pairs (X+, Y+) and (X-, Y-)
//! UV              (U1, U2, V1, V2)    pairs (U1, U2) and (V1, V2)
//! ```
//!
//! Each pair evolves with the drift block
//!
//! ```text
//! [ -γ        sχ - δ ]
//! [ sχ + δ    -γ     ]
//! ```
//!
//! where `s = +1` for the plus/U pair and `s = -1` for the minus/V pair.
//! This is the sign convention under which the conditional variance
//! equations hold exactly as written in [`crate::riccati::pair_riccati_rhs`].

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Physical rates shared by every solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorPairParams {
    /// Damping rate of oscillator 1.
    pub gamma1: f64,
    /// Damping rate of oscillator 2.
    pub gamma2: f64,
    /// Mean bath phonon number `N`.
    pub bath_occupation: f64,
    /// Detection efficiency `η` in (0, 1].
    pub efficiency: f64,
    /// Measurement strength `μ` (rate).
    pub measurement_rate: f64,
    /// Mechanical frequency `ω_m`, only needed for lab-frame checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mech_frequency: Option<f64>,
}

impl OscillatorPairParams {
    /// Equal damping `gamma` on both oscillators.
    pub fn symmetric(gamma: f64, bath_occupation: f64, efficiency: f64, measurement_rate: f64) -> Self {
        Self {
            gamma1: gamma,
            gamma2: gamma,
            bath_occupation,
            efficiency,
            measurement_rate,
            mech_frequency: None,
        }
    }

    pub fn with_measurement_rate(mut self, mu: f64) -> Self {
        self.measurement_rate = mu;
        self
    }

    pub fn with_mech_frequency(mut self, omega_m: f64) -> Self {
        self.mech_frequency = Some(omega_m);
        self
    }

    /// Mean damping rate `γ̄ = (γ1 + γ2) / 2`.
    pub fn gamma_mean(&self) -> f64 {
        0.5 * (self.gamma1 + self.gamma2)
    }

    /// Half the damping difference, `(γ1 - γ2) / 2`.
    pub fn damping_half_difference(&self) -> f64 {
        0.5 * (self.gamma1 - self.gamma2)
    }

    pub fn is_symmetric(&self) -> bool {
        self.gamma1 == self.gamma2
    }

    /// Combined measurement coefficient `4ημ` multiplying the conditioning term.
    pub fn conditioning_rate(&self) -> f64 {
        4.0 * self.efficiency * self.measurement_rate
    }

    /// Diffusion per quadrature, `2γ̄V₀ = 2γ̄(N + 1/2) + μ`.
    pub fn diffusion(&self) -> f64 {
        2.0 * self.gamma_mean() * v0(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("bath_occupation", self.bath_occupation),
            ("efficiency", self.efficiency),
            ("measurement_rate", self.measurement_rate),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.gamma1 <= 0.0 || self.gamma2 <= 0.0 {
            return bad(format!(
                "damping rates must be positive, got gamma1 = {}, gamma2 = {}",
                self.gamma1, self.gamma2
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad(format!("efficiency must lie in (0, 1], got {}", self.efficiency));
        }
        if self.measurement_rate < 0.0 {
            return bad(format!("measurement_rate must be >= 0, got {}", self.measurement_rate));
        }
        if self.bath_occupation < 0.0 {
            return bad(format!("bath_occupation must be >= 0, got {}", self.bath_occupation));
        }
        if let Some(w) = self.mech_frequency {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("mech_frequency must be positive, got {w}"));
            }
        }
        Ok(())
    }

    /// Rescales all rates so that `γ̄ = 1`. Returns the scaled copy and the
    /// original `γ̄`.
    pub fn normalized(&self) -> (Self, f64) {
        let g = self.gamma_mean();
        let scaled = Self {
            gamma1: self.gamma1 / g,
            gamma2: self.gamma2 / g,
            bath_occupation: self.bath_occupation,
            efficiency: self.efficiency,
            measurement_rate: self.measurement_rate / g,
            mech_frequency: self.mech_frequency.map(|w| w / g),
        };
        (scaled, g)
    }
}

/// `V₀ = N + 1/2 + μ / 2γ̄`, the variance each quadrature relaxes to without
/// drive or conditioning.
pub fn v0(params: &OscillatorPairParams) -> f64 {
    params.bath_occupation + 0.5 + params.measurement_rate / (2.0 * params.gamma_mean())
}

/// The two drive schemes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DriveModel {
    /// Coupling modulated at twice the half-drive frequency; detuning `Δ`.
    ModelOne { chi: f64, detuning: f64 },
    /// Constant coupling `Γ` plus resonant single-mode parametric drives.
    ModelTwo { chi: f64, coupling: f64 },
}

impl DriveModel {
    pub fn chi(&self) -> f64 {
        match *self {
            DriveModel::ModelOne { chi, .. } | DriveModel::ModelTwo { chi, .. } => chi,
        }
    }

    /// `Δ` for model one, `Γ` for model two.
    pub fn detuning(&self) -> f64 {
        match *self {
            DriveModel::ModelOne { detuning, .. } => detuning,
            DriveModel::ModelTwo { coupling, .. } => coupling,
        }
    }

    pub fn basis(&self) -> Basis {
        match self {
            DriveModel::ModelOne { .. } => Basis::CollectiveXY,
            DriveModel::ModelTwo { .. } => Basis::UV,
        }
    }

    /// Multiplies every rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            DriveModel::ModelOne { chi, detuning } => DriveModel::ModelOne {
                chi: chi * factor,
                detuning: detuning * factor,
            },
            DriveModel::ModelTwo { chi, coupling } => DriveModel::ModelTwo {
                chi: chi * factor,
                coupling: coupling * factor,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (chi, d) = (self.chi(), self.detuning());
        if !(chi.is_finite() && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("drive rates must be finite: {self:?}")));
        }
        if chi < 0.0 {
            return Err(Error::InvalidParameter(format!("chi must be >= 0, got {chi}")));
        }
        if let DriveModel::ModelTwo { coupling, .. } = self {
            if *coupling < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "coupling must be >= 0, got {coupling}"
                )));
            }
        }
        Ok(())
    }
}

/// Which decoupled pair a [`PairSubsystem`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    /// `(X+, Y+)`
    PlusPair,
    /// `(X-, Y-)`
    MinusPair,
    /// `(U1, U2)`
    UPair,
    /// `(V1, V2)`
    VPair,
}

impl PairLabel {
    /// Sign `s` multiplying the parametric rate in the pair drift.
    pub fn sign(self) -> f64 {
        match self {
            PairLabel::PlusPair | PairLabel::UPair => 1.0,
            PairLabel::MinusPair | PairLabel::VPair => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PairLabel::PlusPair => "plus",
            PairLabel::MinusPair => "minus",
            PairLabel::UPair => "u",
            PairLabel::VPair => "v",
        }
    }
}

/// One decoupled two-quadrature subsystem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSubsystem {
    pub label: PairLabel,
    pub chi_eff: f64,
    pub delta_eff: f64,
    pub gamma_mean: f64,
}

impl PairSubsystem {
    pub fn new(label: PairLabel, chi_eff: f64, delta_eff: f64, gamma_mean: f64) -> Self {
        Self {
            label,
            chi_eff,
            delta_eff,
            gamma_mean,
        }
    }

    /// The 2×2 drift block of this pair.
    pub fn drift_block(&self) -> Matrix2<f64> {
        let s = self.label.sign() * self.chi_eff;
        Matrix2::new(
            -self.gamma_mean,
            s - self.delta_eff,
            s + self.delta_eff,
            -self.gamma_mean,
        )
    }

    /// Largest real part of the block eigenvalues `-γ ± sqrt(χ² - δ²)`.
    pub fn max_real_eigenvalue(&self) -> f64 {
        let disc = self.chi_eff * self.chi_eff - self.delta_eff * self.delta_eff;
        -self.gamma_mean + disc.max(0.0).sqrt()
    }
}

/// Result of [`threshold`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub chi_th: f64,
    /// `|χ_eff| < χ_th`; the boundary itself counts as unstable.
    pub stable: bool,
}

/// `χ_th = sqrt(γ̄² + δ²)`.
pub fn threshold(pair: &PairSubsystem) -> Threshold {
    let chi_th = pair.gamma_mean.hypot(pair.delta_eff);
    Threshold {
        chi_th,
        stable: pair.chi_eff.abs() < chi_th,
    }
}

/// Splits a drive scheme into its two independent quadrature pairs.
///
/// Model two absorbs damping asymmetry into the effective parametric rates
/// `χ1 = χ - (γ1 - γ2)/2` and `χ2 = χ + (γ1 - γ2)/2` at the mean damping.
/// Model one only decouples for equal damping.
pub fn reduce_to_pairs(
    drive: &DriveModel,
    params: &OscillatorPairParams,
) -> Result<(PairSubsystem, PairSubsystem)> {
    let g = params.gamma_mean();
    match *drive {
        DriveModel::ModelOne { chi, detuning } => {
            if !params.is_symmetric() {
                return Err(Error::AsymmetryUnsupported {
                    gamma1: params.gamma1,
                    gamma2: params.gamma2,
                });
            }
            Ok((
                PairSubsystem::new(PairLabel::PlusPair, chi, detuning, g),
                PairSubsystem::new(PairLabel::MinusPair, chi, detuning, g),
            ))
        }
        DriveModel::ModelTwo { chi, coupling } => {
            let h = params.damping_half_difference();
            Ok((
                PairSubsystem::new(PairLabel::UPair, chi - h, coupling, g),
                PairSubsystem::new(PairLabel::VPair, chi + h, coupling, g),
            ))
        }
    }
}

/// Ordering of the four collective quadratures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// `(X+, X-, Y+, Y-)`
    CollectiveXY,
    /// `(U1, U2, V1, V2)`
    UV,
}

impl Basis {
    /// Index pairs of the two dynamically coupled quadratures.
    pub fn pair_indices(self) -> [(usize, usize); 2] {
        match self {
            Basis::CollectiveXY => [(0, 2), (1, 3)],
            Basis::UV => [(0, 1), (2, 3)],
        }
    }

    pub fn labels(self) -> [&'static str; 4] {
        match self {
            Basis::CollectiveXY => ["X+", "X-", "Y+", "Y-"],
            Basis::UV => ["U1", "U2", "V1", "V2"],
        }
    }

    /// Orthogonal map from individual `(X1, Y1, X2, Y2)` into this basis.
    pub fn from_individual(self) -> Matrix4<f64> {
        match self {
            Basis::CollectiveXY => transform_matrix(TransformDirection::IndividualToCollective),
            Basis::UV => transform_matrix(TransformDirection::IndividualToUV),
        }
    }

    /// Canonical-conjugate index pairs `(q, p)` with `[q, p] = i`.
    ///
    /// Both bases happen to use positions 0/2 and 1/3.
    pub fn conjugate_indices(self) -> [(usize, usize); 2] {
        [(0, 2), (1, 3)]
    }
}

/// 4×4 drift matrix with its basis tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftMatrix4 {
    pub matrix: Matrix4<f64>,
    pub basis: Basis,
}

/// Assembles the full drift matrix from the two pair blocks.
pub fn drift_matrix(drive: &DriveModel, params: &OscillatorPairParams) -> Result<DriftMatrix4> {
    let pairs = reduce_to_pairs(drive, params)?;
    let basis = drive.basis();
    Ok(DriftMatrix4 {
        matrix: embed_pairs(basis, &pairs.0.drift_block(), &pairs.1.drift_block()),
        basis,
    })
}

/// Places two 2×2 blocks on the pair positions of `basis`.
pub fn embed_pairs(basis: Basis, first: &Matrix2<f64>, second: &Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for (block, (i, j)) in [first, second].into_iter().zip(basis.pair_indices()) {
        m[(i, i)] = block[(0, 0)];
        m[(i, j)] = block[(0, 1)];
        m[(j, i)] = block[(1, 0)];
        m[(j, j)] = block[(1, 1)];
    }
    m
}

/// Extracts the two 2×2 pair blocks of a basis-ordered matrix.
pub fn pair_blocks(basis: Basis, m: &Matrix4<f64>) -> [Matrix2<f64>; 2] {
    basis.pair_indices().map(|(i, j)| {
        Matrix2::new(m[(i, i)], m[(i, j)], m[(j, i)], m[(j, j)])
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformDirection {
    IndividualToCollective,
    CollectiveToIndividual,
    IndividualToUV,
    UVToIndividual,
}

impl TransformDirection {
    pub fn inverse(self) -> Self {
        match self {
            Self::IndividualToCollective => Self::CollectiveToIndividual,
            Self::CollectiveToIndividual => Self::IndividualToCollective,
            Self::IndividualToUV => Self::UVToIndividual,
            Self::UVToIndividual => Self::IndividualToUV,
        }
    }
}

/// Orthogonal matrix implementing `direction`.
pub fn transform_matrix(direction: TransformDirection) -> Matrix4<f64> {
    let r = FRAC_1_SQRT_2;
    // rows map (X1, Y1, X2, Y2)
    let to_collective = Matrix4::new(
        r, 0.0, r, 0.0, // X+
        r, 0.0, -r, 0.0, // X-
        0.0, r, 0.0, r, // Y+
        0.0, r, 0.0, -r, // Y-
    );
    let to_uv = Matrix4::new(
        r, 0.0, 0.0, r, // U1 = (X1 + Y2)/√2
        r, 0.0, 0.0, -r, // U2 = (X1 - Y2)/√2
        0.0, r, -r, 0.0, // V1 = (Y1 - X2)/√2
        0.0, r, r, 0.0, // V2 = (Y1 + X2)/√2
    );
    match direction {
        TransformDirection::IndividualToCollective => to_collective,
        TransformDirection::CollectiveToIndividual => to_collective.transpose(),
        TransformDirection::IndividualToUV => to_uv,
        TransformDirection::UVToIndividual => to_uv.transpose(),
    }
}

pub fn quadrature_transform(values: &Vector4<f64>, direction: TransformDirection) -> Vector4<f64> {
    transform_matrix(direction) * values
}

/// Symplectic form `Ω` for the individual ordering `(X1, Y1, X2, Y2)`.
pub fn symplectic_form_individual() -> Matrix4<f64> {
    let mut o = Matrix4::zeros();
    o[(0, 1)] = 1.0;
    o[(1, 0)] = -1.0;
    o[(2, 3)] = 1.0;
    o[(3, 2)] = -1.0;
    o
}

/// Symplectic form in a collective basis (`[q, p] = i` on the conjugate
/// index pairs).
pub fn symplectic_form(basis: Basis) -> Matrix4<f64> {
    let mut o = Matrix4::zeros();
    for (q, p) in basis.conjugate_indices() {
        o[(q, p)] = 1.0;
        o[(p, q)] = -1.0;
    }
    o
}

/// Lab-frame coupling strength `g` (with mass `m` and mechanical frequency
/// `ω_m`) expressed as the rotating-frame parametric rate `χ = g / 2mω_m`.
pub fn chi_from_lab(g: f64, mass: f64, omega_m: f64) -> f64 {
    g / (2.0 * mass * omega_m)
}

/// Detuning that places a pair with parametric rate `chi` exactly at
/// threshold, `sqrt(χ² - γ²)`. Returns `None` when `χ < γ`.
pub fn threshold_detuning(chi: f64, gamma: f64) -> Option<f64> {
    (chi >= gamma).then(|| (chi * chi - gamma * gamma).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn sym(gamma: f64) -> OscillatorPairParams {
        OscillatorPairParams::symmetric(gamma, 5.0, 1.0, 1.0)
    }

    #[test]
    fn model_two_asymmetric_mapping() {
        let mut p = sym(1.0);
        p.gamma1 = 1.5;
        p.gamma2 = 0.5;
        let (a, b) = reduce_to_pairs(&DriveModel::ModelTwo { chi: 25.0, coupling: 24.0 }, &p).unwrap();
        assert_eq!((a.label, a.chi_eff, a.delta_eff, a.gamma_mean), (PairLabel::UPair, 24.5, 24.0, 1.0));
        assert_eq!((b.label, b.chi_eff, b.delta_eff, b.gamma_mean), (PairLabel::VPair, 25.5, 24.0, 1.0));
    }

    #[test]
    fn model_one_symmetric_identity() {
        let (a, b) = reduce_to_pairs(&DriveModel::ModelOne { chi: 25.0, detuning: 24.0 }, &sym(1.0)).unwrap();
        assert_eq!(a.label, PairLabel::PlusPair);
        assert_eq!(b.label, PairLabel::MinusPair);
        for p in [a, b] {
            assert_eq!((p.chi_eff, p.delta_eff, p.gamma_mean), (25.0, 24.0, 1.0));
        }
    }

    #[test]
    fn model_two_symmetric_pairs_equal() {
        let (a, b) = reduce_to_pairs(&DriveModel::ModelTwo { chi: 5.0, coupling: 5.0 }, &sym(1.0)).unwrap();
        assert_eq!((a.chi_eff, a.delta_eff), (5.0, 5.0));
        assert_eq!((b.chi_eff, b.delta_eff), (5.0, 5.0));
    }

    #[test]
    fn model_one_rejects_asymmetry() {
        let mut p = sym(1.0);
        p.gamma1 = 2.0;
        let err = reduce_to_pairs(&DriveModel::ModelOne { chi: 1.0, detuning: 0.0 }, &p).unwrap_err();
        assert!(matches!(err, Error::AsymmetryUnsupported { .. }));
    }

    #[test]
    fn undriven_drift_is_pure_damping() {
        for drive in [
            DriveModel::ModelOne { chi: 0.0, detuning: 0.0 },
            DriveModel::ModelTwo { chi: 0.0, coupling: 0.0 },
        ] {
            let a = drift_matrix(&drive, &sym(1.0)).unwrap();
            assert_eq!(a.matrix, -Matrix4::identity());
        }
    }

    #[test]
    fn stable_spiral_eigenvalues() {
        let a = drift_matrix(&DriveModel::ModelOne { chi: 3.0, detuning: 4.0 }, &sym(1.0)).unwrap();
        for block in pair_blocks(a.basis, &a.matrix) {
            // trace = -2, det = 1 + 7 => -1 ± i√7
            assert!(close(block.trace(), -2.0, 1e-15));
            assert!(close(block.determinant(), 8.0, 1e-12));
            let ev = block.complex_eigenvalues();
            for z in ev.iter() {
                assert!(close(z.re, -1.0, 1e-12));
                assert!(close(z.im.abs(), 7f64.sqrt(), 1e-12));
            }
        }
    }

    #[test]
    fn threshold_examples() {
        let t = threshold(&PairSubsystem::new(PairLabel::PlusPair, 0.5, 0.0, 1.0));
        assert_eq!(t.chi_th, 1.0);
        assert!(t.stable);
        let t = threshold(&PairSubsystem::new(PairLabel::PlusPair, 5.0, 4.0, 3.0));
        assert_eq!(t.chi_th, 5.0);
        assert!(!t.stable);
        let t = threshold(&PairSubsystem::new(PairLabel::PlusPair, 25.0, 624f64.sqrt(), 1.0));
        assert!(close(t.chi_th, 25.0, 1e-12));
    }

    #[test]
    fn transform_examples() {
        let s2 = std::f64::consts::SQRT_2;
        let v = quadrature_transform(&Vector4::new(1.0, 0.0, 1.0, 0.0), TransformDirection::IndividualToCollective);
        assert!((v - Vector4::new(s2, 0.0, 0.0, 0.0)).norm() < 1e-15);
        let v = quadrature_transform(&Vector4::new(1.0, 0.0, 0.0, -1.0), TransformDirection::IndividualToUV);
        assert!((v - Vector4::new(0.0, s2, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transforms_preserve_commutators() {
        let omega = symplectic_form_individual();
        for basis in [Basis::CollectiveXY, Basis::UV] {
            let t = basis.from_individual();
            let mapped = t * omega * t.transpose();
            assert!((mapped - symplectic_form(basis)).norm() < 1e-14, "{basis:?}");
            assert!((t.transpose() * t - Matrix4::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn v0_examples() {
        assert_eq!(v0(&OscillatorPairParams::symmetric(1.0, 0.0, 1.0, 0.0)), 0.5);
        assert_eq!(v0(&OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 0.0)), 5.5);
        assert_eq!(v0(&OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 1.0)), 6.0);
    }

    #[test]
    fn validation_errors() {
        let mut p = sym(1.0);
        p.efficiency = 0.0;
        assert!(p.validate().is_err());
        p.efficiency = 1.0;
        p.measurement_rate = -1.0;
        assert!(p.validate().is_err());
        assert!(DriveModel::ModelTwo { chi: 1.0, coupling: -1.0 }.validate().is_err());
        assert!(DriveModel::ModelOne { chi: 1.0, detuning: -3.0 }.validate().is_ok());
    }

    #[test]
    fn normalization_scales_rates() {
        let mut p = OscillatorPairParams::symmetric(2.0, 5.0, 1.0, 12.0).with_mech_frequency(2e4);
        p.gamma1 = 3.0;
        p.gamma2 = 1.0;
        let (n, g) = p.normalized();
        assert_eq!(g, 2.0);
        assert_eq!((n.gamma1, n.gamma2, n.measurement_rate, n.mech_frequency), (1.5, 0.5, 6.0, Some(1e4)));
        assert_eq!(v0(&n), v0(&p));
    }
}
