//! Compares the demodulated lab-frame covariance with the rotating-frame
//! steady state as the mechanical frequency grows.

use paramp_entangle::trajectories::{labframe_rwa_check, LabFrameConfig};
use paramp_entangle::{DriveModel, OscillatorPairParams};

fn main() -> paramp_entangle::Result<()> {
    let drive = DriveModel::ModelOne { chi: 5.0, detuning: 5.0 };
    println!("omega_m,deviation,steps");
    for omega in [1e2, 1e3, 1e4] {
        let params = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 0.0).with_mech_frequency(omega);
        let r = labframe_rwa_check(&drive, &params, &LabFrameConfig::default())?;
        println!("{omega},{},{}", r.deviation, r.accepted_steps);
    }
    Ok(())
}
