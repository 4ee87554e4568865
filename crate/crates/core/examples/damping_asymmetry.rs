//! Effect of unequal damping on the coupled-mode scheme.

use paramp_entangle::closedform::{log_grid, min_separability_over_mu};
use paramp_entangle::model::threshold_detuning;
use paramp_entangle::{DriveModel, OscillatorPairParams};

fn main() -> paramp_entangle::Result<()> {
    let grid = log_grid(1e-2, 1e3, 200);
    let chi = 25.0;
    println!("gamma1/gamma2,min_S,mu_star");
    for ratio in [1.0, 1.5, 3.0] {
        let params = OscillatorPairParams {
            gamma1: 2.0 * ratio / (1.0 + ratio),
            gamma2: 2.0 / (1.0 + ratio),
            ..OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 1.0)
        };
        let strongest = chi + params.damping_half_difference().abs();
        let drive = DriveModel::ModelTwo {
            chi,
            coupling: threshold_detuning(strongest, 1.0).unwrap(),
        };
        let scan = min_separability_over_mu(&drive, &params, &grid)?;
        println!("{ratio},{},{}", scan.s_min, scan.mu_star);
    }
    Ok(())
}
