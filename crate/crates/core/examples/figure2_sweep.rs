//! Separability against measurement strength for two drive strengths,
//! printed as CSV.

use paramp_entangle::closedform::{log_grid, min_separability_over_mu};
use paramp_entangle::model::threshold_detuning;
use paramp_entangle::{DriveModel, OscillatorPairParams};

fn main() -> paramp_entangle::Result<()> {
    let params = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 1.0);
    let grid = log_grid(1e-2, 1e3, 200);
    let scans = [25.0, 50.0].map(|chi| {
        let drive = DriveModel::ModelOne {
            chi,
            detuning: threshold_detuning(chi, 1.0).unwrap(),
        };
        min_separability_over_mu(&drive, &params, &grid)
    });
    let [a, b] = scans;
    let (a, b) = (a?, b?);
    println!("mu,S_chi25,S_chi50");
    for ((mu, s25), (_, s50)) in a.curve.iter().zip(&b.curve) {
        println!("{mu},{},{}", s25.unwrap_or(f64::NAN), s50.unwrap_or(f64::NAN));
    }
    eprintln!("min S: {} at mu {} (chi 25), {} at mu {} (chi 50)", a.s_min, a.mu_star, b.s_min, b.mu_star);
    eprintln!("ratio {} vs 1/sqrt(2) = {}", b.s_min / a.s_min, std::f64::consts::FRAC_1_SQRT_2);
    Ok(())
}
