//! Unconditional stability across drive strength at zero detuning, with the
//! threshold read off both the formula and the drift eigenvalues.

use paramp_entangle::riccati::{integrate_pair_to_steady, max_real_eigenvalue, PairCovariance, SteadyOptions};
use paramp_entangle::{drift_matrix, reduce_to_pairs, threshold, DriveModel, OscillatorPairParams};

fn main() -> paramp_entangle::Result<()> {
    let params = OscillatorPairParams::symmetric(1.0, 0.0, 1.0, 0.0);
    println!("chi,chi_th,max_re_eig,outcome");
    for chi in [0.5, 0.9, 0.999, 1.001, 1.1, 1.5] {
        let drive = DriveModel::ModelOne { chi, detuning: 0.0 };
        let (plus, _) = reduce_to_pairs(&drive, &params)?;
        let eig = max_real_eigenvalue(&drift_matrix(&drive, &params)?.matrix);
        let outcome = match integrate_pair_to_steady(
            &plus,
            &params,
            &PairCovariance::isotropic(0.5),
            &SteadyOptions::default(),
        ) {
            Ok(r) => format!("steady, max variance {}", r.state.max_variance()),
            Err(e) => e.to_string(),
        };
        println!("{chi},{},{eig},{outcome}", threshold(&plus).chi_th);
    }
    Ok(())
}
