//! Steady-state separability at one operating point, from the closed form,
//! the Newton root and the integrated Riccati flow.

use paramp_entangle::closedform::{separability, separability_riccati, snr};
use paramp_entangle::riccati::{integrate_pair_to_steady, PairCovariance, SteadyOptions};
use paramp_entangle::{reduce_to_pairs, v0, DriveModel, OscillatorPairParams};

fn main() -> paramp_entangle::Result<()> {
    let params = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 6.0);
    let drive = DriveModel::ModelOne {
        chi: 25.0,
        detuning: 624f64.sqrt(),
    };
    let (plus, minus) = reduce_to_pairs(&drive, &params)?;

    let closed = separability(&plus, &minus, &params)?;
    let newton = separability_riccati(&plus, &minus, &params)?;
    let flow = integrate_pair_to_steady(
        &plus,
        &params,
        &PairCovariance::isotropic(v0(&params)),
        &SteadyOptions::default(),
    )?;

    println!("SNR                 {}", snr(&params));
    println!("S (closed form)     {}", closed.s);
    println!("S (Newton)          {}", newton.s);
    println!("S (integrated)      {}", 2.0 * flow.state.min_variance());
    println!("E_N                 {:?}", closed.log_negativity);
    println!("alpha (plus/minus)  {} / {}", closed.alpha, closed.alpha_minus);
    println!("converged at t      {}", flow.t_converged);
    println!("min V_X V_Y - C^2   {}", flow.min_uncertainty);
    Ok(())
}
