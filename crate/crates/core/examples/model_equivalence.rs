//! The two drive schemes give identical pair covariance flows when the
//! detuning of one equals the coupling of the other.

use paramp_entangle::ode::OdeOptions;
use paramp_entangle::riccati::{pair_flow, PairCovariance};
use paramp_entangle::{reduce_to_pairs, DriveModel, OscillatorPairParams};

fn main() -> paramp_entangle::Result<()> {
    let params = OscillatorPairParams::symmetric(1.0, 5.0, 1.0, 6.0);
    let one = DriveModel::ModelOne { chi: 10.0, detuning: 8.0 };
    let two = DriveModel::ModelTwo { chi: 10.0, coupling: 8.0 };
    let (p1, m1) = reduce_to_pairs(&one, &params)?;
    let (u2, v2) = reduce_to_pairs(&two, &params)?;
    let times: Vec<f64> = (0..=20).map(f64::from).collect();
    let start = PairCovariance::isotropic(0.5);
    let mut worst = 0.0f64;
    for (a, b) in [(p1, u2), (m1, v2)] {
        let fa = pair_flow(&a, &params, &start, &times, OdeOptions::default())?;
        let fb = pair_flow(&b, &params, &start, &times, OdeOptions::default())?;
        for (x, y) in fa.iter().zip(&fb) {
            worst = worst.max((x.v_x - y.v_x).abs()).max((x.v_y - y.v_y).abs()).max((x.c - y.c).abs());
        }
    }
    println!("largest difference over t in [0, 20]: {worst:e}");
    Ok(())
}
