//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.
//!
//! Steps are rejected when the local error estimate is too large or when the
//! caller's invariant check fails on the proposed state; in both cases the
//! step is retried with a smaller `h`.

use nalgebra::SVector;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; `None` picks one from the initial derivative.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub h_min: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            h_min: 1e-14,
        }
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integration state. The right-hand side is passed to each call of
/// [`Dopri5::step`] so the integrator itself owns no closures.
#[derive(Clone, Debug)]
pub struct Dopri5<const N: usize> {
    t: f64,
    y: SVector<f64, N>,
    dydt: SVector<f64, N>,
    h: f64,
    opts: OdeOptions,
    accepted: usize,
    rejected: usize,
}

impl<const N: usize> Dopri5<N> {
    pub fn new<F>(f: &F, t0: f64, y0: SVector<f64, N>, opts: OdeOptions) -> Self
    where
        F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
    {
        let dydt = f(t0, &y0);
        let h = opts.h_init.unwrap_or_else(|| {
            let scale = y0.abs().add_scalar(opts.atol / opts.rtol.max(1e-300));
            let d0 = y0.component_div(&scale).amax();
            let d1 = dydt.component_div(&scale).amax();
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            }
        });
        Self {
            t: t0,
            y: y0,
            dydt,
            h: h.min(opts.h_max),
            opts,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &SVector<f64, N> {
        &self.y
    }

    /// Derivative at the current state (first-same-as-last stage).
    pub fn dydt(&self) -> &SVector<f64, N> {
        &self.dydt
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Takes one accepted step, never stepping past `t_end`. `valid` is
    /// consulted on every candidate state; returning `false` rejects it.
    pub fn step<F, V>(&mut self, f: &F, valid: &V, t_end: f64) -> Result<()>
    where
        F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
        V: Fn(&SVector<f64, N>) -> bool,
    {
        let remaining = t_end - self.t;
        if remaining <= 4.0 * f64::EPSILON * self.t.abs().max(t_end.abs()).max(1.0) {
            self.t = t_end;
            return Ok(());
        }
        loop {
            let mut h = self.h.min(self.opts.h_max);
            // absorb a sliver that would otherwise force a tiny final step
            let last = self.t + 1.01 * h >= t_end;
            if last {
                h = t_end - self.t;
            }
            if h < self.opts.h_min * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }

            let (t, y, k1) = (self.t, &self.y, &self.dydt);
            let k2 = f(t + C2 * h, &(y + k1 * (A21 * h)));
            let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
            let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
            let k5 = f(
                t + C5 * h,
                &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
            );
            let k6 = f(
                t + h,
                &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
            );
            let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let t_new = if last { t_end } else { t + h };
            let k7 = f(t_new, &y_new);
            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;

            let mut err = 0.0f64;
            for i in 0..N {
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((err_vec[i] / sc).abs());
            }

            if !err.is_finite() {
                self.rejected += 1;
                self.h = 0.25 * h;
                continue;
            }
            if err <= 1.0 {
                if !valid(&y_new) {
                    self.rejected += 1;
                    self.h = 0.5 * h;
                    continue;
                }
                self.t = t_new;
                self.y = y_new;
                self.dydt = k7;
                self.accepted += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // keep the pre-truncation step so hitting t_end does not shrink h
                self.h = if last { self.h.max(h * factor) } else { h * factor };
                return Ok(());
            }
            self.rejected += 1;
            self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
        }
    }

    /// Integrates to `t_end`, calling `observe` after each accepted step.
    pub fn integrate_to<F, V, O>(&mut self, f: &F, valid: &V, t_end: f64, mut observe: O) -> Result<()>
    where
        F: Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
        V: Fn(&SVector<f64, N>) -> bool,
        O: FnMut(f64, &SVector<f64, N>),
    {
        while self.t < t_end {
            self.step(f, valid, t_end)?;
            observe(self.t, &self.y);
        }
        Ok(())
    }
}
