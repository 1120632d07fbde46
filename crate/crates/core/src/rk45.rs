//! Dormand-Prince 5(4) with a quartic continuous extension.
//!
//! The vector fields integrated here are polynomial (or trig-polynomial)
//! on each side of the switching plane, so an explicit embedded pair with
//! dense output is the right tool: no stiffness, and the interpolant gives
//! the event bisection something exact to chew on between steps.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A21: f64 = 0.2;
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// dense-output weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy)]
pub struct RkParams {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for RkParams {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step with its interpolant.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t_from: f64,
    pub t_to: f64,
    cont: [[f64; 5]; N],
}

impl<const N: usize> DenseStep<N> {
    /// Evaluate the quartic interpolant at `t` in [t_from, t_to].
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t_to - self.t_from;
        let s = (t - self.t_from) / h;
        let s1 = 1.0 - s;
        let mut y = [0.0; N];
        for (yi, c) in y.iter_mut().zip(&self.cont) {
            *yi = c[0] + s * (c[1] + s1 * (c[2] + s * (c[3] + s1 * c[4])));
        }
        y
    }
}

/// Stepwise driver so callers can watch crossings between accepted steps.
pub struct Dopri5<F, const N: usize>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    f: F,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    t_end: f64,
    params: RkParams,
    steps: usize,
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut f: F, t0: f64, y0: [f64; N], t_end: f64, params: RkParams) -> Self {
        assert!(t_end > t0, "integration runs forward");
        let k1 = f(t0, &y0);
        let span = t_end - t0;
        // crude opening guess; the controller settles within a couple of
        // steps, and micro-segments (restarts right before t_end) go through
        // as a single clipped step
        let h = span.min(0.1);
        Self {
            f,
            t: t0,
            y: y0,
            k1,
            h,
            t_end,
            params,
            steps: 0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn done(&self) -> bool {
        self.t >= self.t_end
    }

    /// Reset the state mid-integration (after an event) and refresh the
    /// cached derivative, which changes when the active field switches.
    pub fn restart(&mut self, t: f64, y: [f64; N]) {
        self.t = t;
        self.y = y;
        self.k1 = (self.f)(t, &y);
    }

    /// Advance by one accepted step (clipped at t_end).
    pub fn step(&mut self) -> Result<DenseStep<N>> {
        loop {
            self.steps += 1;
            if self.steps > self.params.max_steps {
                return Err(Error::Integration(format!(
                    "exceeded {} steps at t = {:.6e}",
                    self.params.max_steps, self.t
                )));
            }
            let remaining = self.t_end - self.t;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            if !clipped && h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::Integration(format!(
                    "step size collapsed at t = {:.6e}",
                    self.t
                )));
            }
            let t = self.t;
            let y = &self.y;
            let k1 = self.k1;
            let stage = |coeffs: &[(f64, [f64; N])]| {
                let mut out = *y;
                for (c, k) in coeffs {
                    for i in 0..N {
                        out[i] += h * c * k[i];
                    }
                }
                out
            };
            let k2 = (self.f)(t + C[1] * h, &stage(&[(A21, k1)]));
            let k3 = (self.f)(t + C[2] * h, &stage(&[(A31, k1), (A32, k2)]));
            let k4 = (self.f)(t + C[3] * h, &stage(&[(A41, k1), (A42, k2), (A43, k3)]));
            let k5 = (self.f)(
                t + C[4] * h,
                &stage(&[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]),
            );
            let k6 = (self.f)(
                t + C[5] * h,
                &stage(&[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]),
            );
            let y1 = stage(&[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
            let t1 = t + h;
            let k7 = (self.f)(t1, &y1);

            let mut err_sq = 0.0;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let scale = self.params.abs_tol
                    + self.params.rel_tol * self.y[i].abs().max(y1[i].abs());
                err_sq += (e / scale) * (e / scale);
            }
            let err = (err_sq / N as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration(format!(
                    "non-finite state at t = {:.6e}",
                    self.t
                )));
            }

            let factor = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };

            if err <= 1.0 {
                let mut cont = [[0.0; 5]; N];
                for i in 0..N {
                    let ydiff = y1[i] - self.y[i];
                    let bspl = h * k1[i] - ydiff;
                    cont[i] = [
                        self.y[i],
                        ydiff,
                        bspl,
                        -h * k7[i] + ydiff - bspl,
                        h * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]),
                    ];
                }
                // land on t_end exactly; a one-ulp remainder must not leak
                // into a follow-up micro-step
                let t1 = if clipped { self.t_end } else { t1 };
                let step = DenseStep {
                    t_from: t,
                    t_to: t1,
                    cont,
                };
                self.t = t1;
                self.y = y1;
                self.k1 = k7; // FSAL
                self.h *= factor;
                return Ok(step);
            }
            self.h = h * factor;
        }
    }
}

/// Integrate to t_end and return the final state.
pub fn integrate<F, const N: usize>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    params: RkParams,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut solver = Dopri5::new(f, t0, y0, t_end, params);
    while !solver.done() {
        solver.step()?;
    }
    Ok(*solver.y())
}
