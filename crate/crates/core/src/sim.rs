//! Direct simulation of the perturbed piecewise-smooth system and the
//! verification loop closing the circle back to the averaged predictions.
//!
//! Two integration paths are kept deliberately distinct. The reduced path
//! integrates the scalar theta-parameterized radius equation and splits the
//! period analytically at theta = pi, where the switching angle is known
//! exactly; the vertical coordinate rides along as the exact slave
//! `z(theta) = z0 + I_h(theta)`. The Cartesian path integrates the full
//! three-dimensional field with genuine event detection on the plane y = 0
//! and serves as the independent cross-check of the change of variables.

use serde::Serialize;

use crate::averaging::PerturbationSpec;
use crate::error::{Error, Result};
use crate::locus::{LocusPoint, DEGENERACY_THRESHOLD};
use crate::profile::{CircleProfile, Half};
use crate::rk45::{Dopri5, RkParams};

/// Soft sanity bound on |epsilon|; the analysis is perturbative.
pub const DEFAULT_EPSILON_BOUND: f64 = 1.0;

/// Radius bound beyond which the reduced flow is declared divergent.
pub const DEFAULT_R_BOUND: f64 = 1e6;

/// Trajectories entering this neighborhood of the z-axis abort: the axis is
/// a line of tangency points where the crossing analysis breaks down.
pub const TANGENCY_GUARD: f64 = 1e-6;

/// Default epsilon sweep for convergence verification; smaller values drown
/// in integrator noise at the default tolerances.
pub const DEFAULT_EPSILONS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Relative convergence target for the fixed-point residual |P(r) - r|.
pub const FIXED_POINT_TOL: f64 = 1e-12;

const SECANT_MAX_ITERS: usize = 50;
const SECANT_SPREAD: f64 = 1e-3;
/// Crossing times are bisected to this relative resolution in t.
const EVENT_TIME_RTOL: f64 = 1e-12;
/// |y| below this (scaled) at t_end counts as a boundary crossing; the exact
/// flow crosses exactly at the period and the integrator lands within noise
/// of it on either side.
const TERMINAL_TOUCH_TOL: f64 = 1e-8;
const MAX_EVENTS: usize = 10_000;

#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub r_bound: f64,
    pub guard_radius: f64,
    pub max_steps: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            r_bound: DEFAULT_R_BOUND,
            guard_radius: TANGENCY_GUARD,
            max_steps: 1_000_000,
        }
    }
}

impl SimParams {
    fn rk(&self) -> RkParams {
        RkParams {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_steps: self.max_steps,
        }
    }
}

/// Which side of the switching plane y = 0 the flow currently uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn half(self) -> Half {
        match self {
            Side::Plus => Half::Plus,
            Side::Minus => Half::Minus,
        }
    }

    pub fn signum(self) -> i8 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CartState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartState {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn to_cyl(&self) -> Result<CylState> {
        CylState::new(self.radius(), self.y.atan2(self.x), self.z)
    }
}

/// Cylindrical state off the z-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylState {
    pub r: f64,
    pub theta: f64,
    pub z: f64,
}

impl CylState {
    pub fn new(r: f64, theta: f64, z: f64) -> Result<Self> {
        if r <= 0.0 {
            return Err(Error::NonPositiveRadius(r));
        }
        Ok(Self { r, theta, z })
    }

    pub fn to_cart(&self) -> CartState {
        let (s, c) = self.theta.sin_cos();
        CartState::new(self.r * c, self.r * s, self.z)
    }
}

/// The full perturbed system: profile, two-sided perturbation, and epsilon.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    profile: CircleProfile,
    pert: PerturbationSpec,
    epsilon: f64,
}

impl SystemSpec {
    pub fn new(profile: CircleProfile, pert: PerturbationSpec, epsilon: f64) -> Result<Self> {
        Self::with_epsilon_bound(profile, pert, epsilon, DEFAULT_EPSILON_BOUND)
    }

    pub fn with_epsilon_bound(
        profile: CircleProfile,
        pert: PerturbationSpec,
        epsilon: f64,
        bound: f64,
    ) -> Result<Self> {
        profile.require_periodic()?;
        if epsilon.abs() >= bound {
            return Err(Error::EpsilonOutOfBounds(epsilon.abs(), bound));
        }
        Ok(Self {
            profile,
            pert,
            epsilon,
        })
    }

    pub fn profile(&self) -> &CircleProfile {
        &self.profile
    }

    pub fn pert(&self) -> &PerturbationSpec {
        &self.pert
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Integrate dr/dtheta = eps * r * Psi_side(r cos t, r sin t, z0 + I_h(t))
/// over a full revolution, switching fields exactly at theta = pi.
/// Returns r(2*pi).
pub fn reduced_flow(spec: &SystemSpec, r_start: f64, z0: f64, params: &SimParams) -> Result<f64> {
    if r_start <= 0.0 {
        return Err(Error::NonPositiveRadius(r_start));
    }
    let pi = std::f64::consts::PI;
    let mut r = r_start;
    for (side, a, b) in [(Side::Plus, 0.0, pi), (Side::Minus, pi, 2.0 * pi)] {
        let eps = spec.epsilon;
        let rhs = |theta: f64, y: &[f64; 1]| {
            let (s, c) = theta.sin_cos();
            let z = z0 + spec.profile.integral(theta);
            [eps * y[0] * spec.pert.eval(side.half(), y[0] * c, y[0] * s, z)]
        };
        let mut solver = Dopri5::new(rhs, a, [r], b, params.rk());
        while !solver.done() {
            solver.step()?;
            let current = solver.y()[0];
            if current <= 0.0 || current > params.r_bound {
                return Err(Error::RadiusOutOfBounds { r: current });
            }
        }
        r = solver.y()[0];
    }
    Ok(r)
}

/// A crossing of the switching plane located by bisection on the dense
/// interpolant (or flagged at the final time when the trajectory lands on
/// the plane there).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CrossingEvent {
    pub t: f64,
    pub state: CartState,
    pub from: Side,
    pub to: Side,
    /// One-sided values of ydot = x + eps * y * Psi at the event; a genuine
    /// crossing has both on the same side of zero.
    pub ydot_plus: f64,
    pub ydot_minus: f64,
    pub crossing_ok: bool,
    /// True for the boundary-touch record at t_end; those are not bisected.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajSample {
    pub t: f64,
    pub state: CartState,
    pub side: Side,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub samples: Vec<TrajSample>,
    pub events: Vec<CrossingEvent>,
}

impl Trajectory {
    pub fn end_state(&self) -> CartState {
        self.samples.last().expect("trajectory never empty").state
    }
}

fn cart_rhs(spec: &SystemSpec, side: Side) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] + '_ {
    let eps = spec.epsilon;
    move |_t: f64, s: &[f64; 3]| {
        let [x, y, z] = *s;
        let psi = spec.pert.eval(side.half(), x, y, z);
        let rho = x.hypot(y);
        let h = spec.profile.eval_at_cos_sin(x / rho, y / rho);
        [-y + eps * x * psi, x + eps * y * psi, h]
    }
}

fn ydots(spec: &SystemSpec, state: &CartState) -> (f64, f64) {
    let plus = state.x + spec.epsilon * state.y * spec.pert.eval(Half::Plus, state.x, state.y, state.z);
    let minus =
        state.x + spec.epsilon * state.y * spec.pert.eval(Half::Minus, state.x, state.y, state.z);
    (plus, minus)
}

/// Integrate the full Cartesian system with event detection on y = 0.
/// Crossing times are bisected on the dense output, the active field switches
/// by the push direction sign(x), and any approach to the tangency line
/// {x = 0, y = 0} aborts with a diagnostic.
pub fn cartesian_flow(
    spec: &SystemSpec,
    start: CartState,
    t_end: f64,
    params: &SimParams,
) -> Result<Trajectory> {
    if t_end <= 0.0 {
        return Err(Error::InvalidRange(format!("t_end must be positive (got {t_end})")));
    }
    if start.radius() <= params.guard_radius {
        return Err(Error::TangencyGuard {
            t: 0.0,
            guard: params.guard_radius,
        });
    }

    let mut side = if start.y > 0.0 {
        Side::Plus
    } else if start.y < 0.0 {
        Side::Minus
    } else {
        // on the plane: the push direction decides, and x = 0 is tangency
        if start.x.abs() <= params.guard_radius {
            return Err(Error::TangencyGuard {
                t: 0.0,
                guard: params.guard_radius,
            });
        }
        if start.x > 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    };

    let mut samples = vec![TrajSample {
        t: 0.0,
        state: start,
        side,
    }];
    let mut events: Vec<CrossingEvent> = Vec::new();
    let mut t = 0.0;
    let mut state = [start.x, start.y, start.z];

    'segments: while t < t_end {
        let rhs = cart_rhs(spec, side);
        let mut solver = Dopri5::new(rhs, t, state, t_end, params.rk());
        loop {
            let y_prev = solver.y()[1];
            let step = solver.step()?;
            let after = *solver.y();
            if after[0].hypot(after[1]) <= params.guard_radius {
                return Err(Error::TangencyGuard {
                    t: solver.t(),
                    guard: params.guard_radius,
                });
            }
            let crossed = y_prev * after[1] < 0.0 || (after[1] == 0.0 && y_prev != 0.0);
            if crossed {
                if events.len() >= MAX_EVENTS {
                    return Err(Error::Integration(format!(
                        "exceeded {MAX_EVENTS} switching events"
                    )));
                }
                let (t_ev, mut s_ev) = locate_crossing(&step, y_prev);
                s_ev[1] = 0.0;
                if s_ev[0].abs() <= params.guard_radius {
                    return Err(Error::TangencyGuard {
                        t: t_ev,
                        guard: params.guard_radius,
                    });
                }
                let ev_state = CartState::new(s_ev[0], s_ev[1], s_ev[2]);
                let (ydot_plus, ydot_minus) = ydots(spec, &ev_state);
                let to = if s_ev[0] > 0.0 { Side::Plus } else { Side::Minus };
                events.push(CrossingEvent {
                    t: t_ev,
                    state: ev_state,
                    from: side,
                    to,
                    ydot_plus,
                    ydot_minus,
                    crossing_ok: ydot_plus * ydot_minus > 0.0,
                    terminal: false,
                });
                side = to;
                t = t_ev;
                state = s_ev;
                if t_end - t <= 1e-12 * t_end.abs().max(1.0) {
                    break 'segments;
                }
                continue 'segments;
            }
            samples.push(TrajSample {
                t: solver.t(),
                state: CartState::new(after[0], after[1], after[2]),
                side,
            });
            if solver.done() {
                t = solver.t();
                state = after;
                break 'segments;
            }
        }
    }

    let final_state = CartState::new(state[0], state[1], state[2]);
    if samples.last().map(|s| s.t) != Some(t) {
        samples.push(TrajSample {
            t,
            state: final_state,
            side,
        });
    }

    // crossing exactly at t_end: the flow touches the plane at the boundary
    let touch_scale = TERMINAL_TOUCH_TOL * final_state.radius().max(1.0);
    let near_last_event = events
        .last()
        .is_some_and(|e| (t_end - e.t).abs() <= 1e-6 * t_end.abs().max(1.0));
    if final_state.y.abs() <= touch_scale
        && !near_last_event
        && final_state.x.abs() > params.guard_radius
    {
        let (ydot_plus, ydot_minus) = ydots(spec, &final_state);
        let to = if final_state.x > 0.0 { Side::Plus } else { Side::Minus };
        events.push(CrossingEvent {
            t,
            state: final_state,
            from: side,
            to,
            ydot_plus,
            ydot_minus,
            crossing_ok: ydot_plus * ydot_minus > 0.0,
            terminal: true,
        });
    }

    Ok(Trajectory { samples, events })
}

fn locate_crossing(step: &crate::rk45::DenseStep<3>, y_prev: f64) -> (f64, [f64; 3]) {
    let mut lo = step.t_from;
    let mut hi = step.t_to;
    let from_positive = y_prev > 0.0;
    for _ in 0..200 {
        if hi - lo <= EVENT_TIME_RTOL * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let ym = step.eval(mid)[1];
        if ym == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (ym > 0.0) == from_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_ev = 0.5 * (lo + hi);
    (t_ev, step.eval(t_ev))
}

/// First-return map on the section theta = 0: the radius comes from the
/// reduced flow and z returns to z0 identically because I_h(2*pi) = 0.
pub fn poincare_map(spec: &SystemSpec, r: f64, z0: f64, params: &SimParams) -> Result<(f64, f64)> {
    Ok((reduced_flow(spec, r, z0, params)?, z0))
}

/// Solve P(r) = r by secant iteration seeded near the guess.
pub fn find_fixed_point(
    spec: &SystemSpec,
    z0: f64,
    r_guess: f64,
    params: &SimParams,
) -> Result<f64> {
    if r_guess <= 0.0 {
        return Err(Error::NonPositiveRadius(r_guess));
    }
    if spec.epsilon == 0.0 {
        return Err(Error::DegenerateReturnMap);
    }
    let displacement = |r: f64| -> Result<f64> {
        Ok(reduced_flow(spec, r, z0, params)? - r)
    };
    let mut r0 = r_guess;
    let mut r1 = r_guess * (1.0 + SECANT_SPREAD);
    let mut f0 = displacement(r0)?;
    let mut f1 = displacement(r1)?;
    for _ in 0..SECANT_MAX_ITERS {
        if f1.abs() <= FIXED_POINT_TOL * r1.abs().max(1.0) {
            return Ok(r1);
        }
        let denom = f1 - f0;
        if denom == 0.0 {
            break;
        }
        let r2 = r1 - f1 * (r1 - r0) / denom;
        if !(r2 > 0.0 && r2 < params.r_bound) {
            return Err(Error::IterateOutOfBounds {
                r: r2,
                bound: params.r_bound,
            });
        }
        r0 = r1;
        f0 = f1;
        r1 = r2;
        f1 = displacement(r1)?;
    }
    if f1.abs() <= FIXED_POINT_TOL * r1.abs().max(1.0) {
        Ok(r1)
    } else {
        Err(Error::NoConvergence {
            iters: SECANT_MAX_ITERS,
            residual: f1.abs(),
        })
    }
}

/// Convergence record of the periodic orbit's initial radius toward the
/// averaged prediction as epsilon shrinks.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub z0: f64,
    pub predicted_r0: f64,
    pub epsilons: Vec<f64>,
    pub fixed_points: Vec<Option<f64>>,
    pub errors: Vec<Option<f64>>,
    pub failures: Vec<Option<String>>,
    /// Log-log regression slope of error against epsilon over the successful
    /// entries; about 1 at a nondegenerate zero.
    pub convergence_order: Option<f64>,
}

/// Sweep epsilon, locate the periodic orbit near the locus point at each
/// value, and regress the convergence order. Individual fixed-point failures
/// are recorded, not fatal.
pub fn verify_prediction(
    profile: &CircleProfile,
    pert: &PerturbationSpec,
    point: &LocusPoint,
    epsilons: &[f64],
    params: &SimParams,
) -> Result<VerificationReport> {
    if point.dpsi_dr.abs() <= DEGENERACY_THRESHOLD {
        return Err(Error::DegeneratePoint {
            dpsi_dr: point.dpsi_dr,
            threshold: DEGENERACY_THRESHOLD,
        });
    }
    if epsilons.is_empty() || epsilons.iter().any(|&e| e == 0.0) {
        return Err(Error::InvalidRange(
            "epsilon list must be non-empty and nonzero".into(),
        ));
    }
    if epsilons.windows(2).any(|w| w[0].abs() <= w[1].abs()) {
        return Err(Error::InvalidRange(
            "epsilon list must be sorted by decreasing magnitude".into(),
        ));
    }

    let mut fixed_points = Vec::with_capacity(epsilons.len());
    let mut errors = Vec::with_capacity(epsilons.len());
    let mut failures = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        match SystemSpec::new(profile.clone(), pert.clone(), eps)
            .and_then(|spec| find_fixed_point(&spec, point.z0, point.r0, params))
        {
            Ok(r_star) => {
                fixed_points.push(Some(r_star));
                errors.push(Some((r_star - point.r0).abs()));
                failures.push(None);
            }
            Err(e) => {
                fixed_points.push(None);
                errors.push(None);
                failures.push(Some(e.to_string()));
            }
        }
    }

    let pairs: Vec<(f64, f64)> = epsilons
        .iter()
        .zip(&errors)
        .filter_map(|(&eps, err)| err.and_then(|e| (e > 0.0).then(|| (eps.abs().ln(), e.ln()))))
        .collect();
    let convergence_order = if pairs.len() >= 2 {
        let n = pairs.len() as f64;
        let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };

    Ok(VerificationReport {
        z0: point.z0,
        predicted_r0: point.r0,
        epsilons: epsilons.to_vec(),
        fixed_points,
        errors,
        failures,
        convergence_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{
        averaged_closed_form, example1_perturbation, example2_perturbation,
    };
    use crate::locus::{roots_at_slice, LocusParams};
    use std::f64::consts::{PI, TAU};

    fn example1_spec(eps: f64) -> SystemSpec {
        SystemSpec::new(CircleProfile::zero(), example1_perturbation(), eps).unwrap()
    }

    fn example2_spec(eps: f64) -> SystemSpec {
        SystemSpec::new(CircleProfile::cos_theta(), example2_perturbation(), eps).unwrap()
    }

    /// The degree-2 fixture has an exact return map:
    /// on [0, pi]   dr/dt = eps r^2 sin(t)/2  =>  r(pi) = r/(1 - eps r),
    /// on [pi, 2pi] dr/dt = -eps r z0/pi      =>  r(2pi) = r(pi) e^(-eps z0).
    fn example1_exact_map(r: f64, z0: f64, eps: f64) -> f64 {
        r / (1.0 - eps * r) * (-eps * z0).exp()
    }

    #[test]
    fn reduced_flow_identity_at_zero_epsilon() {
        let spec = example1_spec(0.0);
        let r = reduced_flow(&spec, 1.7182818, 0.3, &SimParams::default()).unwrap();
        assert_eq!(r, 1.7182818);
    }

    #[test]
    fn reduced_flow_matches_exact_map() {
        let params = SimParams::default();
        let eps = 1e-3;
        let spec = example1_spec(eps);
        for (r, z0) in [(2.0, 2.0), (1.0, 2.0), (0.7, -1.2), (3.1, 0.4)] {
            let got = reduced_flow(&spec, r, z0, &params).unwrap();
            let want = example1_exact_map(r, z0, eps);
            assert!(
                (got - want).abs() < 1e-9,
                "map({r}, {z0}) = {got}, exact {want}"
            );
        }
    }

    #[test]
    fn reduced_flow_fixed_point_residual_is_second_order() {
        let params = SimParams::default();
        for eps in [1e-3, 1e-4] {
            let spec = example1_spec(eps);
            let r = reduced_flow(&spec, 2.0, 2.0, &params).unwrap();
            assert!(
                (r - 2.0).abs() <= 10.0 * eps * eps,
                "residual {} at eps {eps}",
                (r - 2.0).abs()
            );
        }
    }

    #[test]
    fn reduced_flow_first_order_displacement() {
        // off the locus the displacement tracks eps * psi(r, z0)
        let params = SimParams::default();
        let eps = 1e-3;
        let spec = example1_spec(eps);
        let r = reduced_flow(&spec, 1.0, 2.0, &params).unwrap();
        let psi = -1.0; // r(r - z0) at (1, 2)
        assert!(r < 1.0);
        assert!((r - 1.0 - eps * psi).abs() <= 5.0 * eps * eps);
    }

    #[test]
    fn poincare_returns_z0_exactly() {
        let spec = example2_spec(1e-3);
        let (_, z) = poincare_map(&spec, 3.0, 0.25, &SimParams::default()).unwrap();
        assert_eq!(z, 0.25);
    }

    #[test]
    fn poincare_identity_at_zero_epsilon() {
        let spec = example2_spec(0.0);
        let (r, z) = poincare_map(&spec, 2.9, -0.4, &SimParams::default()).unwrap();
        assert_eq!((r, z), (2.9, -0.4));
    }

    #[test]
    fn poincare_displacement_on_and_off_locus() {
        let params = SimParams::default();
        let eps = 1e-4;
        let spec = example2_spec(eps);
        // on the locus (z0 = 0.5 gives exact roots 2.5 and 3.5)
        let (r, _) = poincare_map(&spec, 3.5, 0.5, &params).unwrap();
        assert!((r - 3.5).abs() <= 100.0 * eps * eps, "on-locus displacement {}", (r - 3.5).abs());
        // off the locus the sign of the displacement follows eps * psi
        let poly = averaged_closed_form(&spec.pert, &spec.profile).unwrap();
        let psi = poly.eval(3.0, 0.5).unwrap(); // negative inside the circle
        let (r, _) = poincare_map(&spec, 3.0, 0.5, &params).unwrap();
        assert!(psi < 0.0 && r < 3.0);
        assert!((r - 3.0 - eps * psi).abs() <= 100.0 * eps * eps);
    }

    #[test]
    fn fixed_point_example1() {
        let params = SimParams::default();
        let eps = 1e-3;
        let spec = example1_spec(eps);
        let r_star = find_fixed_point(&spec, 2.0, 2.1, &params).unwrap();
        assert!((r_star - 2.0).abs() <= 0.05);
        // exact: r* = (1 - e^(-2 eps)) / eps
        let exact = (1.0 - (-2.0 * eps).exp()) / eps;
        assert!((r_star - exact).abs() < 1e-7, "r* = {r_star}, exact {exact}");
        // residual at the solution meets the convergence contract
        let (mapped, _) = poincare_map(&spec, r_star, 2.0, &params).unwrap();
        assert!((mapped - r_star).abs() <= FIXED_POINT_TOL * r_star.max(1.0) * 1.01);
    }

    #[test]
    fn fixed_point_error_scales_linearly() {
        let params = SimParams::default();
        let e3 = find_fixed_point(&example1_spec(1e-3), 2.0, 2.0, &params).unwrap();
        let e4 = find_fixed_point(&example1_spec(1e-4), 2.0, 2.0, &params).unwrap();
        let ratio = (e3 - 2.0).abs() / (e4 - 2.0).abs();
        assert!((ratio - 10.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn fixed_point_rejects_zero_epsilon() {
        assert!(matches!(
            find_fixed_point(&example1_spec(0.0), 2.0, 2.0, &SimParams::default()),
            Err(Error::DegenerateReturnMap)
        ));
    }

    #[test]
    fn epsilon_bound_enforced() {
        assert!(matches!(
            SystemSpec::new(CircleProfile::zero(), example1_perturbation(), 2.0),
            Err(Error::EpsilonOutOfBounds(..))
        ));
        assert!(SystemSpec::with_epsilon_bound(
            CircleProfile::zero(),
            example1_perturbation(),
            2.0,
            10.0
        )
        .is_ok());
    }

    #[test]
    fn cartesian_unperturbed_circle() {
        let spec = example1_spec(0.0);
        let traj = cartesian_flow(&spec, CartState::new(1.0, 0.0, 0.0), TAU, &SimParams::default())
            .unwrap();
        let end = traj.end_state();
        assert!((end.x - 1.0).abs() < 1e-8);
        assert!(end.y.abs() < 1e-8);
        assert!(end.z.abs() < 1e-12);
        assert_eq!(traj.events.len(), 2, "crossings at pi and 2 pi");
        assert!((traj.events[0].t - PI).abs() < 1e-9);
        assert!((traj.events[1].t - TAU).abs() < 1e-6);
        for s in &traj.samples {
            assert!((s.state.x.powi(2) + s.state.y.powi(2) - 1.0).abs() < 1e-9);
        }
        for e in &traj.events {
            assert!(e.crossing_ok);
            if !e.terminal {
                assert!(e.state.y.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn cartesian_z_rides_the_sine_arc() {
        let spec = SystemSpec::new(CircleProfile::cos_theta(), example2_perturbation(), 0.0)
            .unwrap();
        let params = SimParams::default();
        let quarter = cartesian_flow(&spec, CartState::new(1.0, 0.0, 0.0), PI / 2.0, &params)
            .unwrap();
        assert!((quarter.end_state().z - 1.0).abs() < 1e-9);
        let full = cartesian_flow(&spec, CartState::new(1.0, 0.0, 0.0), TAU, &params).unwrap();
        let end = full.end_state();
        assert!((end.x - 1.0).abs() < 1e-8);
        assert!(end.y.abs() < 1e-8);
        assert!(end.z.abs() < 1e-8);
    }

    #[test]
    fn cartesian_example1_near_periodic_orbit() {
        let eps = 1e-3;
        let spec = example1_spec(eps);
        let traj = cartesian_flow(&spec, CartState::new(2.0, 0.0, 2.0), TAU, &SimParams::default())
            .unwrap();
        let end = traj.end_state();
        let dist = ((end.x - 2.0).powi(2) + end.y.powi(2) + (end.z - 2.0).powi(2)).sqrt();
        assert!(dist <= 10.0 * eps * eps, "endpoint distance {dist}");
    }

    #[test]
    fn cartesian_matches_reduced_over_one_revolution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let params = SimParams::default();
        for trial in 0..3 {
            let profile = if trial % 2 == 0 {
                CircleProfile::cos_theta()
            } else {
                CircleProfile::zero()
            };
            let degree = 3;
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            for i in 0..degree {
                for j in 0..degree - i {
                    for k in 0..degree - i - j {
                        plus.push(((i, j, k), rng.gen_range(-1.0..1.0)));
                        minus.push(((i, j, k), rng.gen_range(-1.0..1.0)));
                    }
                }
            }
            let pert = PerturbationSpec::new(degree, plus, minus).unwrap();
            let eps = rng.gen_range(-5e-3..5e-3);
            let r0 = rng.gen_range(0.5..2.0);
            let z0 = rng.gen_range(-1.0..1.0);
            let spec = SystemSpec::new(profile, pert, eps).unwrap();
            let traj = cartesian_flow(&spec, CartState::new(r0, 0.0, z0), TAU, &params).unwrap();
            let r_cart = traj.end_state().radius();
            let r_reduced = reduced_flow(&spec, r0, z0, &params).unwrap();
            assert!(
                (r_cart - r_reduced).abs() < 1e-9,
                "trial {trial}: cart {r_cart} vs reduced {r_reduced}"
            );
        }
    }

    #[test]
    fn tangency_guard_fires() {
        let spec = example1_spec(1e-3);
        let params = SimParams::default();
        assert!(matches!(
            cartesian_flow(&spec, CartState::new(0.0, 0.0, 1.0), 1.0, &params),
            Err(Error::TangencyGuard { .. })
        ));
        assert!(matches!(
            cartesian_flow(&spec, CartState::new(1e-8, 0.0, 0.0), 1.0, &params),
            Err(Error::TangencyGuard { .. })
        ));
    }

    #[test]
    fn stability_follows_derivative_sign() {
        let params = SimParams::default();
        let h = 1e-5;
        // Example 1 at (2, 2): dpsi/dr = 2 > 0, eps > 0 => repelling
        let eps = 1e-3;
        let spec = example1_spec(eps);
        let r_star = find_fixed_point(&spec, 2.0, 2.0, &params).unwrap();
        let p_hi = reduced_flow(&spec, r_star + h, 2.0, &params).unwrap();
        let p_lo = reduced_flow(&spec, r_star - h, 2.0, &params).unwrap();
        let p_prime = (p_hi - p_lo) / (2.0 * h);
        assert!(p_prime.abs() > 1.0);

        // Example 2 inner branch at z0 = 0.5: dpsi/dr = -2.5 < 0 => contracting
        let spec = example2_spec(eps);
        let r_star = find_fixed_point(&spec, 0.5, 2.5, &params).unwrap();
        let p_hi = reduced_flow(&spec, r_star + h, 0.5, &params).unwrap();
        let p_lo = reduced_flow(&spec, r_star - h, 0.5, &params).unwrap();
        let p_prime = (p_hi - p_lo) / (2.0 * h);
        assert!(p_prime.abs() < 1.0);
    }

    #[test]
    fn verify_prediction_example1() {
        let point = roots_at_slice(
            &averaged_closed_form(&example1_perturbation(), &CircleProfile::zero()).unwrap(),
            2.0,
            10.0,
            &LocusParams::default(),
        )
        .unwrap()
        .points[0];
        let report = verify_prediction(
            &CircleProfile::zero(),
            &example1_perturbation(),
            &point,
            &[1e-2, 1e-3],
            &SimParams::default(),
        )
        .unwrap();
        let errs: Vec<f64> = report.errors.iter().map(|e| e.unwrap()).collect();
        assert!(errs[0] < 0.1 && errs[1] < errs[0]);
        let slope = report.convergence_order.unwrap();
        assert!((0.8..=1.5).contains(&slope), "slope {slope}");
    }

    #[test]
    fn verify_prediction_example2_outer_stability() {
        // outer-branch point at z0 = 0: slope in window; the fixed point is
        // repelling for eps > 0 (stability sign = -brouwer_sign)
        let poly =
            averaged_closed_form(&example2_perturbation(), &CircleProfile::cos_theta()).unwrap();
        let point = roots_at_slice(&poly, 0.0, 10.0, &LocusParams::default()).unwrap().points[1];
        assert_eq!(point.brouwer_sign, 1);
        let report = verify_prediction(
            &CircleProfile::cos_theta(),
            &example2_perturbation(),
            &point,
            &[1e-2, 1e-3],
            &SimParams::default(),
        )
        .unwrap();
        let slope = report.convergence_order.unwrap();
        assert!((0.8..=1.5).contains(&slope), "slope {slope}");
        let params = SimParams::default();
        let spec = example2_spec(1e-3);
        let r_star = report.fixed_points[1].unwrap();
        let h = 1e-5;
        let p_hi = reduced_flow(&spec, r_star + h, 0.0, &params).unwrap();
        let p_lo = reduced_flow(&spec, r_star - h, 0.0, &params).unwrap();
        assert!(((p_hi - p_lo) / (2.0 * h)).abs() > 1.0);
    }

    #[test]
    fn verify_rejects_degenerate_and_bad_epsilons() {
        let point = LocusPoint {
            z0: 0.0,
            r0: 1.0,
            dpsi_dr: 1e-9,
            brouwer_sign: 1,
        };
        assert!(matches!(
            verify_prediction(
                &CircleProfile::zero(),
                &example1_perturbation(),
                &point,
                &[1e-2],
                &SimParams::default()
            ),
            Err(Error::DegeneratePoint { .. })
        ));
        let good = LocusPoint {
            z0: 2.0,
            r0: 2.0,
            dpsi_dr: 2.0,
            brouwer_sign: 1,
        };
        for bad in [vec![], vec![0.0], vec![1e-3, 1e-2]] {
            assert!(verify_prediction(
                &CircleProfile::zero(),
                &example1_perturbation(),
                &good,
                &bad,
                &SimParams::default()
            )
            .is_err());
        }
    }

    #[test]
    fn cyl_cart_round_trip() {
        let cyl = CylState::new(2.5, 1.1, -0.3).unwrap();
        let back = cyl.to_cart().to_cyl().unwrap();
        assert!((back.r - 2.5).abs() < 1e-14);
        assert!((back.theta - 1.1).abs() < 1e-14);
        assert!(CylState::new(0.0, 0.0, 0.0).is_err());
    }
}
