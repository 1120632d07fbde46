//! The nonlinearity `h` restricted to the unit circle, its running integral
//! `I_h`, and the half-period moment integrals that feed the averaging
//! formulas.
//!
//! Radius independence of `h` makes the circle restriction a complete
//! description: `h(r cos t, r sin t) = h(cos t, sin t)`, so a finite
//! polynomial in `(cos t, sin t)` is all the machinery ever needs. The
//! averaged constructions only require the slaved vertical coordinate
//! `z(t) = z0 + I_h(t)` to be 2*pi-periodic, which is checked through the
//! operative condition `I_h(2*pi) = 0` rather than through any structural
//! test on `h` itself.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, default_rule, integrate_to_tol};

/// Absolute bound on |I_h(2*pi)| under which a profile counts as periodic.
/// Sits above quadrature noise but rejects a constant h of any magnitude
/// worth worrying about.
pub const PERIODICITY_TOL: f64 = 1e-9;

/// Default stop target for the moment quadratures.
pub const DEFAULT_QUAD_TOL: f64 = quad::DEFAULT_TOL;

/// Panels per period in the precomputed I_h grid.
const GRID_PANELS: usize = 4096;

/// Which half-period a moment integral covers: [0, pi] where the "+" field
/// acts, or [pi, 2*pi] where the "-" field acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Half {
    Plus,
    Minus,
}

impl Half {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Half::Plus => (0.0, 0.5 * TAU),
            Half::Minus => (0.5 * TAU, TAU),
        }
    }
}

/// `h` on the unit circle as a finite sum of `coeff * cos^p(t) * sin^q(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct CircleProfile {
    terms: BTreeMap<(u32, u32), f64>,
    /// I_h at theta_k = 2*pi*k/GRID_PANELS, k = 0..=GRID_PANELS. Off-grid
    /// evaluation adds a single-panel correction on top of the nearest
    /// grid value below, so lookups stay O(1) inside the averaging loops.
    grid: Vec<f64>,
    quad_tol: f64,
}

impl CircleProfile {
    /// Build a profile from `((cos_power, sin_power), coeff)` terms.
    /// Duplicate exponent pairs accumulate; exact-zero coefficients are dropped.
    pub fn new<I: IntoIterator<Item = ((u32, u32), f64)>>(terms: I) -> Self {
        let mut map: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (key, coeff) in terms {
            *map.entry(key).or_insert(0.0) += coeff;
        }
        map.retain(|_, c| *c != 0.0);
        let mut profile = Self {
            terms: map,
            grid: Vec::new(),
            quad_tol: DEFAULT_QUAD_TOL,
        };
        profile.grid = profile.build_grid();
        profile
    }

    /// h identically zero.
    pub fn zero() -> Self {
        Self::new([])
    }

    /// h(cos t, sin t) = cos t, the restriction of x/sqrt(x^2+y^2).
    pub fn cos_theta() -> Self {
        Self::new([((1, 0), 1.0)])
    }

    /// Constant h = k; never periodic for k != 0 and useful as the canonical
    /// rejected input.
    pub fn constant(k: f64) -> Self {
        Self::new([((0, 0), k)])
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Self {
        assert!(tol > 0.0, "quadrature tolerance must be positive");
        self.quad_tol = tol;
        self
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (k, c))
    }

    /// h(cos theta, sin theta).
    pub fn eval(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.eval_at_cos_sin(c, s)
    }

    /// Evaluate from precomputed direction cosines; the Cartesian flow feeds
    /// (x/rho, y/rho) here, which equals the profile at atan2(y, x).
    pub fn eval_at_cos_sin(&self, c: f64, s: f64) -> f64 {
        let mut sum = 0.0;
        for (&(p, q), &coeff) in &self.terms {
            sum += coeff * c.powi(p as i32) * s.powi(q as i32);
        }
        sum
    }

    fn build_grid(&self) -> Vec<f64> {
        let rule = default_rule();
        let mut grid = Vec::with_capacity(GRID_PANELS + 1);
        grid.push(0.0);
        // Kahan accumulation; the cumulative sum runs over 4096 panels and the
        // c-constant integrals sit on top of these values.
        let mut acc = 0.0;
        let mut comp = 0.0;
        for k in 0..GRID_PANELS {
            let a = TAU * k as f64 / GRID_PANELS as f64;
            let b = TAU * (k + 1) as f64 / GRID_PANELS as f64;
            let panel = rule.integrate(a, b, |t| self.eval(t));
            let y = panel - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            grid.push(acc);
        }
        grid
    }

    /// I_h(theta), the running integral of h from 0. Exact zero at theta = 0;
    /// arbitrary arguments unwrap through the periodicity of h itself.
    pub fn integral(&self, theta: f64) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let frac = theta.rem_euclid(TAU);
        let turns = ((theta - frac) / TAU).round();
        let w = TAU / GRID_PANELS as f64;
        let idx = ((frac / w) as usize).min(GRID_PANELS - 1);
        let a = TAU * idx as f64 / GRID_PANELS as f64;
        let correction = default_rule().integrate(a, frac, |t| self.eval(t));
        turns * self.full_period_integral() + self.grid[idx] + correction
    }

    /// I_h(2*pi).
    pub fn full_period_integral(&self) -> f64 {
        self.grid.last().copied().unwrap_or(0.0)
    }

    /// True iff |I_h(2*pi)| is below the periodicity tolerance, i.e. the
    /// slaved z-coordinate closes up after one revolution.
    pub fn is_periodic(&self) -> bool {
        self.full_period_integral().abs() <= PERIODICITY_TOL
    }

    pub fn require_periodic(&self) -> Result<()> {
        let residual = self.full_period_integral().abs();
        if residual <= PERIODICITY_TOL {
            Ok(())
        } else {
            Err(Error::NonPeriodicProfile {
                residual,
                tol: PERIODICITY_TOL,
            })
        }
    }

    /// Half-period moment `int cos^cp(t) sin^sp(t) I_h(t)^ip dt` over the
    /// given half. These are the only integrals the averaged constructions
    /// consume.
    pub fn half_moment(&self, cos_pow: u32, sin_pow: u32, i_pow: u32, half: Half) -> f64 {
        let (a, b) = half.bounds();
        integrate_to_tol(default_rule(), a, b, self.quad_tol, &|t: f64| {
            let (s, c) = t.sin_cos();
            c.powi(cos_pow as i32) * s.powi(sin_pow as i32) * self.integral(t).powi(i_pow as i32)
        })
    }

    /// The eight half-period moments of I_h used by the degree-2 and degree-3
    /// closed forms.
    pub fn c_constants(&self) -> Result<CConstantTable> {
        self.require_periodic()?;
        Ok(CConstantTable {
            c0_10: self.half_moment(0, 0, 1, Half::Plus),
            c0_01: self.half_moment(0, 0, 1, Half::Minus),
            c1_11: self.half_moment(1, 0, 1, Half::Plus),
            c1_12: self.half_moment(1, 0, 1, Half::Minus),
            c1_21: self.half_moment(0, 1, 1, Half::Plus),
            c1_22: self.half_moment(0, 1, 1, Half::Minus),
            c2_10: self.half_moment(0, 0, 2, Half::Plus),
            c2_01: self.half_moment(0, 0, 2, Half::Minus),
        })
    }

    /// Realization moment
    /// `binom(n-1-i, j) * int_0^pi sin^i(t) I_h(t)^(n-1-i-j) dt`,
    /// strictly positive whenever i + j = n - 1.
    pub fn delta(&self, n: u32, i: u32, j: u32) -> Result<f64> {
        if n == 0 || i + j > n - 1 {
            return Err(Error::DeltaIndexOutOfRange { n, i, j });
        }
        let i_pow = n - 1 - i - j;
        Ok(binomial(n - 1 - i, j) * self.half_moment(0, i, i_pow, Half::Plus))
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for t in 0..k {
        acc = acc * (n - t) as f64 / (t + 1) as f64;
    }
    acc
}

/// The eight split moments of I_h: subscripts follow (weight, half) with
/// "1" endings for [0, pi] and "2"/"01" endings for [pi, 2*pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CConstantTable {
    pub c0_10: f64,
    pub c0_01: f64,
    pub c1_11: f64,
    pub c1_12: f64,
    pub c1_21: f64,
    pub c1_22: f64,
    pub c2_10: f64,
    pub c2_01: f64,
}

#[derive(Serialize, Deserialize)]
struct ProfileTermRepr {
    cos: u32,
    sin: u32,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProfileRepr {
    Preset { preset: String },
    Terms { terms: Vec<ProfileTermRepr> },
}

impl TryFrom<ProfileRepr> for CircleProfile {
    type Error = Error;

    fn try_from(repr: ProfileRepr) -> Result<Self> {
        match repr {
            ProfileRepr::Preset { preset } => match preset.as_str() {
                "zero" => Ok(CircleProfile::zero()),
                "cos" => Ok(CircleProfile::cos_theta()),
                other => Err(Error::Config(format!(
                    "unknown profile preset {other:?}; expected \"zero\" or \"cos\""
                ))),
            },
            ProfileRepr::Terms { terms } => Ok(CircleProfile::new(
                terms.into_iter().map(|t| ((t.cos, t.sin), t.coeff)),
            )),
        }
    }
}

impl From<CircleProfile> for ProfileRepr {
    fn from(profile: CircleProfile) -> Self {
        ProfileRepr::Terms {
            terms: profile
                .terms
                .iter()
                .map(|(&(cos, sin), &coeff)| ProfileTermRepr { cos, sin, coeff })
                .collect(),
        }
    }
}
