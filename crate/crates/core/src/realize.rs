//! Inverse problem: construct a perturbation whose averaged polynomial
//! equals a given target.
//!
//! The construction peels the target top-down. At level `m` the coefficients
//! on the anti-diagonal `i + j = m - 1` are matched by monomials
//! `a_i * y^i z^(m-1-i)` added to the "+" side, with
//! `a_i = C_i,(m-1-i) / delta_i,(m-1-i)`; the divisor is a plain sine moment
//! and never vanishes. Each added monomial also feeds every lower coefficient
//! `C_i,j'` for `j' < m-1-i` through the binomial lift of `(z0 + I_h)^(m-1-i)`,
//! so the full column is subtracted from the remaining target before the next
//! level. Level 1 closes with `a_000 = C_00 / pi`.
//!
//! Realizations are not unique; this one is canonical: x-free monomials, "+"
//! side only, "-" side identically zero.

use std::collections::HashMap;

use crate::averaging::{averaged_generic, AveragedPoly, PerturbationSpec};
use crate::error::Result;
use crate::profile::{binomial, CircleProfile, Half};

pub fn realize(target: &AveragedPoly, profile: &CircleProfile) -> Result<PerturbationSpec> {
    profile.require_periodic()?;
    let n = target.degree();
    let mut remaining: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n - i).map(|j| target.coeff(i, j)).collect())
        .collect();
    let mut plus: Vec<((u32, u32, u32), f64)> = Vec::new();

    let mut moments: HashMap<(u32, u32), f64> = HashMap::new();
    let mut moment = |i: u32, p: u32| -> f64 {
        *moments
            .entry((i, p))
            .or_insert_with(|| profile.half_moment(0, i, p, Half::Plus))
    };

    for m in (2..=n).rev() {
        for i in 0..m {
            let j = m - 1 - i;
            let divisor = moment(i, 0);
            debug_assert!(divisor > 0.0, "sine moment must be positive");
            let a = remaining[i as usize][j as usize] / divisor;
            if a == 0.0 {
                continue;
            }
            plus.push(((0, i, j), a));
            // remove everything this monomial contributes, top entry included
            for jp in 0..=j {
                let delta = binomial(j, jp) * moment(i, j - jp);
                remaining[i as usize][jp as usize] -= a * delta;
            }
        }
    }
    let base = remaining[0][0] / std::f64::consts::PI;
    if base != 0.0 {
        plus.push(((0, 0, 0), base));
    }

    PerturbationSpec::new(n, plus, [])
}

/// Outcome of realizing a target and averaging the result back.
#[derive(Debug, Clone)]
pub struct RealizationReport {
    pub perturbation: PerturbationSpec,
    pub roundtrip: AveragedPoly,
    pub max_deviation: f64,
}

/// Realize the target, push the result back through the generic averaging
/// path and report the worst coefficient deviation.
pub fn roundtrip_check(target: &AveragedPoly, profile: &CircleProfile) -> Result<RealizationReport> {
    let perturbation = realize(target, profile)?;
    let roundtrip = averaged_generic(&perturbation, profile)?;
    let max_deviation = roundtrip.max_coeff_deviation(target);
    Ok(RealizationReport {
        perturbation,
        roundtrip,
        max_deviation,
    })
}
