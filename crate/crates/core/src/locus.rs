//! Zero locus of the averaged polynomial: nondegenerate roots per z0-slice,
//! branch tracing across slices with fold refinement, classification of the
//! generating curve, and meshing of the revolution surface.
//!
//! A branch point is a simple zero of `psi(., z0)` with `|dpsi/dr|` above the
//! degeneracy threshold; the sign of that derivative is the Brouwer-degree
//! proxy that the averaging theorem needs. Where two branches merge the
//! derivative vanishes, so fold markers cannot satisfy the branch-point
//! residual contract; they are refined separately (as critical points of the
//! slice polynomial) and stored next to the branches rather than inside them.

use serde::{Deserialize, Serialize};

use crate::averaging::AveragedPoly;
use crate::error::{Error, Result};

/// Default ceiling on |dpsi/dr| below which a root counts as degenerate and
/// is excluded from the admissible set.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

/// Default residual bound factor: accepted roots satisfy
/// |psi(r0, z0)| <= residual_tol * (1 + r0^n).
pub const ROOT_RESIDUAL_TOL: f64 = 1e-10;

/// Default number of scan points per slice before bracketing.
pub const SCAN_POINTS: usize = 512;

/// Relative threshold for treating coefficients as zero in classification.
const ZERO_REL: f64 = 1e-12;

/// Fold bisection refines the z-interval down to step / FOLD_REFINE_DIV.
const FOLD_REFINE_DIV: f64 = 1024.0;

/// Branch links accept a root within JUMP_FACTOR * step * max(1, |slope|).
const JUMP_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy)]
pub struct LocusParams {
    pub scan_points: usize,
    pub degeneracy_threshold: f64,
    pub residual_tol: f64,
}

impl Default for LocusParams {
    fn default() -> Self {
        Self {
            scan_points: SCAN_POINTS,
            degeneracy_threshold: DEGENERACY_THRESHOLD,
            residual_tol: ROOT_RESIDUAL_TOL,
        }
    }
}

/// A nondegenerate zero of the averaged function at a fixed z0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocusPoint {
    pub z0: f64,
    pub r0: f64,
    pub dpsi_dr: f64,
    /// sign(dpsi_dr); the Brouwer degree of the slice function at the root.
    pub brouwer_sign: i8,
}

/// A root whose derivative fell below the degeneracy threshold; reported but
/// never part of the admissible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerateRoot {
    pub r0: f64,
    pub dpsi_dr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SliceRoots {
    pub points: Vec<LocusPoint>,
    pub degenerate: Vec<DegenerateRoot>,
}

/// Refined branch endpoint where the root pair merges: a critical point of
/// the slice polynomial located to step/1024 in z0. The derivative here is
/// nearly zero by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldPoint {
    pub z0: f64,
    pub r0: f64,
    pub dpsi_dr: f64,
    /// Index of a branch terminating at this fold.
    pub branch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConicKind {
    Ellipse,
    Parabola,
    Hyperbola,
    Degenerate,
}

/// Shape of the generating curve, keyed by perturbation degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifoldClass {
    /// Degree 1: psi = r * C00 with C00 != 0 has no zeros off the axis.
    Empty,
    /// The leading coefficient vanishes (or psi is identically zero): the
    /// first-order method makes no prediction.
    MethodNotApplicable,
    /// Degree 2: the generator is the line r = slope * z0 + intercept.
    LineSegment { slope: f64, intercept: f64 },
    /// Degree 3: a conic, classified by the discriminant C11^2 - 4 C20 C02.
    Conic {
        subtype: ConicKind,
        discriminant: f64,
        center: Option<(f64, f64)>,
    },
    /// Degree >= 4: an algebraic curve of the stated degree.
    AlgebraicCurve { degree: u32 },
}

/// Traced zero set over a z0-window: ordered branches of nondegenerate
/// points, refined fold markers, and the classification of the curve.
#[derive(Debug, Clone, Serialize)]
pub struct LocusCurve {
    pub branches: Vec<Vec<LocusPoint>>,
    pub folds: Vec<FoldPoint>,
    pub classification: ManifoldClass,
}

impl LocusCurve {
    pub fn point_count(&self) -> usize {
        self.branches.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.point_count() == 0
    }
}

/// One vertex of the revolved mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub branch: usize,
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_derive(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// All simple real roots of a univariate polynomial in (0, r_max], located by
/// sign-change bracketing on a uniform scan grid, bisection, and a Newton
/// polish. Tangential roots without a sign change are not detected here; the
/// fold refinement handles those.
fn scan_roots(coeffs: &[f64], r_max: f64, scan_points: usize) -> Vec<f64> {
    if coeffs.iter().all(|&c| c == 0.0) {
        return Vec::new();
    }
    let deriv = poly_derive(coeffs);
    let mut roots = Vec::new();
    // near-zero opening point so roots just above r = 0 still bracket
    let mut prev_x = r_max * 1e-9;
    let mut prev_f = poly_eval(coeffs, prev_x);
    for k in 1..=scan_points {
        let x = r_max * k as f64 / scan_points as f64;
        let f = poly_eval(coeffs, x);
        if f == 0.0 {
            roots.push(x);
        } else if prev_f == 0.0 && prev_x > r_max * 1e-9 {
            // grid root already recorded
        } else if prev_f * f < 0.0 {
            roots.push(refine_root(coeffs, &deriv, prev_x, x));
        }
        prev_x = x;
        prev_f = f;
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * r_max);
    roots
}

fn refine_root(coeffs: &[f64], deriv: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = poly_eval(coeffs, lo);
    for _ in 0..90 {
        if hi - lo <= 1e-16 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = poly_eval(coeffs, mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..6 {
        let f = poly_eval(coeffs, x);
        let d = poly_eval(deriv, x);
        if d == 0.0 {
            break;
        }
        let next = x - f / d;
        if next < lo - (hi - lo) || next > hi + (hi - lo) {
            break;
        }
        x = next;
    }
    x
}

/// All nondegenerate zeros of `psi(., z0)/r` in (0, r_max], plus the roots
/// rejected for a vanishing derivative.
pub fn roots_at_slice(
    poly: &AveragedPoly,
    z0: f64,
    r_max: f64,
    params: &LocusParams,
) -> Result<SliceRoots> {
    if r_max <= 0.0 {
        return Err(Error::InvalidRange(format!("r_max must be positive (got {r_max})")));
    }
    let gauge = poly.max_abs_coeff();
    if gauge == 0.0 {
        return Err(Error::IdenticallyZeroPoly);
    }
    let slice = poly.slice_coeffs(z0);
    let slice_gauge = gauge * z0.abs().max(1.0).powi(poly.degree() as i32 - 1);
    if slice.iter().all(|q| q.abs() <= 1e-14 * slice_gauge) {
        return Err(Error::DegenerateSlice { z0 });
    }

    let mut out = SliceRoots::default();
    for r0 in scan_roots(&slice, r_max, params.scan_points) {
        let dpsi_dr = poly.dpsi_dr(r0, z0)?;
        if dpsi_dr.abs() <= params.degeneracy_threshold {
            out.degenerate.push(DegenerateRoot { r0, dpsi_dr });
            continue;
        }
        let residual = poly.eval(r0, z0)?.abs();
        if residual > params.residual_tol * (1.0 + r0.powi(poly.degree() as i32)) {
            // bracketing artifact; a healthy simple root always polishes below
            // the residual bound
            out.degenerate.push(DegenerateRoot { r0, dpsi_dr });
            continue;
        }
        out.points.push(LocusPoint {
            z0,
            r0,
            dpsi_dr,
            brouwer_sign: if dpsi_dr > 0.0 { 1 } else { -1 },
        });
    }
    Ok(out)
}

struct BranchBuild {
    points: Vec<LocusPoint>,
    born_slice: usize,
    dead_slice: Option<usize>,
}

impl BranchBuild {
    /// Predict the next radius from the implicit-function slope
    /// dr/dz0 = -(dpsi/dz0)/(dpsi/dr) at the tip; it steepens toward folds
    /// and widens the link window exactly where the curve moves fastest.
    fn predicted_r(&self, poly: &AveragedPoly, step: f64) -> (f64, f64) {
        let last = self.points.last().expect("branch never empty");
        let slope = poly
            .dpsi_dz0(last.r0, last.z0)
            .map(|dz| (-dz / last.dpsi_dr).clamp(-1e6, 1e6))
            .unwrap_or(0.0);
        let predicted = last.r0 + slope * step;
        let threshold = JUMP_FACTOR * step * slope.abs().max(1.0);
        (predicted, threshold)
    }
}

/// Trace the locus over [z0_min, z0_max] at the given slice step: per-slice
/// root finding, nearest-radius branch linking, and fold refinement wherever
/// the root count changes inside the window.
pub fn trace_locus(
    poly: &AveragedPoly,
    z0_min: f64,
    z0_max: f64,
    step: f64,
    r_max: f64,
    params: &LocusParams,
) -> Result<LocusCurve> {
    if !(z0_min < z0_max) || step <= 0.0 {
        return Err(Error::InvalidRange(format!(
            "need z0_min < z0_max and step > 0 (got [{z0_min}, {z0_max}], step {step})"
        )));
    }
    if poly.max_abs_coeff() == 0.0 {
        return Err(Error::IdenticallyZeroPoly);
    }

    let slice_count = ((z0_max - z0_min) / step + 1.0 + 1e-9).floor() as usize;
    let mut slices = Vec::with_capacity(slice_count);
    for k in 0..slice_count {
        let z0 = z0_min + k as f64 * step;
        slices.push((z0, roots_at_slice(poly, z0, r_max, params)?));
    }

    let mut branches: Vec<BranchBuild> = Vec::new();
    for (slice_idx, (z0, roots)) in slices.iter().enumerate() {
        let _ = z0;
        let mut claimed = vec![false; roots.points.len()];
        // candidate links sorted by distance, greedily assigned
        let mut candidates = Vec::new();
        for (b, branch) in branches.iter().enumerate() {
            if branch.dead_slice.is_some() {
                continue;
            }
            let (predicted, threshold) = branch.predicted_r(poly, step);
            for (ri, point) in roots.points.iter().enumerate() {
                let dist = (point.r0 - predicted).abs();
                if dist <= threshold {
                    candidates.push((dist, b, ri));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut extended = vec![false; branches.len()];
        for (_, b, ri) in candidates {
            if extended[b] || claimed[ri] {
                continue;
            }
            branches[b].points.push(roots.points[ri]);
            extended[b] = true;
            claimed[ri] = true;
        }
        for (b, branch) in branches.iter_mut().enumerate() {
            if branch.dead_slice.is_none() && !extended[b] && branch.born_slice < slice_idx {
                branch.dead_slice = Some(slice_idx);
            }
        }
        for (ri, point) in roots.points.iter().enumerate() {
            if !claimed[ri] {
                branches.push(BranchBuild {
                    points: vec![*point],
                    born_slice: slice_idx,
                    dead_slice: None,
                });
            }
        }
    }

    // fold refinement at interior endpoints where the root count changed
    let mut folds: Vec<FoldPoint> = Vec::new();
    for (b, branch) in branches.iter().enumerate() {
        if let Some(dead) = branch.dead_slice {
            let z_alive = slices[dead - 1].0;
            let z_dead = slices[dead].0;
            let tip = branch.points.last().expect("non-empty").r0;
            if let Some(fold) = refine_fold(poly, z_alive, z_dead, tip, r_max, step, params, b) {
                folds.push(fold);
            }
        }
        if branch.born_slice > 0 {
            let z_alive = slices[branch.born_slice].0;
            let z_dead = slices[branch.born_slice - 1].0;
            let tip = branch.points.first().expect("non-empty").r0;
            if let Some(fold) = refine_fold(poly, z_alive, z_dead, tip, r_max, step, params, b) {
                folds.push(fold);
            }
        }
    }
    folds.sort_by(|a, b| (a.z0, a.r0).partial_cmp(&(b.z0, b.r0)).unwrap());
    folds.dedup_by(|a, b| {
        (a.z0 - b.z0).abs() <= step / 128.0 && (a.r0 - b.r0).abs() <= 1e-3 * a.r0.abs().max(1.0)
    });

    let mut out: Vec<Vec<LocusPoint>> = branches
        .into_iter()
        .map(|b| b.points)
        .filter(|p| !p.is_empty())
        .collect();
    out.sort_by(|a, b| {
        (a[0].z0, a[0].r0)
            .partial_cmp(&(b[0].z0, b[0].r0))
            .unwrap()
    });

    Ok(LocusCurve {
        branches: out,
        folds,
        classification: classify(poly),
    })
}

/// Bisect in z0 between a slice that still carries the branch and one that
/// lost it, following the critical point of the slice polynomial nearest the
/// dying tip. The fold marker is the critical point at the refined z0; its
/// dpsi/dr equals the slice value there and vanishes linearly with the
/// remaining z-offset.
#[allow(clippy::too_many_arguments)]
fn refine_fold(
    poly: &AveragedPoly,
    z_alive: f64,
    z_dead: f64,
    r_tip: f64,
    r_max: f64,
    step: f64,
    params: &LocusParams,
    branch: usize,
) -> Option<FoldPoint> {
    let critical_near = |z: f64, near: f64| -> Option<f64> {
        let dslice = poly_derive(&poly.slice_coeffs(z));
        scan_roots(&dslice, r_max, params.scan_points)
            .into_iter()
            .min_by(|a, b| (a - near).abs().total_cmp(&(b - near).abs()))
    };
    let slice_at = |z: f64, r: f64| poly_eval(&poly.slice_coeffs(z), r);

    let mut rc = critical_near(z_alive, r_tip)?;
    let g_alive = slice_at(z_alive, rc);
    let rc_dead = critical_near(z_dead, rc)?;
    let g_dead = slice_at(z_dead, rc_dead);
    if g_alive * g_dead >= 0.0 {
        return None;
    }

    let (mut za, mut zd) = (z_alive, z_dead);
    let mut ga = g_alive;
    let target = step / FOLD_REFINE_DIV;
    while (zd - za).abs() > target {
        let zm = 0.5 * (za + zd);
        rc = critical_near(zm, rc)?;
        let gm = slice_at(zm, rc);
        if gm == 0.0 {
            za = zm;
            break;
        }
        if ga * gm > 0.0 {
            za = zm;
            ga = gm;
        } else {
            zd = zm;
        }
    }
    let z_fold = 0.5 * (za + zd);
    let r_fold = critical_near(z_fold, rc)?;
    let dpsi_dr = poly.dpsi_dr(r_fold, z_fold).ok()?;
    Some(FoldPoint {
        z0: z_fold,
        r0: r_fold,
        dpsi_dr,
        branch,
    })
}

/// Classification of the generating curve from the coefficient grid alone.
/// Thresholds are relative to the coefficient gauge, so positive rescaling
/// never changes the verdict.
pub fn classify(poly: &AveragedPoly) -> ManifoldClass {
    let gauge = poly.max_abs_coeff();
    if gauge == 0.0 {
        return ManifoldClass::MethodNotApplicable;
    }
    match poly.degree() {
        1 => ManifoldClass::Empty,
        2 => {
            let c10 = poly.coeff(1, 0);
            if c10.abs() <= ZERO_REL * gauge {
                ManifoldClass::MethodNotApplicable
            } else {
                ManifoldClass::LineSegment {
                    slope: -poly.coeff(0, 1) / c10,
                    intercept: -poly.coeff(0, 0) / c10,
                }
            }
        }
        3 => {
            let (c20, c11, c02) = (poly.coeff(2, 0), poly.coeff(1, 1), poly.coeff(0, 2));
            let (c10, c01, c00) = (poly.coeff(1, 0), poly.coeff(0, 1), poly.coeff(0, 0));
            let quad_gauge = c20.abs().max(c11.abs()).max(c02.abs());
            if quad_gauge <= ZERO_REL * gauge {
                return ManifoldClass::Conic {
                    subtype: ConicKind::Degenerate,
                    discriminant: 0.0,
                    center: None,
                };
            }
            let disc = c11 * c11 - 4.0 * c20 * c02;
            let det = c20 * (c02 * c00 - 0.25 * c01 * c01)
                - 0.5 * c11 * (0.5 * c11 * c00 - 0.25 * c01 * c10)
                + 0.5 * c10 * (0.25 * c11 * c01 - 0.5 * c02 * c10);
            let disc_zero = disc.abs() <= ZERO_REL * quad_gauge * quad_gauge;
            let subtype = if det.abs() <= ZERO_REL * gauge.powi(3) {
                ConicKind::Degenerate
            } else if disc_zero {
                ConicKind::Parabola
            } else if disc < 0.0 {
                ConicKind::Ellipse
            } else {
                ConicKind::Hyperbola
            };
            let center = if disc_zero {
                None
            } else {
                Some((
                    (-2.0 * c02 * c10 + c11 * c01) / -disc,
                    (-2.0 * c20 * c01 + c11 * c10) / -disc,
                ))
            };
            ManifoldClass::Conic {
                subtype,
                discriminant: disc,
                center,
            }
        }
        n => ManifoldClass::AlgebraicCurve { degree: n - 1 },
    }
}

/// Rotate every branch point around the z-axis on a uniform angular grid.
pub fn revolve(curve: &LocusCurve, angular_samples: u32) -> Result<Vec<MeshPoint>> {
    if angular_samples < 3 {
        return Err(Error::TooFewSamples(angular_samples));
    }
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    let mut mesh = Vec::with_capacity(curve.point_count() * angular_samples as usize);
    for (b, branch) in curve.branches.iter().enumerate() {
        for point in branch {
            for k in 0..angular_samples {
                let theta = std::f64::consts::TAU * k as f64 / angular_samples as f64;
                let (s, c) = theta.sin_cos();
                mesh.push(MeshPoint {
                    x: point.r0 * c,
                    y: point.r0 * s,
                    z: point.z0,
                    branch: b,
                });
            }
        }
    }
    Ok(mesh)
}
