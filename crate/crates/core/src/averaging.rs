//! Construction and evaluation of the averaged function
//! `psi_n(r, z0) = r * sum_{i+j<=n-1} C_ij r^i z0^j`.
//!
//! Two independent construction routes are kept side by side. The generic
//! route substitutes the circular motion into each perturbation monomial,
//! lifts `(z0 + I_h)^k` binomially and accumulates half-period moments; it
//! works for any degree. The closed-form route evaluates the explicit
//! degree-2 and degree-3 coefficient tables built from the eight c-constants.
//! Their coefficientwise agreement is the engine's central correctness check
//! and is enforced by the acceptance suite.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{binomial, CircleProfile, Half};

pub(crate) type TermKey = (u32, u32, u32);

/// Two-sided polynomial perturbation of degree `n`: coefficient families
/// `a_ijk` of `Psi(x, y, z) = sum a_ijk x^i y^j z^k` on each side of the
/// switching plane, with support `0 <= i+j+k <= n-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PerturbationRepr", into = "PerturbationRepr")]
pub struct PerturbationSpec {
    degree: u32,
    plus: BTreeMap<TermKey, f64>,
    minus: BTreeMap<TermKey, f64>,
}

impl PerturbationSpec {
    pub fn new<P, M>(degree: u32, plus: P, minus: M) -> Result<Self>
    where
        P: IntoIterator<Item = (TermKey, f64)>,
        M: IntoIterator<Item = (TermKey, f64)>,
    {
        if degree == 0 {
            return Err(Error::ZeroDegree);
        }
        let collect = |it: &mut dyn Iterator<Item = (TermKey, f64)>| -> Result<BTreeMap<TermKey, f64>> {
            let mut map: BTreeMap<TermKey, f64> = BTreeMap::new();
            for ((i, j, k), a) in it {
                if i + j + k > degree - 1 {
                    return Err(Error::CoefficientOutOfRange {
                        i,
                        j,
                        k,
                        degree,
                        max: degree - 1,
                    });
                }
                *map.entry((i, j, k)).or_insert(0.0) += a;
            }
            map.retain(|_, a| *a != 0.0);
            Ok(map)
        };
        Ok(Self {
            degree,
            plus: collect(&mut plus.into_iter())?,
            minus: collect(&mut minus.into_iter())?,
        })
    }

    pub fn zero(degree: u32) -> Result<Self> {
        Self::new(degree, [], [])
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn plus(&self) -> impl Iterator<Item = (TermKey, f64)> + '_ {
        self.plus.iter().map(|(&k, &a)| (k, a))
    }

    pub fn minus(&self) -> impl Iterator<Item = (TermKey, f64)> + '_ {
        self.minus.iter().map(|(&k, &a)| (k, a))
    }

    pub fn coeff(&self, half: Half, i: u32, j: u32, k: u32) -> f64 {
        let map = match half {
            Half::Plus => &self.plus,
            Half::Minus => &self.minus,
        };
        map.get(&(i, j, k)).copied().unwrap_or(0.0)
    }

    fn side(&self, half: Half) -> &BTreeMap<TermKey, f64> {
        match half {
            Half::Plus => &self.plus,
            Half::Minus => &self.minus,
        }
    }

    /// Psi on the given side at a Cartesian point.
    pub fn eval(&self, half: Half, x: f64, y: f64, z: f64) -> f64 {
        let mut sum = 0.0;
        for (&(i, j, k), &a) in self.side(half) {
            sum += a * x.powi(i as i32) * y.powi(j as i32) * z.powi(k as i32);
        }
        sum
    }
}

/// The averaged polynomial `psi_n(r, z0) = r * P(r, z0)` stored as the dense
/// triangular coefficient grid of `P`; the structural factor `r` is never
/// expanded away, so `psi_n(0+, z0) -> 0` by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AveragedPolyRepr", into = "AveragedPolyRepr")]
pub struct AveragedPoly {
    degree: u32,
    /// Row-major triangle: row i holds C_i0 .. C_i(n-1-i).
    coeffs: Vec<f64>,
}

impl AveragedPoly {
    pub fn zero(degree: u32) -> Self {
        assert!(degree >= 1, "degree must be at least 1");
        let n = degree as usize;
        Self {
            degree,
            coeffs: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn from_coeffs<I: IntoIterator<Item = ((u32, u32), f64)>>(
        degree: u32,
        entries: I,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(Error::ZeroDegree);
        }
        let mut poly = Self::zero(degree);
        for ((i, j), c) in entries {
            if i + j > degree - 1 {
                return Err(Error::PolyIndexOutOfRange {
                    i,
                    j,
                    degree,
                    max: degree - 1,
                });
            }
            let idx = poly.index(i, j);
            poly.coeffs[idx] += c;
        }
        Ok(poly)
    }

    fn index(&self, i: u32, j: u32) -> usize {
        let n = self.degree as usize;
        let i = i as usize;
        // row i starts after rows of lengths n, n-1, ..., n-i+1
        i * (2 * n - i + 1) / 2 + j as usize
    }

    /// C_ij, zero outside the stored triangle.
    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        if i + j > self.degree - 1 {
            0.0
        } else {
            self.coeffs[self.index(i, j)]
        }
    }

    pub(crate) fn add(&mut self, i: u32, j: u32, value: f64) {
        let idx = self.index(i, j);
        self.coeffs[idx] += value;
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let n = self.degree;
        (0..n).flat_map(move |i| (0..n - i).map(move |j| (i, j, self.coeff(i, j))))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Coefficients of the slice polynomial `P(r, z0)` in `r` at fixed `z0`,
    /// lowest power first.
    pub fn slice_coeffs(&self, z0: f64) -> Vec<f64> {
        let n = self.degree;
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for j in (0..n - i).rev() {
                    acc = acc * z0 + self.coeff(i, j);
                }
                acc
            })
            .collect()
    }

    /// psi(r, z0) = r * P(r, z0). The radius must be positive; the z-axis is
    /// outside the admissible domain.
    pub fn eval(&self, r: f64, z0: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::NonPositiveRadius(r));
        }
        let slice = self.slice_coeffs(z0);
        let mut acc = 0.0;
        for &q in slice.iter().rev() {
            acc = acc * r + q;
        }
        Ok(r * acc)
    }

    /// d psi / d r = sum C_ij (i+1) r^i z0^j.
    pub fn dpsi_dr(&self, r: f64, z0: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::NonPositiveRadius(r));
        }
        let slice = self.slice_coeffs(z0);
        let mut acc = 0.0;
        for (i, &q) in slice.iter().enumerate().rev() {
            acc = acc * r + (i + 1) as f64 * q;
        }
        Ok(acc)
    }

    /// d psi / d z0 = r * sum C_ij j r^i z0^(j-1).
    pub fn dpsi_dz0(&self, r: f64, z0: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::NonPositiveRadius(r));
        }
        let n = self.degree;
        let mut acc = 0.0;
        for i in (0..n).rev() {
            let mut row = 0.0;
            for j in (1..n - i).rev() {
                row = row * z0 + j as f64 * self.coeff(i, j);
            }
            acc = acc * r + row;
        }
        Ok(r * acc)
    }

    /// Max absolute coefficient difference against another polynomial of the
    /// same degree.
    pub fn max_coeff_deviation(&self, other: &AveragedPoly) -> f64 {
        let n = self.degree.max(other.degree);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n - i {
                worst = worst.max((self.coeff(i, j) - other.coeff(i, j)).abs());
            }
        }
        worst
    }
}

/// Generic construction: substitute `x = r cos t`, `y = r sin t`,
/// `z = z0 + I_h(t)` into each monomial, expand the z-power binomially and
/// accumulate half-period moments into the coefficient grid. The same moment
/// recurs across monomials, so lookups go through a per-call cache keyed by
/// (cos-power, sin-power, I-power, half).
pub fn averaged_generic(pert: &PerturbationSpec, profile: &CircleProfile) -> Result<AveragedPoly> {
    profile.require_periodic()?;
    let mut poly = AveragedPoly::zero(pert.degree());
    let mut cache: HashMap<(u32, u32, u32, Half), f64> = HashMap::new();
    for half in [Half::Plus, Half::Minus] {
        for ((i, j, k), a) in pert.side(half).iter().map(|(&key, &a)| (key, a)) {
            for m in 0..=k {
                let moment = *cache
                    .entry((i, j, k - m, half))
                    .or_insert_with(|| profile.half_moment(i, j, k - m, half));
                poly.add(i + j, m, a * binomial(k, m) * moment);
            }
        }
    }
    Ok(poly)
}

/// Closed-form construction for degrees 2 and 3 from the c-constant table.
/// Coefficient keys absent from the tables integrate to zero over both
/// half-periods, so arbitrary specs of these degrees are covered.
pub fn averaged_closed_form(
    pert: &PerturbationSpec,
    profile: &CircleProfile,
) -> Result<AveragedPoly> {
    let c = profile.c_constants()?;
    let ap = |i, j, k| pert.coeff(Half::Plus, i, j, k);
    let am = |i, j, k| pert.coeff(Half::Minus, i, j, k);
    match pert.degree() {
        2 => AveragedPoly::from_coeffs(
            2,
            [
                ((1, 0), 2.0 * (ap(0, 1, 0) - am(0, 1, 0))),
                ((0, 1), PI * (ap(0, 0, 1) + am(0, 0, 1))),
                (
                    (0, 0),
                    PI * (ap(0, 0, 0) + am(0, 0, 0)) + c.c0_10 * ap(0, 0, 1) + c.c0_01 * am(0, 0, 1),
                ),
            ],
        ),
        3 => AveragedPoly::from_coeffs(
            3,
            [
                (
                    (2, 0),
                    PI / 2.0 * (ap(2, 0, 0) + ap(0, 2, 0) + am(2, 0, 0) + am(0, 2, 0)),
                ),
                ((1, 1), 2.0 * (ap(0, 1, 1) - am(0, 1, 1))),
                ((0, 2), PI * (ap(0, 0, 2) + am(0, 0, 2))),
                (
                    (1, 0),
                    ap(1, 0, 1) * c.c1_11
                        + ap(0, 1, 1) * c.c1_21
                        + 2.0 * (ap(0, 1, 0) - am(0, 1, 0))
                        + am(1, 0, 1) * c.c1_12
                        + am(0, 1, 1) * c.c1_22,
                ),
                (
                    (0, 1),
                    2.0 * ap(0, 0, 2) * c.c0_10
                        + PI * ap(0, 0, 1)
                        + 2.0 * am(0, 0, 2) * c.c0_01
                        + PI * am(0, 0, 1),
                ),
                (
                    (0, 0),
                    ap(0, 0, 2) * c.c2_10
                        + ap(0, 0, 1) * c.c0_10
                        + PI * (ap(0, 0, 0) + am(0, 0, 0))
                        + am(0, 0, 2) * c.c2_01
                        + am(0, 0, 1) * c.c0_01,
                ),
            ],
        ),
        other => Err(Error::UnsupportedDegree(other)),
    }
}

#[derive(Serialize, Deserialize)]
struct PertTermRepr {
    i: u32,
    j: u32,
    k: u32,
    a: f64,
}

#[derive(Serialize, Deserialize)]
struct PerturbationRepr {
    degree: u32,
    #[serde(default)]
    plus: Vec<PertTermRepr>,
    #[serde(default)]
    minus: Vec<PertTermRepr>,
}

impl TryFrom<PerturbationRepr> for PerturbationSpec {
    type Error = Error;

    fn try_from(repr: PerturbationRepr) -> Result<Self> {
        PerturbationSpec::new(
            repr.degree,
            repr.plus.into_iter().map(|t| ((t.i, t.j, t.k), t.a)),
            repr.minus.into_iter().map(|t| ((t.i, t.j, t.k), t.a)),
        )
    }
}

impl From<PerturbationSpec> for PerturbationRepr {
    fn from(spec: PerturbationSpec) -> Self {
        let flat = |map: &BTreeMap<TermKey, f64>| {
            map.iter()
                .map(|(&(i, j, k), &a)| PertTermRepr { i, j, k, a })
                .collect()
        };
        PerturbationRepr {
            degree: spec.degree,
            plus: flat(&spec.plus),
            minus: flat(&spec.minus),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PolyTermRepr {
    i: u32,
    j: u32,
    #[serde(rename = "C")]
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct AveragedPolyRepr {
    degree: u32,
    coeffs: Vec<PolyTermRepr>,
}

impl TryFrom<AveragedPolyRepr> for AveragedPoly {
    type Error = Error;

    fn try_from(repr: AveragedPolyRepr) -> Result<Self> {
        AveragedPoly::from_coeffs(repr.degree, repr.coeffs.into_iter().map(|t| ((t.i, t.j), t.c)))
    }
}

impl From<AveragedPoly> for AveragedPolyRepr {
    fn from(poly: AveragedPoly) -> Self {
        AveragedPolyRepr {
            degree: poly.degree,
            coeffs: poly
                .iter()
                .map(|(i, j, c)| PolyTermRepr { i, j, c })
                .collect(),
        }
    }
}

/// The degree-2 fixture: h = 0, a+_010 = 1/2, a-_001 = -1/pi, averaging to
/// psi = r (r - z0) whose locus is the cone generator r = z0.
pub fn example1_perturbation() -> PerturbationSpec {
    PerturbationSpec::new(2, [((0, 1, 0), 0.5)], [((0, 0, 1), -1.0 / PI)]).unwrap()
}

/// The degree-3 fixture over h = cos: averaging to
/// psi = r ((r-3)^2 + z0^2 - 1/2), a circle of radius sqrt(1/2) about (3, 0).
pub fn example2_perturbation() -> PerturbationSpec {
    PerturbationSpec::new(
        3,
        [
            ((2, 0, 0), 2.0 / PI),
            ((0, 0, 2), 0.5 / PI),
            ((0, 1, 0), -3.0),
        ],
        [((0, 0, 2), 0.5 / PI), ((0, 0, 0), 8.0 / PI)],
    )
    .unwrap()
}
