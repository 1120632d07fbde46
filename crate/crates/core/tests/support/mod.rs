//! Independent numerical oracles for the acceptance and property suites.
//!
//! Nothing here shares code with the engine under test: integration is
//! composite Simpson (the engine uses Gauss-Legendre panels), the slaved
//! vertical coordinate uses the analytic closed forms of the fixture
//! profiles, and coefficient extraction goes through a dense linear solve
//! over sampled values rather than any moment algebra.

use std::f64::consts::PI;

/// Composite Simpson with interval doubling until two successive estimates
/// agree to `tol`.
pub fn simpson_to_tol(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let composite = |n: usize| {
        let mut sum = f(a) + f(b);
        for k in 1..n {
            let x = a + (b - a) * k as f64 / n as f64;
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        sum * (b - a) / (3.0 * n as f64)
    };
    let mut n = 64;
    let mut prev = composite(n);
    loop {
        n *= 2;
        let cur = composite(n);
        if (cur - prev).abs() <= tol || n >= (1 << 22) {
            return cur;
        }
        prev = cur;
    }
}

/// Slaved z-displacement of the two fixture profiles in closed form.
pub fn i_h_zero(_theta: f64) -> f64 {
    0.0
}

pub fn i_h_cos(theta: f64) -> f64 {
    theta.sin()
}

type Term = ((u32, u32, u32), f64);

fn side_integrand(terms: &[Term], i_h: fn(f64) -> f64, r: f64, z0: f64) -> impl Fn(f64) -> f64 + '_ {
    move |theta: f64| {
        let (s, c) = theta.sin_cos();
        let z = z0 + i_h(theta);
        terms
            .iter()
            .map(|&((i, j, k), a)| {
                a * (r * c).powi(i as i32) * (r * s).powi(j as i32) * z.powi(k as i32)
            })
            .sum()
    }
}

/// Direct quadrature of the averaged integrand:
/// r * [ int_0^pi Psi+ dt + int_pi^2pi Psi- dt ].
pub fn oracle_psi(
    plus: &[Term],
    minus: &[Term],
    i_h: fn(f64) -> f64,
    r: f64,
    z0: f64,
    tol: f64,
) -> f64 {
    let plus_part = simpson_to_tol(&side_integrand(plus, i_h, r, z0), 0.0, PI, tol);
    let minus_part = simpson_to_tol(&side_integrand(minus, i_h, r, z0), PI, 2.0 * PI, tol);
    r * (plus_part + minus_part)
}

/// Gaussian elimination with partial pivoting; small systems only.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-300, "singular system");
        for row in col + 1..n {
            let factor = a[row][col] / d;
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Total-degree-2 basis used for the degree-3 coefficient fit.
pub const DEG3_BASIS: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

/// Recover the coefficient grid of `P(r, z0) = psi / r` for a degree-3
/// averaged polynomial by sampling six points and solving the linear system.
/// Returns coefficients ordered like `DEG3_BASIS`.
pub fn fit_degree3_coeffs(psi: &dyn Fn(f64, f64) -> f64) -> [f64; 6] {
    let points = [
        (1.0, -1.0),
        (1.0, 0.0),
        (1.0, 1.0),
        (2.0, 0.0),
        (2.0, 1.0),
        (3.0, 0.0),
    ];
    let a: Vec<Vec<f64>> = points
        .iter()
        .map(|&(r, z): &(f64, f64)| {
            DEG3_BASIS
                .iter()
                .map(|&(i, j)| r.powi(i as i32) * z.powi(j as i32))
                .collect()
        })
        .collect();
    let b: Vec<f64> = points.iter().map(|&(r, z)| psi(r, z) / r).collect();
    let x = solve_dense(a, b);
    x.try_into().unwrap()
}

/// Dense random perturbation with all admissible keys populated.
pub fn random_pert(
    degree: u32,
    amp: f64,
    rng: &mut impl rand::Rng,
) -> pwsavg::PerturbationSpec {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for i in 0..degree {
        for j in 0..degree - i {
            for k in 0..degree - i - j {
                plus.push(((i, j, k), rng.gen_range(-amp..amp)));
                minus.push(((i, j, k), rng.gen_range(-amp..amp)));
            }
        }
    }
    pwsavg::PerturbationSpec::new(degree, plus, minus).unwrap()
}

/// Dense random averaged polynomial of the given degree.
pub fn random_target(degree: u32, amp: f64, rng: &mut impl rand::Rng) -> pwsavg::AveragedPoly {
    let mut entries = Vec::new();
    for i in 0..degree {
        for j in 0..degree - i {
            entries.push(((i, j), rng.gen_range(-amp..amp)));
        }
    }
    pwsavg::AveragedPoly::from_coeffs(degree, entries).unwrap()
}
