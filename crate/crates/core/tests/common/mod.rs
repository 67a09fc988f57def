#![allow(dead_code)]

use kps_core::dist::RngStream;
use kps_core::KpsSample;
use nalgebra::DMatrix;

pub fn gaussian(rng: &mut RngStream, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.next_normal())
}

/// Data whose residual variance depends on the regressors, so the
/// covariance of the moments is far from KPS.
pub fn heteroskedastic_sample(rng: &mut RngStream, n: usize, p: usize, k: usize) -> KpsSample {
    let mix = gaussian(rng, k, k) + DMatrix::identity(k, k) * 2.0;
    let z = gaussian(rng, n, k) * mix;
    let v = DMatrix::from_fn(n, p, |i, j| {
        let zz = z[(i, j % k)];
        rng.next_normal() * (1.0 + 0.5 * zz * zz).sqrt()
    });
    KpsSample::from_matrices(v, z).unwrap()
}

pub fn random_orthogonal(rng: &mut RngStream, m: usize) -> DMatrix<f64> {
    let q = gaussian(rng, m, m).qr().q();
    assert!((q.tr_mul(&q) - DMatrix::identity(m, m)).amax() < 1e-12);
    q
}

/// Well-conditioned but far from orthogonal.
pub fn random_nonsingular(rng: &mut RngStream, m: usize) -> DMatrix<f64> {
    let q1 = random_orthogonal(rng, m);
    let q2 = random_orthogonal(rng, m);
    let d = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            0.2 + 4.0 * (i as f64 + rng.next_normal().abs()) / m as f64
        } else {
            0.0
        }
    });
    q1 * d * q2
}

pub fn random_spd(rng: &mut RngStream, m: usize) -> DMatrix<f64> {
    let b = gaussian(rng, m, m);
    &b * b.transpose() + DMatrix::identity(m, m) * 0.1
}

pub fn transform(sample: &KpsSample, a: &DMatrix<f64>, b: &DMatrix<f64>) -> KpsSample {
    // Row i becomes (A V_i, B Z_i).
    let v = sample.vhat().as_matrix() * a.transpose();
    let z = sample.z().as_matrix() * b.transpose();
    KpsSample::from_matrices(v, z).unwrap()
}

pub fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Frobenius distance from `m` to its best rank-one approximation, by
/// alternating least squares on `m ≈ x y'`.
pub fn als_rank_one_distance(m: &DMatrix<f64>) -> f64 {
    let mut y = m.row(0).transpose() + DMatrix::from_element(m.ncols(), 1, 1e-3).column(0);
    let mut x = m * &y / y.norm_squared();
    for _ in 0..10_000 {
        let y_new = m.transpose() * &x / x.norm_squared();
        let x_new = m * &y_new / y_new.norm_squared();
        let moved = (&x_new * y_new.transpose() - &x * y.transpose()).norm();
        x = x_new;
        y = y_new;
        if moved < 1e-15 * m.norm() {
            break;
        }
    }
    (m - &x * y.transpose()).norm()
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `P(χ²(df) <= x)` by quadrature of the density after substituting
/// `x = t²`, which removes the singularity at zero for `df = 1`.
pub fn chi2_cdf_by_quadrature(x: f64, df: u32) -> f64 {
    let h = df as f64 / 2.0;
    let log_norm = h * 2f64.ln() + statrs::function::gamma::ln_gamma(h);
    let density_t = |t: f64| {
        if t == 0.0 {
            return if df == 1 { 2.0 * (-log_norm).exp() } else { 0.0 };
        }
        let u = t * t;
        2.0 * t * ((h - 1.0) * u.ln() - u / 2.0 - log_norm).exp()
    };
    integrate(&density_t, 0.0, x.sqrt(), 1e-14)
}
