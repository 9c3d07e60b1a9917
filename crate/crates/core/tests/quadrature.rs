//! The Gaussian-kernel closed form against numerical integration of the
//! kernel convolution.

use std::f64::consts::PI;

use nskrig::kernel::KernelMatrix;
use nskrig::nonstationary::cov_h;
use nskrig::Location;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // fixed panels first so narrow peaks are not missed by the coarse estimate
    let panels = 256;
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 50)
        })
        .sum()
}

#[test]
fn closed_form_matches_quadrature_in_one_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let s: f64 = rng.random_range(-2.0..2.0);
        let t: f64 = rng.random_range(-2.0..2.0);
        let vs: f64 = 10f64.powf(rng.random_range(-2.0..0.5));
        let vt: f64 = 10f64.powf(rng.random_range(-2.0..0.5));
        let sd = vs.max(vt).sqrt();
        let (lo, hi) = (s.min(t) - 12.0 * sd, s.max(t) + 12.0 * sd);
        let integral = adaptive(&|u| normal_pdf(u, s, vs) * normal_pdf(u, t, vt), lo, hi, 1e-13);
        let closed = cov_h(
            &Location::x(s),
            &Location::x(t),
            &KernelMatrix::scalar(vs).unwrap(),
            &KernelMatrix::scalar(vt).unwrap(),
        );
        assert!((closed - integral).abs() <= 1e-6, "{closed} vs {integral}");
        assert!((closed - integral).abs() <= 1e-9 * integral.max(1e-3));
    }
}

#[test]
fn closed_form_matches_quadrature_in_two_dimensions() {
    // product of two 2-d Gaussian densities on a fine tensor grid
    let ks = KernelMatrix::from_spectral(0.3, 0.05, 0.6).unwrap();
    let kt = KernelMatrix::from_spectral(0.2, 0.1, 2.0).unwrap();
    let s = Location::xy(0.1, -0.2);
    let t = Location::xy(0.5, 0.3);
    let dens = |u: &Location, c: &Location, k: &KernelMatrix| {
        let h = u.lag(c);
        let ch = k.cholesky();
        (-0.5 * ch.quad_inv(&h) - 0.5 * ch.log_det()).exp() / (2.0 * PI)
    };
    let step = 0.01;
    let mut total = 0.0;
    for i in -400..=400 {
        for j in -400..=400 {
            let u = Location::xy(0.3 + i as f64 * step, 0.05 + j as f64 * step);
            total += dens(&u, &s, &ks) * dens(&u, &t, &kt) * step * step;
        }
    }
    let closed = cov_h(&s, &t, &ks, &kt);
    assert!((closed - total).abs() <= 1e-8 * closed, "{closed} vs {total}");
}
