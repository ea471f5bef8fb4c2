//! Reference computations that avoid the library's own linear algebra.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<Complex64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
    })
}

pub fn to_na(m: &Array2<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn from_na(m: &DMatrix<Complex64>) -> Array2<Complex64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn max_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `F_{js} = exp(-2πi·js/N)/√N` built straight from the definition.
pub fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |j, k| Complex64::from_polar(s, -std::f64::consts::TAU * (j * k) as f64 / n as f64))
}

/// `(Kτ)^{-1}(e^{Kτ} - I)·τB` by a dense solve.
pub fn dense_zoh(k: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tau: f64) -> DMatrix<Complex64> {
    let n = k.nrows();
    let kt = k * Complex64::new(tau, 0.0);
    let rhs = (kt.clone().exp() - DMatrix::identity(n, n)) * (b * Complex64::new(tau, 0.0));
    kt.lu().solve(&rhs).expect("Kτ is invertible")
}

/// Same map read off the top-right block of `exp([[Kτ, Bτ], [0, 0]])`,
/// which stays valid when `K` is singular or nearly so.
pub fn augmented_zoh(k: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tau: f64) -> DMatrix<Complex64> {
    let (n, d) = (k.nrows(), b.ncols());
    let t = Complex64::new(tau, 0.0);
    let mut m = DMatrix::zeros(n + d, n + d);
    m.view_mut((0, 0), (n, n)).copy_from(&(k * t));
    m.view_mut((0, n), (n, d)).copy_from(&(b * t));
    m.exp().view((0, n), (n, d)).into_owned()
}

fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `y^r` through the explicit lift: with `z = [x; conj x]` and
/// `v = ½[c; conj c]`, `y = v·z` and `y^r = (v^{⊗r})·(z^{⊗r})`.
pub fn tensor_lift_power(c_row: &[Complex64], x: &[Complex64], r: usize) -> f64 {
    let z: Vec<Complex64> = x.iter().copied().chain(x.iter().map(|v| v.conj())).collect();
    let v: Vec<Complex64> = c_row.iter().map(|c| c * 0.5).chain(c_row.iter().map(|c| c.conj() * 0.5)).collect();
    let mut zr = vec![Complex64::new(1.0, 0.0)];
    let mut vr = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..r {
        zr = kron_vec(&zr, &z);
        vr = kron_vec(&vr, &v);
    }
    let s: Complex64 = vr.iter().zip(&zr).map(|(a, b)| a * b).sum();
    assert!(s.im.abs() < 1e-9 * (1.0 + s.re.abs()), "lifted power is not real: {s}");
    s.re
}

/// Pooled polynomial readout through the lift, for oscillator-frame states
/// (rows are time steps).
pub fn tensor_lift_output(
    c: &Array2<Complex64>,
    w: &Array2<f64>,
    states: &Array2<Complex64>,
    monomial: &[f64],
) -> Array1<f64> {
    let d = c.nrows();
    let t = states.nrows();
    let mut pooled = Array1::zeros(d);
    for k in 0..t {
        let x: Vec<Complex64> = states.row(k).to_vec();
        for l in 0..d {
            let c_row: Vec<Complex64> = c.row(l).to_vec();
            pooled[l] += monomial.iter().enumerate().map(|(r, a)| a * tensor_lift_power(&c_row, &x, r)).sum::<f64>();
        }
    }
    w.dot(&(pooled / t as f64))
}
