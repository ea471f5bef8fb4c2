//! Dense complex linear algebra used by the propagators and oracles.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;

pub type CMatrix<T> = Array2<Complex<T>>;
pub type CVector<T> = Array1<Complex<T>>;

/// Conjugate transpose.
pub fn adjoint<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.t().mapv(|z| z.conj())
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    Array2::from_diag_elem(n, Complex::one())
}

pub fn from_diag<T: Real>(d: &CVector<T>) -> CMatrix<T> {
    Array2::from_diag(d)
}

/// Lift a real matrix into the complex plane.
pub fn complexify<T: Real>(m: &Array2<T>) -> CMatrix<T> {
    m.mapv(|x| Complex::new(x, T::zero()))
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    assert_eq!(a.dim(), b.dim(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).norm())
        .fold(T::zero(), T::max)
}

pub fn max_abs_diff_vec<T: Real>(a: &CVector<T>, b: &CVector<T>) -> T {
    assert_eq!(a.len(), b.len(), "length mismatch in max_abs_diff_vec");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).norm())
        .fold(T::zero(), T::max)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1<T: Real>(m: &CMatrix<T>) -> T {
    m.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// LU factorisation with partial pivoting, stored compactly.
pub struct Lu<T: Real> {
    lu: CMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn new(a: ArrayView2<'_, Complex<T>>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(dim_err(format!("LU of non-square {}x{} matrix", n, a.ncols())));
        }
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[[i, k]].norm()))
                .fold((k, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(pivot > tiny) {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let d = lu[[k, k]];
            for i in k + 1..n {
                let f = lu[[i, k]] / d;
                lu[[i, k]] = f;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let t = lu[[k, j]];
                    lu[[i, j]] -= f * t;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    /// Solve `A X = B` for every column of `B`.
    pub fn solve(&self, b: &CMatrix<T>) -> Result<CMatrix<T>> {
        let n = self.lu.nrows();
        if b.nrows() != n {
            return Err(dim_err(format!("rhs has {} rows, expected {}", b.nrows(), n)));
        }
        let mut x = b.select(Axis(0), &self.perm);
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[[i, col]];
                for j in 0..i {
                    s -= self.lu[[i, j]] * x[[j, col]];
                }
                x[[i, col]] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[[i, col]];
                for j in i + 1..n {
                    s -= self.lu[[i, j]] * x[[j, col]];
                }
                x[[i, col]] = s / self.lu[[i, i]];
            }
        }
        Ok(x)
    }
}

pub fn solve<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>> {
    Lu::new(a.view())?.solve(b)
}

pub fn inverse<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    solve(a, &identity(a.nrows()))
}

// [13/13] Padé coefficients for exp.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a [13/13] Padé approximant.
pub fn expm<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(dim_err(format!("expm of non-square {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    if n == 1 {
        return Ok(Array2::from_elem((1, 1), a[[0, 0]].exp()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite entry in expm argument".into()));
    }

    let norm = norm1(a).as_f64();
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = T::lit(2f64.powi(-squarings));
    let a1 = a.mapv(|z| z * scale);

    let b = |i: usize| Complex::new(T::lit(PADE13[i]), T::zero());
    let eye = identity::<T>(n);
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let lin = |c6: usize, c4: usize, c2: usize| -> CMatrix<T> {
        &a6.mapv(|z| z * b(c6)) + &a4.mapv(|z| z * b(c4)) + &a2.mapv(|z| z * b(c2))
    };
    let u_inner = &a6.dot(&lin(13, 11, 9)) + &lin(7, 5, 3) + &eye.mapv(|z| z * b(1));
    let u = a1.dot(&u_inner);
    let v = &a6.dot(&lin(12, 10, 8)) + &lin(6, 4, 2) + &eye.mapv(|z| z * b(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Entrywise complex matrix from separate real and imaginary parts.
pub fn from_parts<T: Real>(re: &Array2<T>, im: &Array2<T>) -> CMatrix<T> {
    ndarray::Zip::from(re).and(im).map_collect(|&r, &i| Complex::new(r, i))
}

pub fn real_part<T: Real>(m: &CMatrix<T>) -> Array2<T> {
    m.mapv(|z| z.re)
}

pub fn imag_part<T: Real>(m: &CMatrix<T>) -> Array2<T> {
    m.mapv(|z| z.im)
}

pub fn zeros<T: Real>(rows: usize, cols: usize) -> CMatrix<T> {
    Array2::from_elem((rows, cols), Complex::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, scale: f64, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| {
            Complex::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
        })
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = random(7, 1.0, 1);
        let x = random(7, 1.0, 2);
        let b = a.dot(&x);
        let got = solve(&a, &b).unwrap();
        assert!(max_abs_diff(&got, &x) < 1e-12);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = random(4, 1.0, 3);
        for j in 0..4 {
            a[[3, j]] = a[[0, j]] * Complex::new(2.0, 0.0);
        }
        assert!(matches!(Lu::new(a.view()), Err(Error::SingularMatrix)));
    }

    #[test]
    fn expm_of_diagonal_is_elementwise_exp() {
        let d: CVector<f64> = Array1::from_vec(vec![
            Complex::new(-1.0, 0.0),
            Complex::new(0.3, 2.0),
            Complex::new(-0.5, -40.0),
        ]);
        let e = expm(&from_diag(&d)).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!((e[[i, i]] - d[i].exp()).norm(), 0.0, epsilon = 1e-12 * d[i].exp().norm().max(1.0));
        }
    }

    #[test]
    fn expm_matches_taylor_series_for_small_norm() {
        let a = random(6, 0.2, 9);
        let mut term = identity::<f64>(6);
        let mut sum = identity::<f64>(6);
        for k in 1..40 {
            term = term.dot(&a).mapv(|z| z / k as f64);
            sum = &sum + &term;
        }
        assert!(max_abs_diff(&expm(&a).unwrap(), &sum) < 1e-13);
    }

    #[test]
    fn expm_inverse_pair() {
        let a = random(8, 3.0, 11);
        let e = expm(&a).unwrap();
        let einv = expm(&a.mapv(|z| -z)).unwrap();
        let prod = e.dot(&einv);
        assert!(max_abs_diff(&prod, &identity(8)) < 1e-9);
    }
}
