//! Closed-form DFT eigenbasis, circulant construction and diagonalisation,
//! and reconstruction of the ring coupling matrix from a diagonal spectrum.
//!
//! Storage is 0-based: entry `(j, s)` of the basis holds
//! `exp(-2πi·j·s/N)/√N`. Reports convert to 1-based labels.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{dim_err, Result};
use crate::linalg::{adjoint, CMatrix, CVector};
use crate::scalar::{cis, principal_arg, Real};

/// Absolute tolerance used when testing whether a matrix is circulant.
pub const CIRCULANT_TOL: f64 = 1e-10;

/// `exp(-2πi·m/N)` with the exponent reduced mod `N` before evaluation.
fn root_of_unity<T: Real>(m: usize, n: usize) -> Complex<T> {
    let r = m % n;
    let theta = -T::TAU() * T::from_usize_lossy(r) / T::from_usize_lossy(n);
    cis(theta)
}

/// The unitary DFT matrix that diagonalises every `N×N` circulant.
#[derive(Clone, Debug)]
pub struct DftBasis<T: Real> {
    entries: CMatrix<T>,
}

impl<T: Real> DftBasis<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(dim_err("DFT basis size must be at least 1"));
        }
        let norm = T::one() / T::from_usize_lossy(n).sqrt();
        let entries = Array2::from_shape_fn((n, n), |(j, s)| root_of_unity::<T>(j * s, n) * norm);
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn adjoint(&self) -> CMatrix<T> {
        adjoint(&self.entries)
    }

    /// Eigenmode `f_j` (0-based column `j`).
    pub fn mode(&self, j: usize) -> CVector<T> {
        self.entries.column(j).to_owned()
    }

    /// `F† v`: coordinates of `v` in the mode basis.
    pub fn analyze(&self, v: &CVector<T>) -> Result<CVector<T>> {
        check_len(v.len(), self.size())?;
        let n = self.size();
        Ok(Array1::from_shape_fn(n, |j| {
            (0..n).map(|s| self.entries[[s, j]].conj() * v[s]).sum()
        }))
    }

    /// `F μ`: field on the ring from mode amplitudes.
    pub fn synthesize(&self, mu: &CVector<T>) -> Result<CVector<T>> {
        check_len(mu.len(), self.size())?;
        Ok(self.entries.dot(mu))
    }
}

/// Shorthand for [`DftBasis::new`].
pub fn dft_basis<T: Real>(n: usize) -> Result<DftBasis<T>> {
    DftBasis::new(n)
}

fn check_len(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(dim_err(format!("vector length {got} does not match basis size {want}")));
    }
    Ok(())
}

/// Dense circulant whose row `r` is the generator rotated right by `r`.
#[derive(Clone, Debug)]
pub struct CirculantMatrix<T: Real> {
    generator: CVector<T>,
    dense: CMatrix<T>,
}

impl<T: Real> CirculantMatrix<T> {
    pub fn generator(&self) -> &CVector<T> {
        &self.generator
    }

    pub fn dense(&self) -> &CMatrix<T> {
        &self.dense
    }
}

pub fn circulant_from_generator<T: Real>(c: &CVector<T>) -> Result<CirculantMatrix<T>> {
    let n = c.len();
    if n == 0 {
        return Err(dim_err("circulant generator must be non-empty"));
    }
    let dense = Array2::from_shape_fn((n, n), |(i, j)| c[(j + n - i) % n]);
    Ok(CirculantMatrix { generator: c.clone(), dense })
}

/// Eigenvalues of a circulant, in mode order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: CVector<T>,
}

/// `λ_s = Σ_j c_j exp(-2πi·s·j/N)`, i.e. the unnormalised DFT of the generator.
pub fn circulant_eigenvalues<T: Real>(c: &CVector<T>) -> Result<Spectrum<T>> {
    let n = c.len();
    if n == 0 {
        return Err(dim_err("circulant generator must be non-empty"));
    }
    let eigenvalues = Array1::from_shape_fn(n, |s| {
        (0..n).fold(Complex::zero(), |acc, j| acc + c[j] * root_of_unity::<T>(s * j, n))
    });
    Ok(Spectrum { eigenvalues })
}

/// `K = F·diag(d)·F†`.
///
/// Evaluated entrywise as `K_ab = (1/N) Σ_s d_s exp(-2πi·(a-b)·s/N)`, which is
/// the same product with the roots of unity reduced exactly.
pub fn reconstruct_coupling<T: Real>(eigenvalues: &CVector<T>, basis: &DftBasis<T>) -> Result<CMatrix<T>> {
    let n = basis.size();
    if eigenvalues.len() != n {
        return Err(dim_err(format!(
            "spectrum length {} does not match basis size {}",
            eigenvalues.len(),
            n
        )));
    }
    let inv_n = T::one() / T::from_usize_lossy(n);
    let profile: Vec<Complex<T>> = (0..n)
        .map(|m| {
            (0..n).fold(Complex::zero(), |acc, s| acc + eigenvalues[s] * root_of_unity::<T>(m * s, n)) * inv_n
        })
        .collect();
    Ok(Array2::from_shape_fn((n, n), |(a, b)| profile[(a + n - b) % n]))
}

/// Largest deviation of `m` from the circulant generated by its first row.
pub fn circulant_residual<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let d = (m[[i, j]] - m[[0, (j + n - i) % n]]).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn is_circulant<T: Real>(m: &CMatrix<T>) -> bool {
    m.nrows() == m.ncols() && circulant_residual(m) < T::lit(CIRCULANT_TOL)
}

/// Ring distance `min(|i-j|, N-|i-j|)`.
pub fn ring_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j) % n;
    d.min(n - d)
}

/// Magnitude and phase fields of a coupling matrix, for topology reports.
#[derive(Clone, Debug)]
pub struct CouplingFields<T: Real> {
    pub magnitude: Array2<T>,
    pub phase: Array2<T>,
}

pub fn coupling_fields<T: Real>(k: &CMatrix<T>) -> CouplingFields<T> {
    CouplingFields {
        magnitude: k.mapv(|z| z.norm()),
        phase: k.mapv(principal_arg),
    }
}

/// Connection magnitude as a function of ring distance.
///
/// Returns the profile read from row 0 and the largest deviation of any
/// entry from the profile value at its ring distance.
pub fn distance_profile<T: Real>(magnitude: &Array2<T>) -> (Vec<T>, T) {
    let n = magnitude.nrows();
    let mut profile = vec![T::zero(); n / 2 + 1];
    for (j, p) in (0..=n / 2).zip(profile.iter_mut()) {
        *p = magnitude[[0, j % n]];
    }
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            let d = ring_distance(i, j, n);
            worst = worst.max((magnitude[[i, j]] - profile[d]).abs());
        }
    }
    (profile, worst)
}
