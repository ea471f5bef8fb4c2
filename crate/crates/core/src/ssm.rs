//! Diagonal state-space recurrence: S4D spectra, zero-order-hold
//! discretisation, the per-step and unrolled updates, and the modal update.
//!
//! The state is stored in the diagonal (modal) frame. The oscillator-frame
//! view of the same state is `F·x`, see [`crate::circulant::DftBasis`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::scalar::{ComplexRecord, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Lin,
    Inv,
    #[serde(alias = "fout", alias = "foutd")]
    FouT,
    Custom,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lin" => Ok(Self::Lin),
            "inv" => Ok(Self::Inv),
            "fout" | "foutd" => Ok(Self::FouT),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidParameter(format!("unknown spectrum variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Lin => "lin",
            Self::Inv => "inv",
            Self::FouT => "fout",
            Self::Custom => "custom",
        })
    }
}

/// Where the mode index `n` starts in the S4D-Inv formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexOrigin {
    Zero,
    #[default]
    One,
}

impl std::str::FromStr for IndexOrigin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" | "0" => Ok(Self::Zero),
            "one" | "1" => Ok(Self::One),
            _ => Err(Error::InvalidParameter(format!("unknown index origin '{s}'"))),
        }
    }
}

/// Continuous-time diagonal eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalSpectrum<T: Real> {
    pub variant: Variant,
    pub eigenvalues: CVector<T>,
}

impl<T: Real> DiagonalSpectrum<T> {
    pub fn custom(eigenvalues: CVector<T>) -> Self {
        Self { variant: Variant::Custom, eigenvalues }
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Temporal frequency of each mode, `Im(d)/(2π)`, in cycles per time unit.
    pub fn mode_frequencies(&self) -> Array1<T> {
        self.eigenvalues.mapv(|d| d.im / T::TAU())
    }
}

/// S4D eigenvalues for `j = 1..=N` (Lin, FouT) or the chosen origin (Inv).
pub fn s4d_spectrum<T: Real>(variant: Variant, n: usize) -> Result<DiagonalSpectrum<T>> {
    s4d_spectrum_with_origin(variant, n, IndexOrigin::One)
}

pub fn s4d_spectrum_with_origin<T: Real>(
    variant: Variant,
    n: usize,
    inv_origin: IndexOrigin,
) -> Result<DiagonalSpectrum<T>> {
    if n == 0 {
        return Err(dim_err("spectrum size must be at least 1"));
    }
    let half = T::lit(-0.5);
    let nf = T::from_usize_lossy(n);
    let eigenvalues = match variant {
        Variant::Lin => Array1::from_shape_fn(n, |j| Complex::new(half, T::PI() * T::from_usize_lossy(j + 1))),
        Variant::FouT => Array1::from_shape_fn(n, |j| {
            Complex::new(half, T::TAU() * T::from_usize_lossy(j + 1) / nf)
        }),
        Variant::Inv => {
            let shift = match inv_origin {
                IndexOrigin::Zero => 0,
                IndexOrigin::One => 1,
            };
            Array1::from_shape_fn(n, |j| {
                let idx = T::from_usize_lossy(2 * (j + shift) + 1);
                Complex::new(half, nf / T::PI() * (nf / idx - T::one()))
            })
        }
        Variant::Custom => {
            return Err(Error::InvalidParameter("custom spectra are built with DiagonalSpectrum::custom".into()))
        }
    };
    Ok(DiagonalSpectrum { variant, eigenvalues })
}

/// Below this `|d·τ|` the ZOH factor switches to its series expansion.
pub const ZOH_SERIES_THRESHOLD: f64 = 1e-8;

/// `exp(z) - 1` without cancellation for small `|z|`.
pub fn complex_expm1<T: Real>(z: Complex<T>) -> Complex<T> {
    let (s, c) = z.im.sin_cos();
    let half = (z.im / T::lit(2.0)).sin();
    Complex::new(
        z.re.exp_m1() * c - T::lit(2.0) * half * half,
        z.re.exp() * s,
    )
}

/// `(exp(dτ) - 1)/d`, with the series `τ(1 + dτ/2 + (dτ)²/6)` near `d = 0`.
pub fn zoh_factor<T: Real>(d: Complex<T>, tau: T) -> Complex<T> {
    let z = d * tau;
    if z.norm() < T::lit(ZOH_SERIES_THRESHOLD) {
        let one = Complex::<T>::one();
        (one + z / T::lit(2.0) + z * z / T::lit(6.0)) * tau
    } else {
        complex_expm1(z) / d
    }
}

/// Continuous-time input map `B` (`N × d_model`).
#[derive(Clone, Debug, PartialEq)]
pub struct InputMatrix<T: Real>(pub CMatrix<T>);

impl<T: Real> InputMatrix<T> {
    /// Independent complex Gaussian entries with total variance `1/N`.
    pub fn random<R: Rng + ?Sized>(n: usize, d_model: usize, rng: &mut R) -> Self {
        let std = (0.5 / n as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid normal");
        Self(Array2::from_shape_fn((n, d_model), |_| {
            Complex::new(T::lit(normal.sample(rng)), T::lit(normal.sample(rng)))
        }))
    }
}

/// Discrete-time system produced by zero-order hold.
#[derive(Clone, Debug)]
pub struct Discretization<T: Real> {
    pub tau: T,
    pub discrete_eigenvalues: CVector<T>,
    pub input_projection: CMatrix<T>,
    /// Row scale `(exp(dτ)-1)/d` applied to `B`.
    pub zoh_factors: CVector<T>,
}

impl<T: Real> Discretization<T> {
    pub fn state_dim(&self) -> usize {
        self.discrete_eigenvalues.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_projection.ncols()
    }
}

pub fn discretize_zoh<T: Real>(spectrum: &DiagonalSpectrum<T>, b: &InputMatrix<T>, tau: T) -> Result<Discretization<T>> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let n = spectrum.size();
    if b.0.nrows() != n {
        return Err(dim_err(format!("B has {} rows, spectrum has {} modes", b.0.nrows(), n)));
    }
    let discrete_eigenvalues = spectrum.eigenvalues.mapv(|d| (d * tau).exp());
    let zoh_factors = spectrum.eigenvalues.mapv(|d| zoh_factor(d, tau));
    let mut input_projection = b.0.clone();
    for (mut row, f) in input_projection.rows_mut().into_iter().zip(zoh_factors.iter()) {
        row.mapv_inplace(|z| z * *f);
    }
    Ok(Discretization { tau, discrete_eigenvalues, input_projection, zoh_factors })
}

fn check_input<T: Real>(disc: &Discretization<T>, u: ArrayView1<'_, T>) -> Result<()> {
    if u.len() != disc.input_dim() {
        return Err(dim_err(format!("input length {} != d_model {}", u.len(), disc.input_dim())));
    }
    Ok(())
}

fn project<T: Real>(bbar: &CMatrix<T>, u: ArrayView1<'_, T>) -> CVector<T> {
    Array1::from_shape_fn(bbar.nrows(), |i| {
        bbar.row(i).iter().zip(u.iter()).fold(Complex::zero(), |acc, (b, &x)| acc + *b * x)
    })
}

/// `x_k = exp(Dτ) ⊙ x_{k-1} + B̄ u_k`.
pub fn step<T: Real>(x_prev: &CVector<T>, disc: &Discretization<T>, u: ArrayView1<'_, T>) -> Result<CVector<T>> {
    if x_prev.len() != disc.state_dim() {
        return Err(dim_err(format!("state length {} != N {}", x_prev.len(), disc.state_dim())));
    }
    check_input(disc, u)?;
    let drive = project(&disc.input_projection, u);
    Ok(ndarray::Zip::from(x_prev)
        .and(&disc.discrete_eigenvalues)
        .and(&drive)
        .map_collect(|&x, &l, &b| l * x + b))
}

/// Iterate [`step`] over `inputs` (rows are time steps). Row `k` of the
/// result is `x_{k+1}`.
pub fn run_sequence<T: Real>(x0: &CVector<T>, disc: &Discretization<T>, inputs: ArrayView2<'_, T>) -> Result<CMatrix<T>> {
    let steps = inputs.nrows();
    let mut out = Array2::from_elem((steps, disc.state_dim()), Complex::zero());
    let mut x = x0.clone();
    for (k, u) in inputs.rows().into_iter().enumerate() {
        x = step(&x, disc, u)?;
        out.row_mut(k).assign(&x);
    }
    Ok(out)
}

/// `x_T = D^T x_0 + Σ_{j=1..T} D^{T-j} B̄ u_j`, using elementwise powers.
pub fn unrolled_state<T: Real>(
    x0: &CVector<T>,
    disc: &Discretization<T>,
    inputs: ArrayView2<'_, T>,
    t: usize,
) -> Result<CVector<T>> {
    if t > inputs.nrows() {
        return Err(Error::InvalidParameter(format!("T={t} exceeds input length {}", inputs.nrows())));
    }
    if x0.len() != disc.state_dim() {
        return Err(dim_err(format!("state length {} != N {}", x0.len(), disc.state_dim())));
    }
    let pow = |m: usize| disc.discrete_eigenvalues.mapv(|l| l.powi(m as i32));
    let mut x = &pow(t) * x0;
    for j in 1..=t {
        let u = inputs.row(j - 1);
        check_input(disc, u)?;
        x = &x + &(&pow(t - j) * &project(&disc.input_projection, u));
    }
    Ok(x)
}

/// `μ_i(k) = λ_{D,i} μ_i(k-1) + b̃_i^T u_k`.
pub fn modal_step<T: Real>(
    mu_prev: &CVector<T>,
    disc: &Discretization<T>,
    u: ArrayView1<'_, T>,
    b_tilde: &CMatrix<T>,
) -> Result<CVector<T>> {
    let n = disc.state_dim();
    if mu_prev.len() != n || b_tilde.nrows() != n {
        return Err(dim_err(format!(
            "modal state {} / b̃ rows {} must equal N {}",
            mu_prev.len(),
            b_tilde.nrows(),
            n
        )));
    }
    if u.len() != b_tilde.ncols() {
        return Err(dim_err(format!("input length {} != b̃ columns {}", u.len(), b_tilde.ncols())));
    }
    let drive = project(b_tilde, u);
    Ok(ndarray::Zip::from(mu_prev)
        .and(&disc.discrete_eigenvalues)
        .and(&drive)
        .map_collect(|&m, &l, &b| l * m + b))
}

/// JSON form: `{variant, N, tau, eigenvalues:[{re,im}], B:[[{re,im}]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationRecord {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    pub eigenvalues: Vec<ComplexRecord>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<ComplexRecord>>,
}

impl DiscretizationRecord {
    pub fn new<T: Real>(spectrum: &DiagonalSpectrum<T>, b: &InputMatrix<T>, tau: T) -> Self {
        let cvt = |z: &Complex<T>| ComplexRecord::from_complex(*z);
        Self {
            variant: spectrum.variant,
            n: spectrum.size(),
            tau: tau.as_f64(),
            eigenvalues: spectrum.eigenvalues.iter().map(cvt).collect(),
            b: b.0.rows().into_iter().map(|r| r.iter().map(cvt).collect()).collect(),
        }
    }

    pub fn spectrum<T: Real>(&self) -> DiagonalSpectrum<T> {
        DiagonalSpectrum {
            variant: self.variant,
            eigenvalues: self.eigenvalues.iter().map(|z| z.to_complex()).collect(),
        }
    }

    pub fn input_matrix<T: Real>(&self) -> Result<InputMatrix<T>> {
        let rows = self.b.len();
        let cols = self.b.first().map_or(0, Vec::len);
        if rows != self.n || self.b.iter().any(|r| r.len() != cols) {
            return Err(dim_err("B must be a rectangular N x d_model array"));
        }
        Ok(InputMatrix(Array2::from_shape_fn((rows, cols), |(i, j)| {
            self.b[i][j].to_complex()
        })))
    }
}
