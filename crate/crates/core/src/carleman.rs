//! The nonlinear decoder: feature mixing, GELU, the Chebyshev-fitted
//! polynomial (Carleman) surrogate, the binomial modal expansion and the
//! truncated output operator.
//!
//! Features are `y_k = Re(C·x_k)` with `x_k` in the oscillator frame, which
//! equals `Re(α·μ(k))` with `α = C·F` acting on modal amplitudes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::circulant::DftBasis;
use crate::error::{dim_err, Error, Result};
use crate::linalg::CMatrix;
use crate::modal::ModalSeries;
use crate::scalar::Real;
use crate::ssm::{run_sequence, Discretization};

/// Mixing matrix `C` (`d_model × N`) and its mode columns `α = C·F`.
#[derive(Clone, Debug)]
pub struct MixingMatrix<T: Real> {
    c: CMatrix<T>,
    alpha: CMatrix<T>,
}

impl<T: Real> MixingMatrix<T> {
    pub fn new(c: CMatrix<T>, basis: &DftBasis<T>) -> Result<Self> {
        if c.ncols() != basis.size() {
            return Err(dim_err(format!("C has {} columns, basis size is {}", c.ncols(), basis.size())));
        }
        let alpha = c.dot(basis.matrix());
        Ok(Self { c, alpha })
    }

    pub fn c(&self) -> &CMatrix<T> {
        &self.c
    }

    /// `α_{ℓi} = [C f_i]_ℓ`.
    pub fn alpha(&self) -> &CMatrix<T> {
        &self.alpha
    }

    pub fn d_model(&self) -> usize {
        self.c.nrows()
    }

    /// Mode column `c_i = C f_i`.
    pub fn mode_column(&self, i: usize) -> Array1<Complex<T>> {
        self.alpha.column(i).to_owned()
    }
}

/// Real features, `y[[ℓ, k]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSeries<T: Real> {
    pub y: Array2<T>,
}

impl<T: Real> FeatureSeries<T> {
    pub fn steps(&self) -> usize {
        self.y.ncols()
    }
}

/// `y_k = Re(C·x_k)` for oscillator-frame states (rows are time steps).
pub fn mix_features<T: Real>(states: ArrayView2<'_, Complex<T>>, mixing: &MixingMatrix<T>) -> Result<FeatureSeries<T>> {
    if states.ncols() != mixing.c.ncols() {
        return Err(dim_err(format!("state width {} != C columns {}", states.ncols(), mixing.c.ncols())));
    }
    Ok(FeatureSeries { y: mixing.c.dot(&states.t()).mapv(|z| z.re) })
}

/// `y_k = ½ Σ_i (μ_i(k) c_i + conj(μ_i(k) c_i))`.
pub fn mix_features_modal<T: Real>(series: &ModalSeries<T>, mixing: &MixingMatrix<T>) -> Result<FeatureSeries<T>> {
    if series.modes() != mixing.alpha.ncols() {
        return Err(dim_err(format!("series has {} modes, α has {} columns", series.modes(), mixing.alpha.ncols())));
    }
    let a = mixing.alpha.dot(&series.amplitudes);
    let half = T::lit(0.5);
    Ok(FeatureSeries { y: a.mapv(|z| (z + z.conj()).re * half) })
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x·Φ(x)`.
pub fn gelu<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    half * x * (T::one() + (x * T::FRAC_1_SQRT_2()).erf())
}

/// `Φ(x) + x·φ(x)`.
pub fn gelu_derivative<T: Real>(x: T) -> T {
    let cdf = T::lit(0.5) * (T::one() + (x * T::FRAC_1_SQRT_2()).erf());
    let pdf = T::lit(FRAC_1_SQRT_2PI) * (-x * x / T::lit(2.0)).exp();
    cdf + x * pdf
}

const TANH_C: f64 = 0.044_715;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Tanh approximation of GELU.
pub fn gelu_tanh<T: Real>(x: T) -> T {
    let inner = T::lit(SQRT_2_OVER_PI) * (x + T::lit(TANH_C) * x * x * x);
    T::lit(0.5) * x * (T::one() + inner.tanh())
}

pub fn gelu_tanh_derivative<T: Real>(x: T) -> T {
    let k = T::lit(SQRT_2_OVER_PI);
    let c = T::lit(TANH_C);
    let inner = k * (x + c * x * x * x);
    let t = inner.tanh();
    let half = T::lit(0.5);
    half * (T::one() + t) + half * x * (T::one() - t * t) * k * (T::one() + T::lit(3.0) * c * x * x)
}

/// Closed fitting interval, mapped affinely onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDomain {
    pub lo: f64,
    pub hi: f64,
}

impl FitDomain {
    pub const DEFAULT: FitDomain = FitDomain { lo: -4.0, hi: 4.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("fit domain [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(half_width: f64) -> Result<Self> {
        Self::new(-half_width, half_width)
    }

    fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

impl Default for FitDomain {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    /// One weight per sample node.
    Custom(Vec<f64>),
}

/// Sample nodes and weights for the least-squares fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Number of Chebyshev nodes `cos(π(m+½)/M)` on `[-1, 1]`.
    pub nodes: usize,
    pub weighting: Weighting,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { nodes: 257, weighting: Weighting::Uniform }
    }
}

impl SamplingSpec {
    pub fn node_positions<T: Real>(&self) -> Vec<T> {
        let m = T::from_usize_lossy(self.nodes);
        (0..self.nodes)
            .map(|i| (T::PI() * (T::from_usize_lossy(i) + T::lit(0.5)) / m).cos())
            .collect()
    }
}

/// Polynomial surrogate `Σ_r a_r y^r` of an activation on a fit domain.
#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanCoefficients<T: Real> {
    pub degree: usize,
    /// Monomial coefficients `a_0..a_R` in the original (unscaled) variable.
    pub monomial: Vec<T>,
    /// Chebyshev coefficients in the scaled variable.
    pub chebyshev: Vec<T>,
    pub domain: FitDomain,
    /// Clip inputs to the domain before evaluation.
    pub clip: bool,
}

/// Chebyshev polynomials `T_0..T_K` at `s`.
pub fn chebyshev_row<T: Real>(s: T, degree: usize) -> Vec<T> {
    let mut t = Vec::with_capacity(degree + 1);
    t.push(T::one());
    if degree >= 1 {
        t.push(s);
    }
    for k in 1..degree {
        let next = T::lit(2.0) * s * t[k] - t[k - 1];
        t.push(next);
    }
    t
}

fn chebyshev_to_monomial<T: Real>(cheb: &[T]) -> Vec<T> {
    let k = cheb.len();
    let mut out = vec![T::zero(); k];
    let mut prev: Vec<T> = vec![T::one()];
    let mut cur: Vec<T> = vec![T::zero(), T::one()];
    for (deg, &b) in cheb.iter().enumerate() {
        let poly = match deg {
            0 => &prev,
            1 => &cur,
            _ => {
                let mut next = vec![T::zero(); deg + 1];
                for (i, &c) in cur.iter().enumerate() {
                    next[i + 1] += T::lit(2.0) * c;
                }
                for (i, &c) in prev.iter().enumerate() {
                    next[i] -= c;
                }
                prev = std::mem::replace(&mut cur, next);
                &cur
            }
        };
        for (o, &c) in out.iter_mut().zip(poly.iter()) {
            *o += b * c;
        }
    }
    out
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `binom(n, k)` in the scalar type.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    T::lit(binomial_f64(n, k).round())
}

/// Substitute `s = (y - c)/h` into a polynomial in `s`.
fn rescale_monomial<T: Real>(in_s: &[T], domain: FitDomain) -> Vec<T> {
    let c = T::lit(domain.center());
    let h = T::lit(domain.half_width());
    let mut out = vec![T::zero(); in_s.len()];
    for (r, &coef) in in_s.iter().enumerate() {
        let scale = coef / h.powi(r as i32);
        for q in 0..=r {
            out[q] += scale * binomial::<T>(r, q) * (-c).powi((r - q) as i32);
        }
    }
    out
}

/// Symmetric positive definite solve; rejects badly conditioned systems.
fn cholesky_solve<T: Real>(g: &Array2<T>, rhs: &[T], max_condition: f64) -> Result<Vec<T>> {
    let n = rhs.len();
    let mut l = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = g[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::FitFailure(format!(
                        "normal equations not positive definite at column {i}; lower the degree"
                    )));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| l[[i, i]].as_f64()).collect();
    let hi = diag.iter().cloned().fold(0.0, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if (hi / lo).powi(2) > max_condition {
        return Err(Error::FitFailure(format!(
            "normal equations ill-conditioned (estimate {:.3e}); lower the degree",
            (hi / lo).powi(2)
        )));
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

const MAX_NORMAL_CONDITION: f64 = 1e12;

/// Weighted least-squares fit of `f` in the Chebyshev basis `T_0..T_K` on the
/// scaled domain, converted to monomials in the original variable.
pub fn chebyshev_fit<T: Real, F: Fn(T) -> T>(
    f: F,
    degree: usize,
    domain: FitDomain,
    sampling: &SamplingSpec,
) -> Result<CarlemanCoefficients<T>> {
    if sampling.nodes <= degree {
        return Err(Error::FitFailure(format!(
            "{} sample nodes cannot determine a degree-{degree} fit",
            sampling.nodes
        )));
    }
    let weights: Vec<T> = match &sampling.weighting {
        Weighting::Uniform => vec![T::one(); sampling.nodes],
        Weighting::Custom(w) => {
            if w.len() != sampling.nodes || w.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::InvalidParameter("custom weights must be non-negative, one per node".into()));
            }
            w.iter().map(|&x| T::lit(x)).collect()
        }
    };
    let c = T::lit(domain.center());
    let h = T::lit(domain.half_width());
    let k1 = degree + 1;
    let mut gram = Array2::<T>::zeros((k1, k1));
    let mut rhs = vec![T::zero(); k1];
    for (s, w) in sampling.node_positions::<T>().into_iter().zip(weights) {
        let row = chebyshev_row(s, degree);
        let fy = f(c + h * s);
        for i in 0..k1 {
            rhs[i] += w * row[i] * fy;
            for j in 0..k1 {
                gram[[i, j]] += w * row[i] * row[j];
            }
        }
    }
    let chebyshev = cholesky_solve(&gram, &rhs, MAX_NORMAL_CONDITION)?;
    let monomial = rescale_monomial(&chebyshev_to_monomial(&chebyshev), domain);
    Ok(CarlemanCoefficients { degree, monomial, chebyshev, domain, clip: true })
}

pub fn chebyshev_fit_gelu<T: Real>(degree: usize, domain: FitDomain, sampling: &SamplingSpec) -> Result<CarlemanCoefficients<T>> {
    chebyshev_fit(gelu, degree, domain, sampling)
}

impl<T: Real> CarlemanCoefficients<T> {
    /// Plain monomial coefficients with no fitting metadata beyond the domain.
    pub fn from_monomial(monomial: Vec<T>, domain: FitDomain, clip: bool) -> Self {
        let degree = monomial.len().saturating_sub(1);
        Self { degree, monomial, chebyshev: Vec::new(), domain, clip }
    }

    fn clip_value(&self, y: T) -> T {
        if self.clip {
            y.max(T::lit(self.domain.lo)).min(T::lit(self.domain.hi))
        } else {
            y
        }
    }

    /// `Σ_r a_r y^r` (Horner) after optional clipping.
    pub fn eval(&self, y: T) -> T {
        let y = self.clip_value(y);
        self.monomial.iter().rev().fold(T::zero(), |acc, &a| acc * y + a)
    }

    /// Evaluate through the Chebyshev representation (Clenshaw).
    pub fn eval_chebyshev(&self, y: T) -> T {
        let y = self.clip_value(y);
        let s = (y - T::lit(self.domain.center())) / T::lit(self.domain.half_width());
        let mut b1 = T::zero();
        let mut b2 = T::zero();
        for &c in self.chebyshev.iter().skip(1).rev() {
            let b0 = T::lit(2.0) * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        let c0 = self.chebyshev.first().copied().unwrap_or_else(T::zero);
        s * b1 - b2 + c0
    }

    /// Keep `a_0..a_R`.
    pub fn truncated(&self, order: usize) -> Self {
        let keep = (order + 1).min(self.monomial.len());
        Self {
            degree: keep.saturating_sub(1),
            monomial: self.monomial[..keep].to_vec(),
            chebyshev: Vec::new(),
            domain: self.domain,
            clip: self.clip,
        }
    }

    /// Coefficient `a_r`, zero past the stored degree.
    pub fn coefficient(&self, r: usize) -> T {
        self.monomial.get(r).copied().unwrap_or_else(T::zero)
    }
}

/// Largest `|p(y) - f(y)|` over `points` evenly spaced points of the domain.
pub fn max_grid_error<T: Real, F: Fn(T) -> T>(coeffs: &CarlemanCoefficients<T>, f: F, points: usize) -> T {
    let lo = T::lit(coeffs.domain.lo);
    let span = T::lit(coeffs.domain.hi - coeffs.domain.lo);
    let denom = T::from_usize_lossy(points.max(2) - 1);
    (0..points)
        .map(|i| {
            let y = lo + span * T::from_usize_lossy(i) / denom;
            (coeffs.eval(y) - f(y)).abs()
        })
        .fold(T::zero(), T::max)
}

/// Elementwise polynomial activation with clipping.
pub fn carleman_activation<T: Real>(features: &FeatureSeries<T>, coeffs: &CarlemanCoefficients<T>) -> FeatureSeries<T> {
    FeatureSeries { y: features.y.mapv(|v| coeffs.eval(v)) }
}

/// Pointwise nonlinearity applied to features.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation<T: Real> {
    Identity,
    Gelu,
    GeluTanh,
    Polynomial(CarlemanCoefficients<T>),
}

impl<T: Real> Activation<T> {
    pub fn apply(&self, x: T) -> T {
        match self {
            Self::Identity => x,
            Self::Gelu => gelu(x),
            Self::GeluTanh => gelu_tanh(x),
            Self::Polynomial(c) => c.eval(x),
        }
    }

    /// Derivative, where defined for training. Polynomial surrogates are
    /// differentiated inside the domain and are flat where clipped.
    pub fn derivative(&self, x: T) -> T {
        match self {
            Self::Identity => T::one(),
            Self::Gelu => gelu_derivative(x),
            Self::GeluTanh => gelu_tanh_derivative(x),
            Self::Polynomial(c) => {
                if c.clip && (x < T::lit(c.domain.lo) || x > T::lit(c.domain.hi)) {
                    return T::zero();
                }
                c.monomial
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(T::zero(), |acc, (r, &a)| acc * x + a * T::from_usize_lossy(r))
            }
        }
    }
}

/// Pooled linear readout `W` (`N_c × d_model`) with its activation.
#[derive(Clone, Debug)]
pub struct ReadoutStack<T: Real> {
    pub w: Array2<T>,
    pub activation: Activation<T>,
}

impl<T: Real> ReadoutStack<T> {
    pub fn n_classes(&self) -> usize {
        self.w.nrows()
    }
}

/// `O = (1/T)·W·Σ_k Λ(y_k)`.
pub fn output_operator<T: Real>(features: &FeatureSeries<T>, readout: &ReadoutStack<T>) -> Result<Array1<T>> {
    if features.steps() == 0 {
        return Err(Error::Empty("output operator needs T >= 1".into()));
    }
    if features.y.nrows() != readout.w.ncols() {
        return Err(dim_err(format!("feature width {} != W columns {}", features.y.nrows(), readout.w.ncols())));
    }
    let act = features.y.mapv(|v| readout.activation.apply(v));
    let pooled = act.mean_axis(Axis(1)).expect("non-empty");
    Ok(readout.w.dot(&pooled))
}

/// Full forward operator from inputs: recurrence, mixing, activation, pooled readout.
pub fn output_from_inputs<T: Real>(
    x0: &Array1<Complex<T>>,
    disc: &Discretization<T>,
    inputs: ArrayView2<'_, T>,
    mixing: &MixingMatrix<T>,
    readout: &ReadoutStack<T>,
) -> Result<Array1<T>> {
    let states = run_sequence(x0, disc, inputs)?;
    let a = mixing.alpha.dot(&states.t());
    output_operator(&FeatureSeries { y: a.mapv(|z| z.re) }, readout)
}

/// The `(r, m)` term `2^{-r}·binom(r,m)·A^m·conj(A)^{r-m}` with `A = α·μ`.
pub fn modal_monomial_term<T: Real>(
    mu: ArrayView1<'_, Complex<T>>,
    alpha: &CMatrix<T>,
    r: usize,
    m: usize,
) -> Result<Array1<Complex<T>>> {
    if m > r {
        return Err(Error::InvalidParameter(format!("split m={m} exceeds order r={r}")));
    }
    if mu.len() != alpha.ncols() {
        return Err(dim_err(format!("μ length {} != α columns {}", mu.len(), alpha.ncols())));
    }
    let a = alpha.dot(&mu);
    let scale = binomial::<T>(r, m) * T::lit(0.5).powi(r as i32);
    Ok(a.mapv(|z| z.powi(m as i32) * z.conj().powi((r - m) as i32) * scale))
}

/// Real part of [`modal_monomial_term`]; summing over `m = 0..=r` gives `y^r`.
pub fn modal_monomial_expansion<T: Real>(
    mu: ArrayView1<'_, Complex<T>>,
    alpha: &CMatrix<T>,
    r: usize,
    m: usize,
) -> Result<Array1<T>> {
    Ok(modal_monomial_term(mu, alpha, r, m)?.mapv(|z| z.re))
}

/// Order-`R` truncated operator evaluated on modal amplitudes,
/// `(1/T) Σ_r a_r 2^{-r} Σ_m binom(r,m) W Σ_k (Aμ)^m ⊙ conj(Aμ)^{r-m}`.
///
/// No clipping is applied on this path.
pub fn truncated_output<T: Real>(
    series: &ModalSeries<T>,
    mixing: &MixingMatrix<T>,
    w: &Array2<T>,
    coeffs: &CarlemanCoefficients<T>,
    order: usize,
) -> Result<Array1<T>> {
    let steps = series.steps();
    if steps == 0 {
        return Err(Error::Empty("truncated output needs T >= 1".into()));
    }
    if series.modes() != mixing.alpha.ncols() || w.ncols() != mixing.d_model() {
        return Err(dim_err("series, mixing and readout dimensions disagree"));
    }
    let a = mixing.alpha.dot(&series.amplitudes);
    let a_bar = a.mapv(|z| z.conj());
    let d = a.nrows();
    let mut pooled = Array1::<T>::zeros(d);
    // powers of A and conj(A), advanced one order at a time
    let mut pow_a: Vec<CMatrix<T>> = vec![Array2::from_elem(a.dim(), Complex::one())];
    let mut pow_b: Vec<CMatrix<T>> = vec![Array2::from_elem(a.dim(), Complex::one())];
    for r in 0..=order {
        if r > 0 {
            pow_a.push(&pow_a[r - 1] * &a);
            pow_b.push(&pow_b[r - 1] * &a_bar);
        }
        let ar = coeffs.coefficient(r);
        if ar == T::zero() {
            continue;
        }
        let scale = ar * T::lit(0.5).powi(r as i32);
        let mut acc: CMatrix<T> = Array2::from_elem(a.dim(), Complex::zero());
        for m in 0..=r {
            let b = binomial::<T>(r, m);
            acc = acc + (&pow_a[m] * &pow_b[r - m]).mapv(|z| z * b);
        }
        let summed = acc.sum_axis(Axis(1)).mapv(|z| z.re * scale);
        pooled = pooled + summed;
    }
    pooled.mapv_inplace(|v| v / T::from_usize_lossy(steps));
    Ok(w.dot(&pooled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::{s4d_spectrum, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut ChaCha8Rng) -> Complex<f64> {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn mixing(d: usize, n: usize, seed: u64) -> (MixingMatrix<f64>, DftBasis<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = DftBasis::new(n).unwrap();
        let c = Array2::from_shape_fn((d, n), |_| rc(&mut rng) * 0.3);
        (MixingMatrix::new(c, &basis).unwrap(), basis)
    }

    fn series(n: usize, t: usize, seed: u64) -> ModalSeries<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModalSeries {
            amplitudes: Array2::from_shape_fn((n, t), |_| rc(&mut rng)),
            tau: 0.01,
            mode_frequencies: s4d_spectrum::<f64>(Variant::Lin, n).unwrap().mode_frequencies(),
        }
    }

    #[test]
    fn alpha_matches_columns() {
        let (m, basis) = mixing(4, 8, 1);
        for i in 0..8 {
            let col = m.c().dot(&basis.mode(i));
            assert!(crate::linalg::max_abs_diff_vec(&col, &m.mode_column(i)) < 1e-12);
        }
        let bad = Array2::from_elem((2, 5), Complex::zero());
        assert!(MixingMatrix::new(bad, &basis).is_err());
    }

    #[test]
    fn mix_feature_cases() {
        let basis = DftBasis::<f64>::new(4).unwrap();
        let zero_c = MixingMatrix::new(Array2::from_elem((3, 4), Complex::zero()), &basis).unwrap();
        let states = Array2::from_elem((5, 4), Complex::new(1.0, 2.0));
        assert!(mix_features(states.view(), &zero_c).unwrap().y.iter().all(|v| *v == 0.0));

        let real_c = Array2::from_shape_fn((3, 4), |(i, j)| Complex::new((i * 4 + j) as f64 * 0.1, 0.0));
        let m = MixingMatrix::new(real_c.clone(), &basis).unwrap();
        let xs = Array2::from_shape_fn((2, 4), |(k, j)| Complex::new((k + j) as f64, 0.0));
        let y = mix_features(xs.view(), &m).unwrap();
        let want = real_c.mapv(|z| z.re).dot(&xs.mapv(|z| z.re).t());
        assert_eq!(y.y, want);
    }

    #[test]
    fn state_and_modal_mixing_agree() {
        let (m, basis) = mixing(4, 8, 2);
        let ser = series(8, 12, 3);
        let x = basis.matrix().dot(&ser.amplitudes).t().to_owned();
        let a = mix_features(x.view(), &m).unwrap();
        let b = mix_features_modal(&ser, &m).unwrap();
        let diff = (&a.y - &b.y).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(10.0f64) - 10.0).abs() < 1e-6);
        // Φ(1) to 40 digits: 0.8413447460685429485852325456320379224779
        assert!((gelu(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu(-1.0f64) + 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((gelu_tanh(1.0f64) - gelu(1.0)).abs() < 1e-3);
    }

    #[test]
    fn gelu_derivatives_match_finite_differences() {
        for x in [-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_derivative(x) - fd).abs() < 1e-8);
            let fd = (gelu_tanh(x + h) - gelu_tanh(x - h)) / (2.0 * h);
            assert!((gelu_tanh_derivative(x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn chebyshev_row_recurrence() {
        let s = 0.37f64;
        let row = chebyshev_row(s, 5);
        for (k, v) in row.iter().enumerate() {
            assert!((v - (k as f64 * s.acos()).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_fit_is_weighted_mean() {
        let spec = SamplingSpec::default();
        let fit = chebyshev_fit_gelu::<f64>(0, FitDomain::DEFAULT, &spec).unwrap();
        let mean = spec.node_positions::<f64>().iter().map(|s| gelu(4.0 * s)).sum::<f64>() / spec.nodes as f64;
        assert!((fit.monomial[0] - mean).abs() < 1e-14);
        assert!((fit.monomial[0] - 1.2311446882827761).abs() < 1e-12);
    }

    #[test]
    fn identity_fit_is_exact() {
        let fit = chebyshev_fit(|x: f64| x, 1, FitDomain::new(-1.0, 1.0).unwrap(), &SamplingSpec::default()).unwrap();
        assert!(fit.monomial[0].abs() < 1e-14);
        assert!((fit.monomial[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shifted_domain_monomials() {
        // a cubic is reproduced exactly on an off-centre domain
        let f = |x: f64| 0.5 - x + 0.25 * x * x - 0.1 * x * x * x;
        let fit = chebyshev_fit(f, 3, FitDomain::new(-1.0, 5.0).unwrap(), &SamplingSpec::default()).unwrap();
        for (got, want) in fit.monomial.iter().zip([0.5, -1.0, 0.25, -0.1]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn monomial_and_chebyshev_forms_agree_on_nodes() {
        let spec = SamplingSpec::default();
        let fit = chebyshev_fit_gelu::<f64>(8, FitDomain::DEFAULT, &spec).unwrap();
        for s in spec.node_positions::<f64>() {
            let y = 4.0 * s;
            assert!((fit.eval(y) - fit.eval_chebyshev(y)).abs() < 1e-12);
        }
    }

    #[test]
    fn gelu_fit_on_narrow_domain_matches_baseline() {
        // max grid error of an independent numpy chebfit on the same nodes
        const BASELINE: f64 = 0.002_186_844_576_340_458_3;
        let fit = chebyshev_fit_gelu::<f64>(8, FitDomain::symmetric(3.0).unwrap(), &SamplingSpec::default()).unwrap();
        let err = max_grid_error(&fit, gelu, 10_000);
        assert!(err <= BASELINE * 1.0001, "{err}");
        assert!(err >= BASELINE * 0.9999, "{err}");
    }

    #[test]
    fn fit_errors() {
        let few = SamplingSpec { nodes: 4, weighting: Weighting::Uniform };
        assert!(matches!(chebyshev_fit_gelu::<f64>(4, FitDomain::DEFAULT, &few), Err(Error::FitFailure(_))));
        let mut w = vec![1.0; 257];
        for v in w.iter_mut().skip(3) {
            *v = 0.0;
        }
        let sparse = SamplingSpec { nodes: 257, weighting: Weighting::Custom(w) };
        assert!(matches!(chebyshev_fit_gelu::<f64>(6, FitDomain::DEFAULT, &sparse), Err(Error::FitFailure(_))));
        assert!(FitDomain::new(1.0, 1.0).is_err());
    }

    #[test]
    fn activation_cases() {
        let id = CarlemanCoefficients::from_monomial(vec![0.0, 1.0], FitDomain::DEFAULT, true);
        let feats = FeatureSeries { y: ndarray::arr2(&[[-2.0, 0.5], [3.9, 0.0]]) };
        assert_eq!(carleman_activation(&feats, &id).y, feats.y);
        let clipped = carleman_activation(&FeatureSeries { y: ndarray::arr2(&[[9.0, -9.0]]) }, &id);
        assert_eq!(clipped.y, ndarray::arr2(&[[4.0, -4.0]]));

        let fit = chebyshev_fit_gelu::<f64>(4, FitDomain::DEFAULT, &SamplingSpec::default()).unwrap();
        let zero = carleman_activation(&FeatureSeries { y: Array2::zeros((2, 3)) }, &fit);
        assert!(zero.y.iter().all(|v| *v == fit.monomial[0]));

        let q = CarlemanCoefficients::from_monomial(vec![0.3, -0.2, 0.7], FitDomain::DEFAULT, true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ys: Array2<f64> = Array2::from_shape_fn((3, 7), |_| rng.random_range(-3.0..3.0));
        let got = carleman_activation(&FeatureSeries { y: ys.clone() }, &q);
        for (g, y) in got.y.iter().zip(ys.iter()) {
            let want = 0.3 + -0.2 * y + 0.7 * y * y;
            assert!((g - want).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_derivative() {
        let q = CarlemanCoefficients::from_monomial(vec![0.3, -0.2, 0.7, 0.05], FitDomain::DEFAULT, true);
        let act = Activation::Polynomial(q);
        let x = 1.3f64;
        assert!((act.derivative(x) - (-0.2 + 1.4 * x + 0.15 * x * x)).abs() < 1e-14);
        assert_eq!(act.derivative(5.0), 0.0);
    }

    #[test]
    fn output_operator_cases() {
        let feats = FeatureSeries { y: ndarray::arr2(&[[0.5, -1.0, 2.0], [1.0, 1.0, 1.0]]) };
        let zero = ReadoutStack { w: Array2::zeros((2, 2)), activation: Activation::Gelu };
        assert!(output_operator(&feats, &zero).unwrap().iter().all(|v| *v == 0.0));

        let w = ndarray::arr2(&[[1.0, 2.0], [-1.0, 0.5]]);
        let one = FeatureSeries { y: ndarray::arr2(&[[0.3], [-0.7]]) };
        let lin = ReadoutStack { w: w.clone(), activation: Activation::Identity };
        let o = output_operator(&one, &lin).unwrap();
        assert_eq!(o, w.dot(&ndarray::arr1(&[0.3, -0.7])));

        let empty = FeatureSeries { y: Array2::zeros((2, 0)) };
        assert!(output_operator(&empty, &lin).is_err());
    }

    #[test]
    fn binomial_terms() {
        let (m, _) = mixing(3, 6, 7);
        let ser = series(6, 1, 8);
        let mu = ser.amplitudes.column(0);
        let y = m.alpha().dot(&mu).mapv(|z| z.re);

        let r0 = modal_monomial_expansion(mu, m.alpha(), 0, 0).unwrap();
        assert!(r0.iter().all(|v| (*v - 1.0).abs() < 1e-15));

        let r1: Array1<f64> = (0..=1).map(|k| modal_monomial_expansion(mu, m.alpha(), 1, k).unwrap()).fold(Array1::zeros(3), |a, b| a + b);
        assert!((&r1 - &y).iter().all(|v| v.abs() < 1e-14));

        let r2: Array1<f64> = (0..=2).map(|k| modal_monomial_expansion(mu, m.alpha(), 2, k).unwrap()).fold(Array1::zeros(3), |a, b| a + b);
        assert!((&r2 - &y.mapv(|v| v * v)).iter().all(|v| v.abs() < 1e-12));

        assert!(modal_monomial_term(mu, m.alpha(), 2, 3).is_err());
    }

    #[test]
    fn truncated_output_special_orders() {
        let (m, _) = mixing(3, 6, 9);
        let ser = series(6, 10, 10);
        let w = ndarray::arr2(&[[1.0, -0.5, 0.2], [0.3, 0.3, -1.0]]);
        let coeffs = CarlemanCoefficients::from_monomial(vec![0.2, 0.5, 0.3], FitDomain::symmetric(50.0).unwrap(), true);

        let o0 = truncated_output(&ser, &m, &w, &coeffs, 0).unwrap();
        let want = w.dot(&Array1::from_elem(3, 0.2));
        assert!((&o0 - &want).iter().all(|v| v.abs() < 1e-14));

        for order in 0..=2 {
            let feats = mix_features_modal(&ser, &m).unwrap();
            let readout = ReadoutStack { w: w.clone(), activation: Activation::Polynomial(coeffs.truncated(order)) };
            let direct = output_operator(&feats, &readout).unwrap();
            let modal = truncated_output(&ser, &m, &w, &coeffs, order).unwrap();
            assert!((&direct - &modal).iter().all(|v| v.abs() < 1e-12), "order {order}");
        }
    }
}
