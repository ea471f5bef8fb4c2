//! Encoder → diagonal SSM → mixing → activation → mean-pool → readout, with
//! hand-written reverse-mode gradients and a JSON checkpoint.
//!
//! The state is kept in modal coordinates `μ`; the oscillator-frame state is
//! `x = F·μ`, so features are `y_k = Re(C·x_k) = Re(α·μ_k)` with `α = C·F`.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleman::{gelu, gelu_derivative, gelu_tanh, gelu_tanh_derivative, MixingMatrix};
use crate::circulant::DftBasis;
use crate::data::Sample;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{from_parts, imag_part, real_part, CMatrix};
use crate::modal::ModalSeries;
use crate::scalar::{ComplexRecord, Real};
use crate::ssm::{discretize_zoh, s4d_spectrum_with_origin, DiagonalSpectrum, Discretization, IndexOrigin, InputMatrix, Variant};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    #[default]
    Gelu,
    GeluTanh,
    Identity,
}

impl ActivationKind {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Self::Gelu => gelu(x),
            Self::GeluTanh => gelu_tanh(x),
            Self::Identity => x,
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Self::Gelu => gelu_derivative(x),
            Self::GeluTanh => gelu_tanh_derivative(x),
            Self::Identity => T::one(),
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gelu" => Ok(Self::Gelu),
            "gelu-tanh" | "gelu_tanh" => Ok(Self::GeluTanh),
            "identity" => Ok(Self::Identity),
            _ => Err(Error::InvalidParameter(format!("unknown activation '{s}'"))),
        }
    }
}

/// Which parameter tensors receive gradient updates. Eigenvalues never do.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Trainables {
    pub c: bool,
    pub w: bool,
    pub b: bool,
    pub encoder: bool,
}

impl Default for Trainables {
    fn default() -> Self {
        Self { c: true, w: true, b: false, encoder: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub d_model: usize,
    pub tau: f64,
    pub variant: Variant,
    pub index_origin: IndexOrigin,
    pub n_classes: usize,
    pub channels: usize,
    pub activation: ActivationKind,
    pub trainables: Trainables,
    /// Seed for parameter initialisation.
    pub init_seed: u64,
    /// Dataset labels the classes map to, when trained on a subset of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 64,
            d_model: 64,
            tau: 0.01,
            variant: Variant::Lin,
            index_origin: IndexOrigin::One,
            n_classes: 3,
            channels: 1,
            activation: ActivationKind::Gelu,
            trainables: Trainables::default(),
            init_seed: 0,
            classes: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d_model == 0 || self.channels == 0 || self.n_classes == 0 {
            return Err(dim_err("N, d_model, channels and n_classes must be positive"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if let Some(c) = &self.classes {
            if c.len() != self.n_classes {
                return Err(Error::InvalidParameter(format!("{} class labels for {} classes", c.len(), self.n_classes)));
            }
        }
        if self.variant == Variant::Custom {
            return Err(Error::InvalidParameter("custom spectra are only available through checkpoints".into()));
        }
        Ok(())
    }
}

/// The trainable tensors. Also used for gradients of the same shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters<T: Real> {
    /// Continuous-time input map, `N × d_model`.
    pub b: CMatrix<T>,
    /// Real encoder, `d_model × channels`.
    pub encoder: Array2<T>,
    /// Mixing matrix, `d_model × N`.
    pub c: CMatrix<T>,
    /// Readout, `N_c × d_model`.
    pub w: Array2<T>,
}

impl<T: Real> Parameters<T> {
    pub fn zeros_like(other: &Self) -> Self {
        Self {
            b: Array2::zeros(other.b.dim()),
            encoder: Array2::zeros(other.encoder.dim()),
            c: Array2::zeros(other.c.dim()),
            w: Array2::zeros(other.w.dim()),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.b += &other.b;
        self.encoder += &other.encoder;
        self.c += &other.c;
        self.w += &other.w;
    }

    pub fn scale(&mut self, s: T) {
        self.b.mapv_inplace(|z| z * s);
        self.encoder.mapv_inplace(|v| v * s);
        self.c.mapv_inplace(|z| z * s);
        self.w.mapv_inplace(|v| v * s);
    }

    /// Real scalars of one tensor in a fixed order (complex as re, im).
    pub fn reals_mut(&mut self, tensor: Tensor) -> Vec<&mut T> {
        match tensor {
            Tensor::B => self.b.iter_mut().flat_map(|z| [&mut z.re, &mut z.im]).collect(),
            Tensor::C => self.c.iter_mut().flat_map(|z| [&mut z.re, &mut z.im]).collect(),
            Tensor::Encoder => self.encoder.iter_mut().collect(),
            Tensor::W => self.w.iter_mut().collect(),
        }
    }

    pub fn reals(&self, tensor: Tensor) -> Vec<T> {
        match tensor {
            Tensor::B => self.b.iter().flat_map(|z| [z.re, z.im]).collect(),
            Tensor::C => self.c.iter().flat_map(|z| [z.re, z.im]).collect(),
            Tensor::Encoder => self.encoder.iter().copied().collect(),
            Tensor::W => self.w.iter().copied().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tensor {
    B,
    Encoder,
    C,
    W,
}

impl Tensor {
    pub const ALL: [Tensor; 4] = [Tensor::B, Tensor::Encoder, Tensor::C, Tensor::W];

    pub fn name(self) -> &'static str {
        match self {
            Self::B => "B",
            Self::Encoder => "encoder",
            Self::C => "C",
            Self::W => "W",
        }
    }

    pub fn enabled(self, t: &Trainables) -> bool {
        match self {
            Self::B => t.b,
            Self::Encoder => t.encoder,
            Self::C => t.c,
            Self::W => t.w,
        }
    }
}

/// Intermediate values of one forward pass (time-major).
#[derive(Clone, Debug)]
pub struct ForwardCache<T: Real> {
    /// `S^T`, `T × channels`.
    pub inputs: Array2<T>,
    /// Modal state, real and imaginary parts, `T × N`.
    pub xr: Array2<T>,
    pub xi: Array2<T>,
    /// Pre-activation features, `T × d_model`.
    pub y: Array2<T>,
    pub pooled: Array1<T>,
    pub logits: Array1<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn steps(&self) -> usize {
        self.xr.nrows()
    }

    /// Modal trajectory, rows are time steps.
    pub fn states(&self) -> CMatrix<T> {
        from_parts(&self.xr, &self.xi)
    }

    /// Features `y[[ℓ, k]]`.
    pub fn features(&self) -> Array2<T> {
        self.y.t().to_owned()
    }
}

#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    config: ModelConfig,
    spectrum: DiagonalSpectrum<T>,
    params: Parameters<T>,
    basis: DftBasis<T>,
    disc: Discretization<T>,
    alpha: CMatrix<T>,
}

fn normal_matrix<R: rand::Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

impl<T: Real> Model<T> {
    /// Seeded initialisation: `C` with real and imaginary variance `1/(2N)`,
    /// `W` with variance `1/d_model`, encoder with variance `1/channels`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let spectrum = s4d_spectrum_with_origin::<T>(config.variant, config.n, config.index_origin)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let (n, d) = (config.n, config.d_model);
        let b = InputMatrix::<T>::random(n, d, &mut rng).0;
        let encoder = normal_matrix(d, config.channels, (1.0 / config.channels as f64).sqrt(), &mut rng).mapv(T::lit);
        let c_std = (0.5 / n as f64).sqrt();
        let cr = normal_matrix(d, n, c_std, &mut rng);
        let ci = normal_matrix(d, n, c_std, &mut rng);
        let c = Array2::from_shape_fn((d, n), |ij| Complex::new(T::lit(cr[ij]), T::lit(ci[ij])));
        let w = normal_matrix(config.n_classes, d, (1.0 / d as f64).sqrt(), &mut rng).mapv(T::lit);
        Self::from_parts(config, spectrum, Parameters { b, encoder, c, w })
    }

    pub fn from_parts(config: ModelConfig, spectrum: DiagonalSpectrum<T>, params: Parameters<T>) -> Result<Self> {
        let (n, d) = (spectrum.size(), config.d_model);
        let shapes_ok = params.b.dim() == (n, d)
            && params.encoder.dim() == (d, config.channels)
            && params.c.dim() == (d, n)
            && params.w.dim() == (config.n_classes, d)
            && n == config.n;
        if !shapes_ok {
            return Err(dim_err("parameter shapes disagree with the model config"));
        }
        let basis = DftBasis::new(n)?;
        let disc = discretize_zoh(&spectrum, &InputMatrix(params.b.clone()), T::lit(config.tau))?;
        let alpha = params.c.dot(basis.matrix());
        Ok(Self { config, spectrum, params, basis, disc, alpha })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn spectrum(&self) -> &DiagonalSpectrum<T> {
        &self.spectrum
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn basis(&self) -> &DftBasis<T> {
        &self.basis
    }

    pub fn discretization(&self) -> &Discretization<T> {
        &self.disc
    }

    pub fn alpha(&self) -> &CMatrix<T> {
        &self.alpha
    }

    pub fn mixing(&self) -> MixingMatrix<T> {
        MixingMatrix::new(self.params.c.clone(), &self.basis).expect("shapes checked at construction")
    }

    /// Mutate parameters, then rebuild the derived caches.
    pub fn update_params<F: FnOnce(&mut Parameters<T>)>(&mut self, f: F) -> Result<()> {
        f(&mut self.params);
        self.refresh()
    }

    fn refresh(&mut self) -> Result<()> {
        self.disc = discretize_zoh(&self.spectrum, &InputMatrix(self.params.b.clone()), T::lit(self.config.tau))?;
        self.alpha = self.params.c.dot(self.basis.matrix());
        Ok(())
    }

    /// Forward pass on one series (`channels × T`).
    pub fn forward(&self, series: ArrayView2<'_, f64>) -> Result<ForwardCache<T>> {
        if series.nrows() != self.config.channels {
            return Err(dim_err(format!("series has {} channels, model expects {}", series.nrows(), self.config.channels)));
        }
        let steps = series.ncols();
        if steps == 0 {
            return Err(Error::Empty("forward pass needs T >= 1".into()));
        }
        let inputs: Array2<T> = series.t().mapv(T::lit);
        // P = B̄·E, so the drive is V = S^T P^T
        let enc = self.params.encoder.mapv(|v| Complex::new(v, T::zero()));
        let p = self.disc.input_projection.dot(&enc);
        let mut xr = inputs.dot(&real_part(&p).t());
        let mut xi = inputs.dot(&imag_part(&p).t());
        let lam = &self.disc.discrete_eigenvalues;
        for k in 1..steps {
            let (prev, mut cur) = xr.view_mut().split_at(Axis(0), k);
            let (prev_i, mut cur_i) = xi.view_mut().split_at(Axis(0), k);
            let pr = prev.row(k - 1);
            let pi = prev_i.row(k - 1);
            Zip::from(cur.row_mut(0))
                .and(cur_i.row_mut(0))
                .and(&pr)
                .and(&pi)
                .and(lam)
                .for_each(|r, i, &a, &b, l| {
                    *r += l.re * a - l.im * b;
                    *i += l.re * b + l.im * a;
                });
        }
        let y = xr.dot(&real_part(&self.alpha).t()) - xi.dot(&imag_part(&self.alpha).t());
        let act = self.config.activation;
        let pooled = y.mapv(|v| act.apply(v)).mean_axis(Axis(0)).expect("T >= 1");
        let logits = self.params.w.dot(&pooled);
        Ok(ForwardCache { inputs, xr, xi, y, pooled, logits })
    }

    pub fn logits(&self, series: ArrayView2<'_, f64>) -> Result<Array1<T>> {
        Ok(self.forward(series)?.logits)
    }

    /// Modal trajectory of one series as a [`ModalSeries`].
    pub fn modal_series(&self, series: ArrayView2<'_, f64>) -> Result<ModalSeries<T>> {
        let cache = self.forward(series)?;
        ModalSeries::from_modal_states(cache.states().view(), &self.spectrum, self.disc.tau)
    }

    /// Gradients of `dlogits · logits` with respect to every tensor.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &Array1<T>) -> Parameters<T> {
        let steps = cache.steps();
        let inv_t = T::one() / T::from_usize_lossy(steps);
        let act = self.config.activation;

        let gw = outer(dlogits, &cache.pooled);
        let gpool = self.params.w.t().dot(dlogits);
        let mut gy = cache.y.mapv(|v| act.derivative(v));
        for mut row in gy.rows_mut() {
            Zip::from(&mut row).and(&gpool).for_each(|g, &p| *g *= p * inv_t);
        }

        let ar = real_part(&self.alpha);
        let ai = imag_part(&self.alpha);
        let g_alpha_r = gy.t().dot(&cache.xr);
        let g_alpha_i = gy.t().dot(&cache.xi).mapv(|v| -v);
        let gc = from_parts(&g_alpha_r, &g_alpha_i).dot(&self.basis.adjoint());

        // adjoint recursion a_k = g_k + conj(λ)·a_{k+1}
        let mut adj_r = gy.dot(&ar);
        let mut adj_i = gy.dot(&ai).mapv(|v| -v);
        let lam = &self.disc.discrete_eigenvalues;
        for k in (0..steps.saturating_sub(1)).rev() {
            let (mut cur, next) = adj_r.view_mut().split_at(Axis(0), k + 1);
            let (mut cur_i, next_i) = adj_i.view_mut().split_at(Axis(0), k + 1);
            Zip::from(cur.row_mut(k))
                .and(cur_i.row_mut(k))
                .and(next.row(0))
                .and(next_i.row(0))
                .and(lam)
                .for_each(|r, i, &a, &b, l| {
                    *r += l.re * a + l.im * b;
                    *i += l.re * b - l.im * a;
                });
        }

        // P = B̄·E: gP = (S·A)^T
        let gp_r = cache.inputs.t().dot(&adj_r).reversed_axes();
        let gp_i = cache.inputs.t().dot(&adj_i).reversed_axes();
        let bbar = &self.disc.input_projection;
        let genc = real_part(bbar).t().dot(&gp_r) + imag_part(bbar).t().dot(&gp_i);
        let enc_t = self.params.encoder.t();
        let mut gb = from_parts(&gp_r.dot(&enc_t), &gp_i.dot(&enc_t));
        for (mut row, f) in gb.rows_mut().into_iter().zip(self.disc.zoh_factors.iter()) {
            let fc = f.conj();
            row.mapv_inplace(|z| z * fc);
        }
        Parameters { b: gb, encoder: genc, c: gc, w: gw }
    }

    /// Mean softmax cross-entropy over a batch and its gradients. Tensors that
    /// are not trainable get zero gradients.
    pub fn loss_and_grads(&self, batch: &[&Sample]) -> Result<BatchResult<T>> {
        if batch.is_empty() {
            return Err(Error::Empty("loss needs a non-empty batch".into()));
        }
        let per: Vec<Result<(T, bool, Parameters<T>)>> = batch
            .par_iter()
            .map(|s| {
                let cache = self.forward(s.series.view())?;
                let label = self.class_index(s.label)?;
                let (loss, mut dl) = cross_entropy(&cache.logits, label);
                let correct = argmax(&cache.logits) == label;
                dl.mapv_inplace(|v| v / T::from_usize_lossy(batch.len()));
                Ok((loss, correct, self.backward(&cache, &dl)))
            })
            .collect();
        let mut grads = Parameters::zeros_like(&self.params);
        let mut loss = T::zero();
        let mut correct = 0;
        for r in per {
            let (l, ok, g) = r?;
            loss += l;
            correct += ok as usize;
            grads.add_assign(&g);
        }
        loss /= T::from_usize_lossy(batch.len());
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        let t = self.config.trainables;
        if !t.b {
            grads.b.fill(Complex::new(T::zero(), T::zero()));
        }
        if !t.encoder {
            grads.encoder.fill(T::zero());
        }
        if !t.c {
            grads.c.fill(Complex::new(T::zero(), T::zero()));
        }
        if !t.w {
            grads.w.fill(T::zero());
        }
        Ok(BatchResult { loss, correct, grads })
    }

    pub fn class_index(&self, label: usize) -> Result<usize> {
        if label == 0 || label > self.config.n_classes {
            return Err(Error::IndexOutOfRange(format!("label {label} outside 1..={}", self.config.n_classes)));
        }
        Ok(label - 1)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let cplx = |m: &CMatrix<T>| m.rows().into_iter().map(|r| r.iter().map(|z| ComplexRecord::from_complex(*z)).collect()).collect();
        let real = |m: &Array2<T>| m.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            config: self.config.clone(),
            eigenvalues: self.spectrum.eigenvalues.iter().map(|z| ComplexRecord::from_complex(*z)).collect(),
            b: cplx(&self.params.b),
            encoder: real(&self.params.encoder),
            c: cplx(&self.params.c),
            w: real(&self.params.w),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Schema(format!("unsupported checkpoint format {}", ck.format)));
        }
        let spectrum = DiagonalSpectrum {
            variant: ck.config.variant,
            eigenvalues: ck.eigenvalues.iter().map(|z| z.to_complex()).collect(),
        };
        let params = Parameters {
            b: nested_complex(&ck.b, "B")?,
            encoder: nested_real(&ck.encoder, "encoder")?,
            c: nested_complex(&ck.c, "C")?,
            w: nested_real(&ck.w, "W")?,
        };
        Self::from_parts(ck.config.clone(), spectrum, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_checkpoint())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_checkpoint(&ck)
    }
}

pub struct BatchResult<T: Real> {
    pub loss: T,
    pub correct: usize,
    pub grads: Parameters<T>,
}

fn outer<T: Real>(a: &Array1<T>, b: &Array1<T>) -> Array2<T> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax<T: Real>(v: &Array1<T>) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `(−log softmax(z)_label, softmax(z) − e_label)`.
pub fn cross_entropy<T: Real>(logits: &Array1<T>, label: usize) -> (T, Array1<T>) {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps = logits.mapv(|z| (z - m).exp());
    let total: T = exps.sum();
    let loss = total.ln() + m - logits[label];
    let mut grad = exps.mapv(|e| e / total);
    grad[label] -= T::one();
    (loss, grad)
}

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Versioned JSON checkpoint. Complex entries are `{re, im}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: ModelConfig,
    pub eigenvalues: Vec<ComplexRecord>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<ComplexRecord>>,
    pub encoder: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<ComplexRecord>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
}

fn rect<V>(rows: &[Vec<V>], name: &str) -> Result<(usize, usize)> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Schema(format!("{name} is not rectangular")));
    }
    Ok((rows.len(), cols))
}

fn nested_complex<T: Real>(rows: &[Vec<ComplexRecord>], name: &str) -> Result<CMatrix<T>> {
    let shape = rect(rows, name)?;
    Ok(Array2::from_shape_fn(shape, |(i, j)| rows[i][j].to_complex()))
}

fn nested_real<T: Real>(rows: &[Vec<f64>], name: &str) -> Result<Array2<T>> {
    let shape = rect(rows, name)?;
    Ok(Array2::from_shape_fn(shape, |(i, j)| T::lit(rows[i][j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use rand::Rng;

    fn tiny() -> ModelConfig {
        ModelConfig { n: 4, d_model: 3, n_classes: 2, channels: 2, init_seed: 11, ..Default::default() }
    }

    fn series(ch: usize, t: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((ch, t), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_series_gives_zero_logits() {
        let m = Model::<f64>::new(tiny()).unwrap();
        let out = m.logits(Array2::zeros((2, 6)).view()).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn equal_readout_rows_give_zero_margin() {
        let mut m = Model::<f64>::new(tiny()).unwrap();
        m.update_params(|p| {
            let r = p.w.row(0).to_owned();
            p.w.row_mut(1).assign(&r);
        })
        .unwrap();
        let o = m.logits(series(2, 7, 1).view()).unwrap();
        assert_eq!(o[0], o[1]);
    }

    #[test]
    fn forward_matches_scalar_loop() {
        let cfg = ModelConfig { channels: 1, ..tiny() };
        let m = Model::<f64>::new(cfg).unwrap();
        let s = series(1, 5, 2);
        let got = m.logits(s.view()).unwrap();

        let f = m.basis().matrix();
        let b = &m.params().b;
        let e = &m.params().encoder;
        let c = &m.params().c;
        let w = &m.params().w;
        let mut x = [Complex::new(0.0, 0.0); 4];
        let mut pooled = [0.0; 3];
        for k in 0..5 {
            let u: Vec<f64> = (0..3).map(|l| e[[l, 0]] * s[[0, k]]).collect();
            for i in 0..4 {
                let d = m.spectrum().eigenvalues[i];
                let lam = (d * 0.01).exp();
                let factor = (lam - 1.0) / d;
                let drive: Complex<f64> = (0..3).map(|l| b[[i, l]] * u[l]).sum();
                x[i] = lam * x[i] + factor * drive;
            }
            for l in 0..3 {
                let mut acc = Complex::new(0.0, 0.0);
                for n in 0..4 {
                    let osc: Complex<f64> = (0..4).map(|i| f[[n, i]] * x[i]).sum();
                    acc += c[[l, n]] * osc;
                }
                pooled[l] += gelu(acc.re) / 5.0;
            }
        }
        for cls in 0..2 {
            let want: f64 = (0..3).map(|l| w[[cls, l]] * pooled[l]).sum();
            assert!((got[cls] - want).abs() < 1e-13, "{} vs {want}", got[cls]);
        }
    }

    fn loss_of(m: &Model<f64>, batch: &[&Sample]) -> f64 {
        m.loss_and_grads(batch).unwrap().loss
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = ModelConfig { trainables: Trainables { b: true, c: true, w: true, encoder: true }, ..tiny() };
        let m = Model::<f64>::new(cfg).unwrap();
        let samples: Vec<Sample> = (0..3)
            .map(|i| Sample { id: i, label: 1 + (i as usize % 2), series: series(2, 5, 20 + i).mapv(|v| v * 30.0) })
            .collect();
        let batch: Vec<&Sample> = samples.iter().collect();
        let g = m.loss_and_grads(&batch).unwrap().grads;
        let h = 1e-5;
        for tensor in Tensor::ALL {
            let analytic = g.reals(tensor);
            for idx in 0..analytic.len() {
                let mut plus = m.clone();
                plus.update_params(|p| *p.reals_mut(tensor)[idx] += h).unwrap();
                let mut minus = m.clone();
                minus.update_params(|p| *p.reals_mut(tensor)[idx] -= h).unwrap();
                let fd = (loss_of(&plus, &batch) - loss_of(&minus, &batch)) / (2.0 * h);
                let err = (fd - analytic[idx]).abs() / fd.abs().max(analytic[idx].abs()).max(1e-6);
                assert!(err < 1e-4, "{} [{idx}]: fd {fd} vs {}", tensor.name(), analytic[idx]);
            }
        }
    }

    #[test]
    fn duplicated_sample_matches_single() {
        let m = Model::<f64>::new(tiny()).unwrap();
        let s = Sample { id: 0, label: 2, series: series(2, 6, 3) };
        let one = m.loss_and_grads(&[&s]).unwrap();
        let two = m.loss_and_grads(&[&s, &s]).unwrap();
        assert!((one.loss - two.loss).abs() < 1e-14);
        assert!(max_abs_diff(&one.grads.c, &two.grads.c) < 1e-14);
    }

    #[test]
    fn saturated_softmax_has_small_loss() {
        let (loss, grad) = cross_entropy(&ndarray::arr1(&[50.0f64, 0.0, -3.0]), 0);
        assert!(loss < 1e-20 && grad.iter().all(|g| g.abs() < 1e-20));
        let (loss, grad) = cross_entropy(&ndarray::arr1(&[0.0f64, 0.0]), 1);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(grad, ndarray::arr1(&[0.5, -0.5]));
    }

    #[test]
    fn frozen_tensors_get_zero_grads() {
        let m = Model::<f64>::new(tiny()).unwrap();
        let s = Sample { id: 0, label: 1, series: series(2, 4, 5) };
        let g = m.loss_and_grads(&[&s]).unwrap().grads;
        assert!(g.b.iter().all(|z| z.norm() == 0.0));
        assert!(g.c.iter().any(|z| z.norm() > 0.0));
    }

    #[test]
    fn identity_activation_is_linear() {
        let cfg = ModelConfig { activation: ActivationKind::Identity, ..tiny() };
        let m = Model::<f64>::new(cfg).unwrap();
        let (a, b) = (series(2, 8, 6), series(2, 8, 7));
        let lhs = m.logits((&a * 2.0 - &b * 0.5).view()).unwrap();
        let rhs = m.logits(a.view()).unwrap() * 2.0 - m.logits(b.view()).unwrap() * 0.5;
        assert!((&lhs - &rhs).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn input_errors() {
        let m = Model::<f64>::new(tiny()).unwrap();
        assert!(m.forward(Array2::zeros((3, 4)).view()).is_err());
        assert!(m.forward(Array2::zeros((2, 0)).view()).is_err());
        let s = Sample { id: 0, label: 3, series: series(2, 4, 5) };
        assert!(m.loss_and_grads(&[&s]).is_err());
        assert!(m.loss_and_grads(&[]).is_err());
        assert!(Model::<f64>::new(ModelConfig { tau: 0.0, ..tiny() }).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Model::<f64>::new(tiny()).unwrap();
        let json = serde_json::to_string(&m.to_checkpoint()).unwrap();
        assert!(json.contains("\"format\":1") && json.contains("{\"re\":"));
        let ck: Checkpoint = serde_json::from_str(&json).unwrap();
        let back = Model::<f64>::from_checkpoint(&ck).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.spectrum(), m.spectrum());
        let mut bad = ck.clone();
        bad.format = 2;
        assert!(Model::<f64>::from_checkpoint(&bad).is_err());
    }

    #[test]
    fn single_precision_tracks_double() {
        let m64 = Model::<f64>::new(tiny()).unwrap();
        let m32 = Model::<f32>::new(tiny()).unwrap();
        let s = series(2, 20, 9);
        let a = m64.logits(s.view()).unwrap();
        let b = m32.logits(s.view()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - *y as f64).abs() < 1e-4);
        }
    }
}
