//! Traveling-wave diagnostics on modal amplitudes `μ_j(k) = ⟨f_j|x_k⟩`.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex;
use num_traits::Zero;

use crate::circulant::DftBasis;
use crate::error::{dim_err, Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{principal_arg, Real};
use crate::ssm::DiagonalSpectrum;

/// Modal amplitudes stored mode-major: `amplitudes[[j, k]] = μ_j(k)`.
#[derive(Clone, Debug)]
pub struct ModalSeries<T: Real> {
    pub amplitudes: CMatrix<T>,
    pub tau: T,
    /// `Im(d_j)/(2π)` in cycles per time unit (Hz when τ is in seconds).
    pub mode_frequencies: Array1<T>,
}

impl<T: Real> ModalSeries<T> {
    /// Wrap a trajectory that is already in modal coordinates (rows are time
    /// steps, as produced by [`crate::ssm::run_sequence`]).
    pub fn from_modal_states(
        states: ArrayView2<'_, Complex<T>>,
        spectrum: &DiagonalSpectrum<T>,
        tau: T,
    ) -> Result<Self> {
        if states.ncols() != spectrum.size() {
            return Err(dim_err(format!(
                "state width {} != spectrum size {}",
                states.ncols(),
                spectrum.size()
            )));
        }
        Ok(Self {
            amplitudes: states.t().to_owned(),
            tau,
            mode_frequencies: spectrum.mode_frequencies(),
        })
    }

    pub fn modes(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn steps(&self) -> usize {
        self.amplitudes.ncols()
    }
}

/// Project oscillator-frame states (rows are time steps) onto the DFT modes.
pub fn modal_amplitudes<T: Real>(
    states: ArrayView2<'_, Complex<T>>,
    basis: &DftBasis<T>,
    spectrum: &DiagonalSpectrum<T>,
    tau: T,
) -> Result<ModalSeries<T>> {
    let n = basis.size();
    if states.ncols() != n || spectrum.size() != n {
        return Err(dim_err(format!(
            "state width {} / spectrum size {} must equal basis size {n}",
            states.ncols(),
            spectrum.size()
        )));
    }
    // μ = F† X^T
    let amplitudes = basis.adjoint().dot(&states.t());
    Ok(ModalSeries { amplitudes, tau, mode_frequencies: spectrum.mode_frequencies() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalEnergy<T: Real> {
    pub energy: Array1<T>,
}

/// `E_j = Σ_k |μ_j(k)|²`.
pub fn modal_energy<T: Real>(series: &ModalSeries<T>) -> ModalEnergy<T> {
    ModalEnergy {
        energy: series
            .amplitudes
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedMode<T: Real> {
    /// 0-based mode index; reports add one.
    pub mode: usize,
    /// Sum over class pairs of |difference of mean energies|.
    pub score: T,
    /// Same sum with medians in place of means.
    pub median_score: T,
}

fn median<T: Real>(v: &mut [T]) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    }
}

/// Rank modes by summed pairwise class difference of mean modal energy.
/// Ties are broken by the lower mode index.
pub fn class_separation_ranking<T: Real>(
    per_class: &BTreeMap<usize, Vec<ModalEnergy<T>>>,
) -> Result<Vec<RankedMode<T>>> {
    if per_class.len() < 2 {
        return Err(Error::InvalidParameter("need at least two classes".into()));
    }
    let mut n_modes = None;
    for (class, trials) in per_class {
        if trials.is_empty() {
            return Err(Error::Empty(format!("class {class} has no trials")));
        }
        for t in trials {
            match n_modes {
                None => n_modes = Some(t.energy.len()),
                Some(m) if m != t.energy.len() => {
                    return Err(dim_err(format!("energy length {} != {m}", t.energy.len())))
                }
                _ => {}
            }
        }
    }
    let n_modes = n_modes.unwrap_or(0);
    let stats: Vec<(Vec<T>, Vec<T>)> = per_class
        .values()
        .map(|trials| {
            let cnt = T::from_usize_lossy(trials.len());
            (0..n_modes)
                .map(|j| {
                    let mut col: Vec<T> = trials.iter().map(|t| t.energy[j]).collect();
                    let mean = col.iter().copied().sum::<T>() / cnt;
                    (mean, median(&mut col))
                })
                .unzip()
        })
        .collect();

    let mut ranked: Vec<RankedMode<T>> = (0..n_modes)
        .map(|j| {
            let mut score = T::zero();
            let mut median_score = T::zero();
            for a in 0..stats.len() {
                for b in a + 1..stats.len() {
                    score += (stats[a].0[j] - stats[b].0[j]).abs();
                    median_score += (stats[a].1[j] - stats[b].1[j]).abs();
                }
            }
            RankedMode { mode: j, score, median_score }
        })
        .collect();
    ranked.sort_by(|x, y| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.mode.cmp(&y.mode))
    });
    Ok(ranked)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionSeries<T: Real> {
    pub pair: (usize, usize),
    /// `z(k) = Re(μ_i(k)·μ_j(k))`.
    pub z: Array1<T>,
    /// Time mean of `z`.
    pub mean: T,
}

fn check_mode<T: Real>(series: &ModalSeries<T>, j: usize) -> Result<()> {
    if j >= series.modes() {
        return Err(Error::IndexOutOfRange(format!("mode {j} with {} modes", series.modes())));
    }
    Ok(())
}

pub fn wave_interaction<T: Real>(series: &ModalSeries<T>, i: usize, j: usize) -> Result<InteractionSeries<T>> {
    check_mode(series, i)?;
    check_mode(series, j)?;
    if i == j {
        return Err(Error::InvalidParameter(format!(
            "interaction pair needs distinct modes, got ({i}, {j})"
        )));
    }
    let z: Array1<T> = series
        .amplitudes
        .row(i)
        .iter()
        .zip(series.amplitudes.row(j).iter())
        .map(|(a, b)| (*a * *b).re)
        .collect();
    let mean = if z.is_empty() { T::zero() } else { z.sum() / T::from_usize_lossy(z.len()) };
    Ok(InteractionSeries { pair: (i, j), z, mean })
}

/// `Re(Σ_{j∈modes} μ_j(k) f_j)` on the ring; rows are time steps.
pub fn render_modes<T: Real>(series: &ModalSeries<T>, basis: &DftBasis<T>, modes: &[usize]) -> Result<Array2<T>> {
    if basis.size() != series.modes() {
        return Err(dim_err("basis size does not match series"));
    }
    for &j in modes {
        check_mode(series, j)?;
    }
    let n = basis.size();
    let f = basis.matrix();
    Ok(Array2::from_shape_fn((series.steps(), n), |(k, node)| {
        modes
            .iter()
            .fold(Complex::zero(), |acc, &j| acc + series.amplitudes[[j, k]] * f[[node, j]])
            .re
    }))
}

/// With a pair: the two-wave interference field. Without: the phase raster
/// `Arg(x_n(k))` of the full reconstruction `x = F μ`.
pub fn render_field<T: Real>(
    series: &ModalSeries<T>,
    basis: &DftBasis<T>,
    pair: Option<(usize, usize)>,
) -> Result<Array2<T>> {
    match pair {
        Some((i, j)) => render_modes(series, basis, &[i, j]),
        None => {
            if basis.size() != series.modes() {
                return Err(dim_err("basis size does not match series"));
            }
            let x = basis.matrix().dot(&series.amplitudes);
            Ok(x.t().mapv(principal_arg))
        }
    }
}
