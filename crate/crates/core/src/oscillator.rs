//! The complex-phase oscillator network, its closed-form solution in the
//! `x = exp(iψ)` coordinates, an RK4 integrator on the phase equation used as
//! an independent check, and the cached one-step propagator.
//!
//! All propagation happens in the rotating frame (`ω = 0`). A non-rotating
//! result is recovered with [`to_lab_frame`].

use ndarray::{Array1, Array2};
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{expm, CMatrix, CVector};
use crate::scalar::{cis, principal_arg, Real};

/// Parameters of the phase equation.
#[derive(Clone, Debug)]
pub struct OscillatorParams<T: Real> {
    pub omega: T,
    pub kappa: T,
    adjacency: Array2<T>,
    phase_lags: Array2<T>,
}

impl<T: Real> OscillatorParams<T> {
    pub fn new(omega: T, kappa: T, adjacency: Array2<T>, phase_lags: Array2<T>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n || phase_lags.dim() != (n, n) {
            return Err(dim_err(format!(
                "adjacency {:?} and phase lags {:?} must be matching square matrices",
                adjacency.dim(),
                phase_lags.dim()
            )));
        }
        Ok(Self { omega, kappa, adjacency, phase_lags })
    }

    pub fn size(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<T> {
        &self.adjacency
    }

    pub fn phase_lags(&self) -> &Array2<T> {
        &self.phase_lags
    }
}

/// Symmetric ring adjacency with `neighborhood` links on each side of every
/// node, normalised by the degree `2·neighborhood`.
pub fn ring_adjacency<T: Real>(n: usize, neighborhood: usize) -> Result<Array2<T>> {
    if n == 0 {
        return Err(dim_err("ring must have at least one node"));
    }
    if neighborhood == 0 || 2 * neighborhood >= n {
        return Err(Error::InvalidParameter(format!(
            "neighborhood {neighborhood} must satisfy 1 <= n and 2n < N={n}"
        )));
    }
    let w = T::one() / T::from_usize_lossy(2 * neighborhood);
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        let d = crate::circulant::ring_distance(i, j, n);
        if d >= 1 && d <= neighborhood {
            w
        } else {
            T::zero()
        }
    }))
}

pub fn homogeneous_lags<T: Real>(n: usize, lag: T) -> Array2<T> {
    Array2::from_elem((n, n), lag)
}

/// Complex coupling `k_ij = κ·exp(-iφ_ij)·a_ij`.
#[derive(Clone, Debug)]
pub struct CouplingMatrix<T: Real>(pub CMatrix<T>);

impl<T: Real> CouplingMatrix<T> {
    pub fn size(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.0
    }
}

pub fn coupling_matrix<T: Real>(params: &OscillatorParams<T>) -> CouplingMatrix<T> {
    let k = ndarray::Zip::from(&params.adjacency)
        .and(&params.phase_lags)
        .map_collect(|&a, &phi| cis(-phi) * (params.kappa * a));
    CouplingMatrix(k)
}

/// Complex phase coordinates `ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState<T: Real>(pub CVector<T>);

/// Network state in the `x = exp(iψ)` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real>(pub CVector<T>);

impl<T: Real> PhaseState<T> {
    pub fn from_real(phases: &Array1<T>) -> Self {
        Self(phases.mapv(|p| Complex::new(p, T::zero())))
    }

    pub fn to_state(&self) -> StateVector<T> {
        StateVector(self.0.mapv(|psi| (Complex::<T>::i() * psi).exp()))
    }
}

impl<T: Real> StateVector<T> {
    /// `ψ = Arg(x) - i·log|x|`, with `Arg` in `(-π, π]`.
    pub fn to_phase(&self) -> Result<PhaseState<T>> {
        let mut out = Array1::from_elem(self.0.len(), Complex::zero());
        for (i, (o, x)) in out.iter_mut().zip(self.0.iter()).enumerate() {
            let r = x.norm();
            if !(r > T::zero()) || !r.is_finite() {
                return Err(Error::SingularModulus { index: i });
            }
            *o = Complex::new(principal_arg(*x), -r.ln());
        }
        Ok(PhaseState(out))
    }

    pub fn phases(&self) -> Array1<T> {
        self.0.mapv(principal_arg)
    }
}


fn check_dims<T: Real>(k: &CouplingMatrix<T>, n: usize) -> Result<()> {
    if k.0.nrows() != n || k.0.ncols() != n {
        return Err(dim_err(format!("coupling {:?} does not act on state of length {n}", k.0.dim())));
    }
    Ok(())
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// `x(t) = exp(K t)·x(0)` in the rotating frame.
pub fn exact_propagate<T: Real>(x0: &StateVector<T>, k: &CouplingMatrix<T>, t: T) -> Result<StateVector<T>> {
    check_dims(k, x0.0.len())?;
    check_time(t)?;
    let prop = expm(&k.0.mapv(|z| z * t))?;
    Ok(StateVector(prop.dot(&x0.0)))
}

/// Multiply by `exp(iωt)` to leave the rotating frame.
pub fn to_lab_frame<T: Real>(x: &StateVector<T>, omega: T, t: T) -> StateVector<T> {
    let rot = cis(omega * t);
    StateVector(x.0.mapv(|z| z * rot))
}

/// Closed-form phase trajectory: propagate `exp(iψ0)` and map back to `ψ`.
pub fn phase_solution<T: Real>(psi0: &PhaseState<T>, k: &CouplingMatrix<T>, t: T) -> Result<PhaseState<T>> {
    exact_propagate(&psi0.to_state(), k, t)?.to_phase()
}

/// Right-hand side of the phase equation,
/// `ψ̇_i = ω + κ Σ_j a_ij (sin(ψ_j-ψ_i-φ_ij) - i·cos(ψ_j-ψ_i-φ_ij))`.
///
/// Zero adjacency entries are skipped.
pub fn rhs_eval<T: Real>(psi: &PhaseState<T>, params: &OscillatorParams<T>) -> Result<CVector<T>> {
    let n = params.size();
    if psi.0.len() != n {
        return Err(dim_err(format!("phase state length {} != network size {n}", psi.0.len())));
    }
    let mut out = Array1::from_elem(n, Complex::new(params.omega, T::zero()));
    rhs_into(&psi.0, params, params.omega, &mut out);
    Ok(out)
}

fn rhs_into<T: Real>(psi: &CVector<T>, params: &OscillatorParams<T>, omega: T, out: &mut CVector<T>) {
    let n = params.size();
    let a = &params.adjacency;
    let lags = &params.phase_lags;
    for i in 0..n {
        let mut acc = Complex::zero();
        for j in 0..n {
            let aij = a[[i, j]];
            if aij == T::zero() {
                continue;
            }
            let theta = psi[j] - psi[i] - Complex::new(lags[[i, j]], T::zero());
            let term: Complex<T> = theta.sin() - Complex::<T>::i() * theta.cos();
            acc += term * aij;
        }
        out[i] = Complex::new(omega, T::zero()) + acc * params.kappa;
    }
}

/// Default RK4 step for oracle runs.
pub const DEFAULT_RK4_STEP: f64 = 1e-4;

/// Fixed-step classical RK4 on the phase equation in the rotating frame.
///
/// The step is shrunk so that an integer number of steps lands on `t_end`.
pub fn numeric_integrate<T: Real>(
    psi0: &PhaseState<T>,
    params: &OscillatorParams<T>,
    t_end: T,
    dt: T,
) -> Result<PhaseState<T>> {
    let n = params.size();
    if psi0.0.len() != n {
        return Err(dim_err(format!("phase state length {} != network size {n}", psi0.0.len())));
    }
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    check_time(t_end)?;
    if t_end == T::zero() {
        return Ok(psi0.clone());
    }
    let steps = (t_end / dt).ceil().to_usize().unwrap_or(1).max(1);
    let h = t_end / T::from_usize_lossy(steps);
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let zero = T::zero();

    let mut y = psi0.0.clone();
    let mut k1 = Array1::from_elem(n, Complex::zero());
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for step in 0..steps {
        rhs_into(&y, params, zero, &mut k1);
        ndarray::Zip::from(&mut tmp).and(&y).and(&k1).for_each(|t, &y, &k| *t = y + k * half);
        rhs_into(&tmp, params, zero, &mut k2);
        ndarray::Zip::from(&mut tmp).and(&y).and(&k2).for_each(|t, &y, &k| *t = y + k * half);
        rhs_into(&tmp, params, zero, &mut k3);
        ndarray::Zip::from(&mut tmp).and(&y).and(&k3).for_each(|t, &y, &k| *t = y + k * h);
        rhs_into(&tmp, params, zero, &mut k4);
        ndarray::Zip::from(&mut y)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|y, &a, &b, &c, &d| {
                *y += (a + (b + c) * T::lit(2.0) + d) * sixth;
            });
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Divergence(format!("non-finite phase after step {}", step + 1)));
        }
    }
    Ok(PhaseState(y))
}

/// Cached one-step propagator `D_τ = exp(Kτ)`.
#[derive(Clone, Debug)]
pub struct DynamicsOperator<T: Real> {
    tau: T,
    matrix: CMatrix<T>,
}

impl<T: Real> DynamicsOperator<T> {
    pub fn new(k: &CouplingMatrix<T>, tau: T) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let matrix = expm(&k.0.mapv(|z| z * tau))?;
        Ok(Self { tau, matrix })
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn apply(&self, x: &StateVector<T>) -> Result<StateVector<T>> {
        if x.0.len() != self.matrix.nrows() {
            return Err(dim_err(format!(
                "state length {} != propagator size {}",
                x.0.len(),
                self.matrix.nrows()
            )));
        }
        Ok(StateVector(self.matrix.dot(&x.0)))
    }
}

/// One exact step `x_k = exp(Kτ)·x_{k-1}`.
pub fn discrete_step<T: Real>(x_prev: &StateVector<T>, k: &CouplingMatrix<T>, tau: T) -> Result<StateVector<T>> {
    check_dims(k, x_prev.0.len())?;
    DynamicsOperator::new(k, tau)?.apply(x_prev)
}

/// Phase raster `Arg(x_j(t_k))` for `k = 0..=steps`, rows are time steps.
///
/// `omega` is applied at report time as the factor `exp(iωt)`.
pub fn phase_raster<T: Real>(
    x0: &StateVector<T>,
    op: &DynamicsOperator<T>,
    steps: usize,
    omega: T,
) -> Result<Array2<T>> {
    let n = x0.0.len();
    let mut raster = Array2::zeros((steps + 1, n));
    let mut x = x0.clone();
    for k in 0..=steps {
        if k > 0 {
            x = op.apply(&x)?;
        }
        let t = op.tau() * T::from_usize_lossy(k);
        let lab = to_lab_frame(&x, omega, t);
        raster.row_mut(k).assign(&lab.phases());
    }
    Ok(raster)
}

/// Spatial-frequency content of a phase raster.
#[derive(Clone, Debug)]
pub struct WaveSummary {
    /// Dominant nonzero spatial frequency (cycles per ring, 0-based DFT bin).
    pub dominant_mode: usize,
    /// Share of total spatial power carried by that bin.
    pub dominant_fraction: f64,
    /// Share carried by the synchronous (bin 0) component.
    pub sync_fraction: f64,
}

/// Spatial DFT power of the unit phasors `exp(i·θ)` summed over raster rows.
pub fn wave_summary<T: Real>(raster: &Array2<T>) -> WaveSummary {
    let n = raster.ncols();
    let mut power = vec![0.0f64; n];
    for row in raster.rows() {
        for (s, p) in power.iter_mut().enumerate() {
            let mut acc = Complex::new(0.0f64, 0.0);
            for (j, th) in row.iter().enumerate() {
                let ang = th.as_f64() - std::f64::consts::TAU * ((s * j) % n) as f64 / n as f64;
                acc += Complex::from_polar(1.0, ang);
            }
            *p += acc.norm_sqr();
        }
    }
    let total: f64 = power.iter().sum();
    let (dominant_mode, dom) = power
        .iter()
        .enumerate()
        .skip(1)
        .fold((0usize, 0.0f64), |acc, (s, &p)| if p > acc.1 { (s, p) } else { acc });
    WaveSummary {
        dominant_mode,
        dominant_fraction: if total > 0.0 { dom / total } else { 0.0 },
        sync_fraction: if total > 0.0 { power[0] / total } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, max_abs_diff_vec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_params(n: usize, seed: u64) -> OscillatorParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0) / n as f64);
        let phi = Array2::from_shape_fn((n, n), |_| rng.random_range(-PI..PI));
        OscillatorParams::new(0.0, 1.0, a, phi).unwrap()
    }

    fn random_psi(n: usize, seed: u64) -> PhaseState<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PhaseState(Array1::from_shape_fn(n, |_| c(rng.random_range(-PI..PI), rng.random_range(-0.3..0.3))))
    }

    #[test]
    fn mismatched_params_rejected() {
        assert!(OscillatorParams::new(0.0, 1.0, Array2::<f64>::zeros((3, 3)), Array2::zeros((3, 2))).is_err());
    }

    #[test]
    fn coupling_examples() {
        let p = OscillatorParams::new(0.0, 0.0, Array2::ones((3, 3)), Array2::ones((3, 3))).unwrap();
        assert!(coupling_matrix(&p).0.iter().all(|z| z.norm() == 0.0));

        let a = Array2::from_shape_fn((3, 3), |(i, j)| (i + 2 * j) as f64);
        let p = OscillatorParams::new(0.0, 1.5, a.clone(), Array2::zeros((3, 3))).unwrap();
        let k = coupling_matrix(&p);
        for ((i, j), z) in k.0.indexed_iter() {
            assert_eq!(*z, c(1.5 * a[[i, j]], 0.0));
        }

        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = 1.0;
        let mut phi = Array2::zeros((2, 2));
        phi[[0, 1]] = PI / 2.0;
        let k = coupling_matrix(&OscillatorParams::new(0.0, 1.0, a, phi).unwrap());
        assert!((k.0[[0, 1]] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn coupling_modulus_invariant() {
        let p = random_params(6, 4);
        let k = coupling_matrix(&p);
        for ((i, j), z) in k.0.indexed_iter() {
            assert!((z.norm() - p.kappa.abs() * p.adjacency()[[i, j]].abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn state_phase_round_trip() {
        let psi = random_psi(10, 1);
        let x = psi.to_state();
        let back = x.to_phase().unwrap().to_state();
        assert!(max_abs_diff_vec(&back.0, &x.0) < 1e-12);
    }

    #[test]
    fn zero_state_has_singular_modulus() {
        let x = StateVector(Array1::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(matches!(x.to_phase(), Err(Error::SingularModulus { index: 1 })));
    }

    #[test]
    fn propagate_trivial_cases() {
        let x0 = random_psi(4, 2).to_state();
        let zero = CouplingMatrix(Array2::from_elem((4, 4), c(0., 0.)));
        assert!(max_abs_diff_vec(&exact_propagate(&x0, &zero, 3.7).unwrap().0, &x0.0) < 1e-15);

        let k = CouplingMatrix(Array2::from_elem((1, 1), c(-1., 0.)));
        let x = StateVector(Array1::from_vec(vec![c(2.0, 1.0)]));
        let got = exact_propagate(&x, &k, 1.0).unwrap();
        assert!((got.0[0] - c(2.0, 1.0) * (-1f64).exp()).norm() < 1e-15);

        assert!(exact_propagate(&x, &k, -1.0).is_err());
        assert!(exact_propagate(&x0, &k, 1.0).is_err());
    }

    #[test]
    fn propagate_matches_rk4_on_linear_system() {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let k = CouplingMatrix(Array2::from_shape_fn((n, n), |_| {
            c(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25))
        }));
        let x0 = random_psi(n, 3).to_state();
        let t = 2.0;
        let h = 1e-4;
        let steps = (t / h) as usize;
        let f = |x: &CVector<f64>| k.0.dot(x);
        let mut x = x0.0.clone();
        for _ in 0..steps {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1.mapv(|z| z * (h / 2.0))));
            let k3 = f(&(&x + &k2.mapv(|z| z * (h / 2.0))));
            let k4 = f(&(&x + &k3.mapv(|z| z * h)));
            x = &x + &(&k1 + &k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
        }
        let exact = exact_propagate(&x0, &k, t).unwrap();
        assert!(max_abs_diff_vec(&exact.0, &x) < 1e-6);
    }

    #[test]
    fn phase_solution_examples() {
        let psi0 = PhaseState(Array1::from_vec(vec![c(4.0, 0.2), c(-0.5, 0.0), c(3.5, -0.1)]));
        let zero = CouplingMatrix(Array2::from_elem((3, 3), c(0., 0.)));
        let got = phase_solution(&psi0, &zero, 2.0).unwrap();
        let wrapped = [4.0 - 2.0 * PI, -0.5, 3.5 - 2.0 * PI];
        for i in 0..3 {
            assert!((got.0[i].re - wrapped[i]).abs() < 1e-12);
            assert!((got.0[i].im - psi0.0[i].im).abs() < 1e-12);
            assert!(got.0[i].re > -PI && got.0[i].re <= PI);
        }

        let real = PhaseState::from_real(&Array1::from_vec(vec![0.1, 1.0, -2.0]));
        let got = phase_solution(&real, &zero, 1.0).unwrap();
        assert!(got.0.iter().all(|z| z.im.abs() < 1e-15));

        let p = random_params(8, 8);
        let k = coupling_matrix(&p);
        let psi = random_psi(8, 9);
        let sol = phase_solution(&psi, &k, 1.5).unwrap();
        let x = exact_propagate(&psi.to_state(), &k, 1.5).unwrap();
        assert!(max_abs_diff_vec(&sol.to_state().0, &x.0) < 1e-10);
    }

    #[test]
    fn rhs_examples() {
        let p = OscillatorParams::new(2.5, 0.0, Array2::ones((4, 4)), Array2::zeros((4, 4))).unwrap();
        let r = rhs_eval(&random_psi(4, 1), &p).unwrap();
        assert!(r.iter().all(|z| (*z - c(2.5, 0.0)).norm() < 1e-15));

        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = 1.0;
        a[[1, 0]] = 1.0;
        let p = OscillatorParams::new(0.7, 1.3, a, Array2::zeros((2, 2))).unwrap();
        let psi = PhaseState(Array1::from_elem(2, c(0.4, 0.1)));
        let r = rhs_eval(&psi, &p).unwrap();
        for z in r.iter() {
            assert!((*z - c(0.7, -1.3)).norm() < 1e-15);
        }
    }

    #[test]
    fn rhs_matches_linear_form() {
        // i·ψ̇_i = exp(-iψ_i)·(Kx)_i in the rotating frame
        let p = random_params(8, 21);
        let k = coupling_matrix(&p);
        let psi = random_psi(8, 22);
        let x = psi.to_state();
        let kx = k.0.dot(&x.0);
        let r = rhs_eval(&psi, &p).unwrap();
        for i in 0..8 {
            let lhs: Complex<f64> = Complex::<f64>::i() * r[i];
            let rhs = (-Complex::<f64>::i() * psi.0[i]).exp() * kx[i];
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn integrate_trivial_cases() {
        let p = random_params(5, 3);
        let psi = random_psi(5, 4);
        assert_eq!(numeric_integrate(&psi, &p, 0.0, 1e-3).unwrap(), psi);
        let still = OscillatorParams::new(0.0, 0.0, p.adjacency().clone(), p.phase_lags().clone()).unwrap();
        let out = numeric_integrate(&psi, &still, 5.0, 1e-2).unwrap();
        assert!(max_abs_diff_vec(&out.0, &psi.0) == 0.0);
        assert!(numeric_integrate(&psi, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn integrator_reports_divergence() {
        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = 1.0;
        let p = OscillatorParams::new(0.0, 1e300, a, Array2::zeros((2, 2))).unwrap();
        let psi = PhaseState(Array1::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        assert!(matches!(numeric_integrate(&psi, &p, 1.0, 0.1), Err(Error::Divergence(_))));
    }

    #[test]
    fn time_derivative_of_x_matches_kx() {
        let p = random_params(6, 30);
        let k = coupling_matrix(&p);
        let psi = random_psi(6, 31);
        let h = 1e-6;
        let plus = exact_propagate(&psi.to_state(), &k, h).unwrap();
        let x0 = psi.to_state();
        let r = rhs_eval(&psi, &p).unwrap();
        // dx/dt = i·x·ψ̇ from the chain rule, against forward difference of the exact flow
        for i in 0..6 {
            let chain: Complex<f64> = Complex::<f64>::i() * x0.0[i] * r[i];
            let fd = (plus.0[i] - x0.0[i]) / h;
            assert!((chain - fd).norm() < 1e-5);
            assert!((chain - k.0.dot(&x0.0)[i]).norm() < 1e-8);
        }
    }

    #[test]
    fn discrete_semigroup() {
        let p = random_params(16, 40);
        let k = coupling_matrix(&p);
        let d1 = DynamicsOperator::new(&k, 0.3).unwrap();
        let d2 = DynamicsOperator::new(&k, 0.6).unwrap();
        assert!(max_abs_diff(&d1.matrix().dot(d1.matrix()), d2.matrix()) < 1e-10);

        let x0 = random_psi(16, 41).to_state();
        let mut x = x0.clone();
        for _ in 0..7 {
            x = d1.apply(&x).unwrap();
        }
        let direct = exact_propagate(&x0, &k, 2.1).unwrap();
        assert!(max_abs_diff_vec(&x.0, &direct.0) < 1e-10);

        let zero = CouplingMatrix(Array2::from_elem((16, 16), c(0., 0.)));
        assert_eq!(discrete_step(&x0, &zero, 0.5).unwrap(), x0);
        assert!(discrete_step(&x0, &zero, 0.0).is_err());
    }

    #[test]
    fn traveling_wave_regime_on_ring() {
        // lag past π/2 favours a nonzero spatial mode on a symmetric ring
        let n = 48;
        let a = ring_adjacency::<f64>(n, 6).unwrap();
        let p = OscillatorParams::new(0.0, 1.0, a, homogeneous_lags(n, 0.9 * PI)).unwrap();
        let k = coupling_matrix(&p);
        let op = DynamicsOperator::new(&k, 0.1).unwrap();
        let x0 = random_psi(n, 77).to_state();
        let raster = phase_raster(&x0, &op, 600, 0.0).unwrap();
        let late = raster.slice(ndarray::s![400.., ..]).to_owned();
        let summary = wave_summary(&late);
        assert!(summary.dominant_mode != 0);
        assert!(summary.dominant_fraction > 0.5, "{summary:?}");
    }
}
