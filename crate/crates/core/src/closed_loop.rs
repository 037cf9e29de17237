//! Galerkin state-space model, feedback closed loop, time integration and
//! energy/decay diagnostics.
//!
//! For large `omega` the gains are of order `1e10` and the closed-loop matrix
//! `F + G K_fb` cannot be rounded to `f64` without destroying its spectrum.
//! [`ClosedLoop`] therefore works in the coordinates `x = T z`,
//! `T = Omega^T L` with `K = L L^T`, where the generator is moderate in size;
//! the similarity is carried out in double-double.

use nalgebra::{DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::gramian::FeedbackOperator;
use crate::linalg::{solve_lower, to_f64};
use crate::modal::{state_norm_squared, ModalState, StateSpaceSpec, SystemConfig};
use crate::real::{Dd, Real};

/// `x' = drift x + input v` on `x = [a | b | a_dot | b_dot]`.
#[derive(Debug, Clone)]
pub struct GalerkinModel {
    pub cfg: SystemConfig,
    pub drift: DMatrix<f64>,
    /// `4N x 2`; `(2/pi) m_k` and `(2/pi) n_k` in the acceleration rows.
    pub input: DMatrix<f64>,
    drift_dd: DMatrix<Dd>,
    input_dd: DMatrix<Dd>,
}

impl GalerkinModel {
    pub fn modes(&self) -> usize {
        self.cfg.modes()
    }
}

pub fn build_model(cfg: &SystemConfig) -> GalerkinModel {
    let n = cfg.modes();
    let c = cfg.coupling();
    let mut drift = DMatrix::<Dd>::zeros(4 * n, 4 * n);
    let mut input = DMatrix::<Dd>::zeros(4 * n, 2);
    let two_over_pi = Dd::from(2.0) / Dd::PI;
    for i in 0..2 * n {
        drift[(i, 2 * n + i)] = Dd::from(1.0);
    }
    for k in 0..n {
        let k2 = ((k + 1) * (k + 1)) as f64;
        drift[(2 * n + k, k)] = Dd::from(-(k2 + c.a));
        drift[(2 * n + k, n + k)] = Dd::from(-c.c);
        drift[(3 * n + k, k)] = Dd::from(-c.b);
        drift[(3 * n + k, n + k)] = Dd::from(-(k2 * k2 + c.d));
        input[(2 * n + k, 0)] = two_over_pi * Dd::from(cfg.xi_weights()[k]);
        input[(3 * n + k, 1)] = two_over_pi * Dd::from(cfg.eta_weights()[k]);
    }
    GalerkinModel { cfg: cfg.clone(), drift: to_f64(&drift), input: to_f64(&input), drift_dd: drift, input_dd: input }
}

/// `drift + input F` rounded to `f64`. Usable for moderate gains only; see
/// [`ClosedLoop`] for the well-conditioned realization.
pub fn closed_loop_matrix(model: &GalerkinModel, fb: &FeedbackOperator) -> Result<DMatrix<f64>> {
    check_modes(model, fb)?;
    Ok(to_f64(&(&model.drift_dd + &model.input_dd * fb.gains_dd())))
}

fn check_modes(model: &GalerkinModel, fb: &FeedbackOperator) -> Result<()> {
    if model.modes() != fb.modes() {
        return Err(Error::Dimension(format!("model has {} modes, feedback {}", model.modes(), fb.modes())));
    }
    Ok(())
}

/// Linear system `z' = M z` with state `x = T z` and controls `v = C z`.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    generator: DMatrix<f64>,
    transform: Option<Transform>,
    control: DMatrix<f64>,
    gains: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct Transform {
    to_state: DMatrix<f64>,
    factor: DMatrix<Dd>,
}

/// `Omega^T y = (-y_vel, y_pos)`.
fn omega_t(y: &DMatrix<Dd>) -> DMatrix<Dd> {
    let h = y.nrows() / 2;
    DMatrix::from_fn(y.nrows(), y.ncols(), |i, c| if i < h { -y[(i + h, c)] } else { y[(i - h, c)] })
}

/// `Omega y = (y_vel, -y_pos)`.
fn omega(y: &DMatrix<Dd>) -> DMatrix<Dd> {
    let h = y.nrows() / 2;
    DMatrix::from_fn(y.nrows(), y.ncols(), |i, c| if i < h { y[(i + h, c)] } else { -y[(i - h, c)] })
}

impl ClosedLoop {
    /// Feedback loop in the coordinates of the Gramian's Cholesky factor.
    pub fn from_feedback(model: &GalerkinModel, fb: &FeedbackOperator) -> Result<Self> {
        check_modes(model, fb)?;
        let l = fb.gramian_factor();
        let f = fb.gains_dd();
        let a = &model.drift_dd + &model.input_dd * &f;
        let t = omega_t(l);
        let m = solve_lower(l, &omega(&(a * &t)));
        Ok(ClosedLoop {
            generator: to_f64(&m),
            transform: Some(Transform { to_state: to_f64(&t), factor: l.clone() }),
            control: to_f64(&(f * &t)),
            gains: to_f64(&fb.gains_dd()),
        })
    }

    /// Uncontrolled model, `v = 0`.
    pub fn open_loop(model: &GalerkinModel) -> Self {
        Self::from_matrix(model.drift.clone())
    }

    /// Plain linear system `x' = M x` without controls.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "generator must be square");
        let n = m.nrows();
        ClosedLoop { generator: m, transform: None, control: DMatrix::zeros(2, n), gains: DMatrix::zeros(2, n) }
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    /// Generator in internal coordinates; similar to the closed-loop matrix.
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// State-feedback gain `F` in original coordinates (`v = F x`).
    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        spectral_abscissa(&self.generator)
    }

    pub fn eigenvalues(&self) -> Result<Vec<num_complex::Complex<f64>>> {
        eigenvalues(&self.generator)
    }

    fn to_internal(&self, x: &[f64]) -> DVector<f64> {
        match &self.transform {
            None => DVector::from_column_slice(x),
            Some(tr) => {
                let xd = DMatrix::from_iterator(x.len(), 1, x.iter().map(|&v| Dd::from(v)));
                let z = solve_lower(&tr.factor, &omega(&xd));
                DVector::from_iterator(x.len(), z.iter().map(|v| v.to_f64()))
            }
        }
    }

    fn to_state(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.transform {
            None => z.clone(),
            Some(tr) => &tr.to_state * z,
        }
    }
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<num_complex::Complex<f64>>> {
    if m.iter().all(|&x| x == 0.0) {
        return Ok(vec![num_complex::Complex::new(0.0, 0.0); m.nrows()]);
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part of the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Picks the feedback sign whose closed loop has negative spectral abscissa,
/// preferring the operator's current sign. Returns the operator and abscissa.
pub fn resolve_sign(model: &GalerkinModel, fb: &FeedbackOperator) -> Result<(FeedbackOperator, f64)> {
    let first = ClosedLoop::from_feedback(model, fb)?.spectral_abscissa()?;
    if first < 0.0 {
        return Ok((fb.clone(), first));
    }
    let other = fb.with_sign(fb.sign().flipped());
    let second = ClosedLoop::from_feedback(model, &other)?.spectral_abscissa()?;
    if second < first {
        Ok((other, second))
    } else {
        Ok((fb.clone(), first))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrationMethod {
    /// Repeated application of `e^{M dt}`.
    #[default]
    ExactLti,
    /// Classical fourth-order Runge-Kutta.
    Rk4,
}

impl IntegrationMethod {
    pub fn name(self) -> &'static str {
        match self {
            IntegrationMethod::ExactLti => "exact_lti",
            IntegrationMethod::Rk4 => "rk4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact_lti" => Some(IntegrationMethod::ExactLti),
            "rk4" => Some(IntegrationMethod::Rk4),
            _ => None,
        }
    }
}

/// Trajectory on the grid `t_i = i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<ModalState>,
    /// `(v1, v2)` per instant.
    pub controls: Vec<(f64, f64)>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Propagates `z' = m z` for `steps` steps of size `dt`; returns all iterates.
pub fn propagate(
    m: &DMatrix<f64>,
    z0: &DVector<f64>,
    steps: usize,
    dt: f64,
    method: IntegrationMethod,
) -> Result<Vec<DVector<f64>>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    if m.nrows() != z0.len() {
        return Err(Error::Dimension(format!("generator is {}x{}, state {}", m.nrows(), m.ncols(), z0.len())));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0.clone());
    match method {
        IntegrationMethod::ExactLti => {
            let e = (m * dt).exp();
            let mut z = z0.clone();
            for _ in 0..steps {
                z = &e * z;
                out.push(z.clone());
            }
        }
        IntegrationMethod::Rk4 => {
            let rho = eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if rho > 0.0 && dt >= 0.5 / rho {
                return Err(Error::StepSize { dt, limit: 0.5 / rho });
            }
            let mut z = z0.clone();
            for _ in 0..steps {
                let k1 = m * &z;
                let k2 = m * (&z + &k1 * (0.5 * dt));
                let k3 = m * (&z + &k2 * (0.5 * dt));
                let k4 = m * (&z + &k3 * dt);
                z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
                out.push(z.clone());
            }
        }
    }
    Ok(out)
}

/// Number of steps of size `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0 && dt > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("need t_end > 0 and dt > 0 (got {t_end}, {dt})")));
    }
    Ok(((t_end / dt) - 1e-9).ceil().max(1.0) as usize)
}

/// Simulates the loop from `x0` on `[0, t_end]` with step `dt`.
pub fn integrate(
    system: &ClosedLoop,
    x0: &ModalState,
    t_end: f64,
    dt: f64,
    method: IntegrationMethod,
) -> Result<TrajectoryRecord> {
    let steps = step_count(t_end, dt)?;
    let x = x0.to_vector();
    if x.len() != system.dim() {
        return Err(Error::Dimension(format!("state has dimension {}, system {}", x.len(), system.dim())));
    }
    let zs = propagate(&system.generator, &system.to_internal(&x), steps, dt, method)?;
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(zs.len()),
        states: Vec::with_capacity(zs.len()),
        controls: Vec::with_capacity(zs.len()),
    };
    for (i, z) in zs.iter().enumerate() {
        let xs = system.to_state(z);
        let v = &system.control * z;
        let s = ModalState::from_vector(xs.as_slice())?;
        if !s.is_finite() {
            return Err(Error::InvalidParameter(format!("trajectory left the finite range at step {i}")));
        }
        rec.times.push(i as f64 * dt);
        rec.states.push(s);
        rec.controls.push((v[0], v[1]));
    }
    Ok(rec)
}

/// Which quadratic form counts as the natural energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NaturalEnergyForm {
    /// `(pi/4) sum_k [a_k'^2 + k^2 a_k^2 + b_k'^2 + k^4 b_k^2]`.
    #[default]
    KineticElastic,
    /// Adds `(pi/4) sum_k [A a_k^2 + D b_k^2 + (B + C) a_k b_k]`; conserved
    /// by the free dynamics when `B = C`.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub weighted: Vec<f64>,
    pub natural: Vec<f64>,
}

pub fn natural_energy(s: &ModalState, cfg: &SystemConfig, form: NaturalEnergyForm) -> f64 {
    let c = cfg.coupling();
    let mut e = 0.0;
    for k in 0..s.modes() {
        let k2 = ((k + 1) * (k + 1)) as f64;
        let (a, b, ad, bd) = (s.a[k], s.b[k], s.a_dot[k], s.b_dot[k]);
        e += ad * ad + k2 * a * a + bd * bd + k2 * k2 * b * b;
        if form == NaturalEnergyForm::Full {
            e += c.a * a * a + c.d * b * b + (c.b + c.c) * a * b;
        }
    }
    std::f64::consts::FRAC_PI_4 * e
}

/// Weighted energy (`state_norm^2` under `spec`) and natural energy per sample.
pub fn energy_series(
    rec: &TrajectoryRecord,
    spec: &StateSpaceSpec,
    cfg: &SystemConfig,
    form: NaturalEnergyForm,
) -> Result<EnergySeries> {
    let mut weighted = Vec::with_capacity(rec.len());
    let mut natural = Vec::with_capacity(rec.len());
    for s in &rec.states {
        weighted.push(state_norm_squared(s, spec)?);
        natural.push(natural_energy(s, cfg, form));
    }
    Ok(EnergySeries { weighted, natural })
}

/// Least-squares fit `log E(t) = intercept - rate t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `log E`.
    pub residual: f64,
    pub samples: usize,
}

pub fn fit_decay_rate(times: &[f64], values: &[f64], t_start: f64, t_end: f64) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Dimension("times and values differ in length".into()));
    }
    let mut pts = Vec::new();
    for (&t, &e) in times.iter().zip(values) {
        if t < t_start - 1e-12 || t > t_end + 1e-12 {
            continue;
        }
        if !(e > 0.0) {
            return Err(Error::NonPositiveEnergy { time: t, value: e });
        }
        pts.push((t, e.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(format!("fewer than two samples in [{t_start}, {t_end}]")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(DecayFit { rate: -slope, intercept, residual: (ss / n).sqrt(), samples: pts.len() })
}

/// Smallest `M` with `E(t) <= M E(0) e^{-rate t}` on every sample.
pub fn envelope_constant(times: &[f64], values: &[f64], rate: f64) -> Result<f64> {
    let e0 = *values.first().ok_or_else(|| Error::InvalidParameter("empty series".into()))?;
    if !(e0 > 0.0) {
        return Err(Error::NonPositiveEnergy { time: times[0], value: e0 });
    }
    Ok(times.iter().zip(values).map(|(&t, &e)| e * (rate * t).exp() / e0).fold(0.0, f64::max))
}

/// Centered moving average over `half_width` samples on each side, truncated
/// at the ends.
pub fn moving_average(values: &[f64], half_width: usize) -> Vec<f64> {
    let n = values.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + values[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Control samples recomputed as `F x(t)` with the stored gains.
pub fn recompute_controls(system: &ClosedLoop, rec: &TrajectoryRecord) -> Vec<(f64, f64)> {
    rec.states
        .iter()
        .map(|s| {
            let v = &system.gains * DVector::from_vec(s.to_vector());
            (v[0], v[1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::Coupling;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    #[test]
    fn uncoupled_model_rows() {
        let cfg = SystemConfig::new(Coupling::NONE, SQRT_2 / 3.0, SQRT_2 / 4.0, 2).unwrap();
        let m = build_model(&cfg);
        // acceleration rows 4..8: a1, a2, b1, b2
        assert_eq!(m.drift[(4, 0)], -1.0);
        assert_eq!(m.drift[(5, 1)], -4.0);
        assert_eq!(m.drift[(6, 2)], -1.0);
        assert_eq!(m.drift[(7, 3)], -16.0);
        let ev = eigenvalues(&m.drift).unwrap();
        for want in [1.0, 2.0, 1.0, 4.0] {
            assert!(ev.iter().any(|z| z.re.abs() < 1e-10 && (z.im - want).abs() < 1e-10));
            assert!(ev.iter().any(|z| z.re.abs() < 1e-10 && (z.im + want).abs() < 1e-10));
        }
    }

    #[test]
    fn reference_mode_one_rows_and_inputs() {
        let m = build_model(&SystemConfig::reference(7));
        assert_eq!(m.drift[(14, 0)], -4.0);
        assert_eq!(m.drift[(14, 7)], -1.0);
        assert_eq!(m.drift[(21, 0)], -2.0);
        assert_eq!(m.drift[(21, 7)], -1.5);
        assert_eq!(m.input.iter().filter(|x| **x != 0.0).count(), 14);

        let cfg = SystemConfig::new(Coupling::NONE, FRAC_PI_2, 1.0, 2).unwrap();
        let m = build_model(&cfg);
        assert!(m.input[(5, 0)].abs() < 1e-16);
    }

    #[test]
    fn abscissa_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        assert_eq!(spectral_abscissa(&d).unwrap(), -1.0);
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&r).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rotation_preserves_norm() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let zs = propagate(&r, &DVector::from_vec(vec![1.0, 0.5]), 100_000, 1e-3, IntegrationMethod::ExactLti).unwrap();
        let n0 = zs[0].norm();
        assert!(zs.iter().all(|z| (z.norm() - n0).abs() < 1e-10 * n0));
    }

    #[test]
    fn zero_generator_keeps_state() {
        let sys = ClosedLoop::from_matrix(DMatrix::zeros(8, 8));
        let x0 = ModalState::smooth_default(2);
        for method in [IntegrationMethod::ExactLti, IntegrationMethod::Rk4] {
            let rec = integrate(&sys, &x0, 1.0, 0.1, method).unwrap();
            assert_eq!(rec.len(), 11);
            assert!(rec.states.iter().all(|s| *s == x0));
        }
    }

    #[test]
    fn rk4_step_guard() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 100.0, -100.0, 0.0]);
        let z0 = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(propagate(&m, &z0, 10, 0.01, IntegrationMethod::Rk4), Err(Error::StepSize { .. })));
        assert!(propagate(&m, &z0, 10, 0.004, IntegrationMethod::Rk4).is_ok());
    }

    #[test]
    fn energy_examples() {
        let cfg = SystemConfig::reference(3);
        let mut s = ModalState::zeros(3);
        assert_eq!(natural_energy(&s, &cfg, NaturalEnergyForm::Full), 0.0);
        s.a[0] = 1.0;
        assert_eq!(natural_energy(&s, &cfg, NaturalEnergyForm::KineticElastic), FRAC_PI_4);
    }

    #[test]
    fn fit_examples() {
        let t: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
        let e: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let f = fit_decay_rate(&t, &e, 0.0, 5.0).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-9 && f.residual < 1e-12);

        let e: Vec<f64> = t.iter().map(|t| 3.0 * (-20.0 * t).exp()).collect();
        let f = fit_decay_rate(&t, &e, 0.0, 5.0).unwrap();
        assert!((f.rate - 20.0).abs() < 1e-9 && (f.intercept - 3f64.ln()).abs() < 1e-9);

        let mut e = e;
        e[100] = 0.0;
        assert!(matches!(fit_decay_rate(&t, &e, 0.0, 5.0), Err(Error::NonPositiveEnergy { .. })));
    }

    #[test]
    fn moving_average_of_constant() {
        assert_eq!(moving_average(&[2.0; 7], 2), vec![2.0; 7]);
        assert_eq!(moving_average(&[0.0, 3.0, 0.0], 1), vec![1.5, 1.0, 1.5]);
    }
}
