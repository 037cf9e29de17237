//! Weighted controllability Gramian `K`, the operator `L_N`, feedback blocks
//! and open-loop exact controls.
//!
//! Entry `(p, q)` of `K` is
//! `int_0^S w(s) [u1_p(s, xi) u1_q(s, xi) + u2_p(s, eta) u2_q(s, eta)] ds`
//! where `u_p` is the adjoint solution started from the `p`-th canonical datum
//! in `[u10 | u20 | u11 | u21]` order. The closed form expands each trace in
//! the per-mode exponentials and sums [`oscillatory_integral`] terms, in
//! double-double: at `omega = 10` the matrix has condition near `1e18`.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::adjoint::{solve_all, AdjointMode, ModeSystem};
use crate::closed_loop::build_model;
use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, cholesky_solve, jacobi_eigen, max_abs, to_dd, to_f64, SymmetricEigen};
use crate::modal::{degeneracy_profile, state_norm, ModalState, StateSpaceSpec, SystemConfig};
use crate::quadrature::{self, QuadratureOptions};
use crate::real::{cabs, cexp, cexp_m1, Dd, Real};

/// `|lambda - 2 omega|` below this switches to the Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-8;
/// Condition numbers above this attach a warning to the Gramian.
pub const CONDITION_WARNING: f64 = 1e12;
/// Eigenvalues below this fraction of the largest are dropped by the
/// pseudo-inverse used for numerically singular Gramians.
pub const PSEUDO_INVERSE_CUTOFF: f64 = 1e-28;

/// Time weight `w(s)` of the Gramian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// `e^{-2 omega s}` on `[0, S]`.
    PureExponential,
    /// `e^{-2 omega s}` on `[0, T]`, then the linear tail
    /// `2 omega e^{-2 omega T} (T_omega - s)` on `[T, T_omega]`,
    /// `T_omega = T + 1/(2 omega)`.
    Komornik { t: f64 },
    /// `1` on `[0, S]`; the unweighted Gramian of exact controllability.
    Uniform,
}

impl WeightKind {
    pub fn name(&self) -> &'static str {
        match self {
            WeightKind::PureExponential => "pure_exponential",
            WeightKind::Komornik { .. } => "komornik_eomega",
            WeightKind::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramianSpec {
    pub omega: f64,
    /// Horizon `S`.
    pub horizon: f64,
    pub kind: WeightKind,
}

impl GramianSpec {
    /// `max(2 pi + 1, 5 / (2 omega))`.
    pub fn default_horizon(omega: f64) -> f64 {
        (2.0 * std::f64::consts::PI + 1.0).max(5.0 / (2.0 * omega))
    }

    pub fn pure_exponential(omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Self::pure_exponential_with_horizon(omega, Self::default_horizon(omega))
    }

    pub fn pure_exponential_with_horizon(omega: f64, horizon: f64) -> Result<Self> {
        check_omega(omega)?;
        check_positive("horizon S", horizon)?;
        Ok(GramianSpec { omega, horizon, kind: WeightKind::PureExponential })
    }

    /// Weight `e_omega` with exponential part on `[0, t]`; `S = t + 1/(2 omega)`.
    pub fn komornik(omega: f64, t: f64) -> Result<Self> {
        check_omega(omega)?;
        check_positive("T", t)?;
        Ok(GramianSpec { omega, horizon: t + 0.5 / omega, kind: WeightKind::Komornik { t } })
    }

    pub fn uniform(horizon: f64) -> Result<Self> {
        check_positive("horizon", horizon)?;
        Ok(GramianSpec { omega: 0.0, horizon, kind: WeightKind::Uniform })
    }

    pub fn weight(&self, s: f64) -> f64 {
        if s < 0.0 || s > self.horizon {
            return 0.0;
        }
        match self.kind {
            WeightKind::Uniform => 1.0,
            WeightKind::PureExponential => (-2.0 * self.omega * s).exp(),
            WeightKind::Komornik { t } => {
                if s <= t {
                    (-2.0 * self.omega * s).exp()
                } else {
                    2.0 * self.omega * (-2.0 * self.omega * t).exp() * (self.horizon - s)
                }
            }
        }
    }

    /// Breakpoints of the piecewise-smooth weight, including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            WeightKind::Komornik { t } => vec![0.0, t, self.horizon],
            _ => vec![0.0, self.horizon],
        }
    }
}

fn check_omega(omega: f64) -> Result<()> {
    check_positive("omega", omega)
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} must be positive and finite")))
    }
}

/// `int_0^L e^{z s} ds`.
fn exp_integral<R: Real>(z: Complex<R>, len: R) -> Complex<R> {
    if cabs(z).to_f64() < SERIES_THRESHOLD {
        // sum_n z^n L^{n+1} / (n+1)!
        let mut term = Complex::new(len, R::zero());
        let mut sum = term;
        for n in 1..12 {
            term = term * z * len / R::from_usize(n + 1);
            sum = sum + term;
            if cabs(term).to_f64() <= R::epsilon() * cabs(sum).to_f64() {
                break;
            }
        }
        sum
    } else {
        cexp_m1(z * len) / z
    }
}

/// `int_0^h u e^{-lambda u} du`.
fn tail_moment<R: Real>(lambda: Complex<R>, h: R) -> Complex<R> {
    let x = lambda * h;
    if cabs(x).to_f64() < 0.5 {
        // h^2 sum_n (-x)^n / (n! (n+2))
        let mut pow = Complex::new(R::one(), R::zero());
        let mut sum = Complex::new(R::from_f64(0.5), R::zero());
        for n in 1..60 {
            pow = -pow * x / R::from_usize(n);
            let term = pow / R::from_usize(n + 2);
            sum = sum + term;
            if cabs(term).to_f64() <= R::epsilon() * 0.1 {
                break;
            }
        }
        sum * h * h
    } else {
        let one = Complex::new(R::one(), R::zero());
        (one - cexp(-x) * (one + x)) / (lambda * lambda)
    }
}

/// `int_0^S w(s) e^{lambda s} ds` in the precision of `R`.
pub fn oscillatory_integral_in<R: Real>(lambda: Complex<R>, spec: &GramianSpec) -> Complex<R> {
    let two_omega = R::from_f64(2.0 * spec.omega);
    let shift = |l: Complex<R>| Complex::new(l.re - two_omega, l.im);
    match spec.kind {
        WeightKind::Uniform => exp_integral(lambda, R::from_f64(spec.horizon)),
        WeightKind::PureExponential => exp_integral(shift(lambda), R::from_f64(spec.horizon)),
        WeightKind::Komornik { t } => {
            let tr = R::from_f64(t);
            let head = exp_integral(shift(lambda), tr);
            // s = T_omega - u on the tail
            let h = R::from_f64(spec.horizon) - tr;
            let tw = R::from_f64(spec.horizon);
            let phase = cexp(Complex::new(lambda.re * tw - two_omega * tr, lambda.im * tw));
            head + phase * tail_moment(lambda, h) * two_omega
        }
    }
}

/// `int_0^S w(s) e^{lambda s} ds`.
pub fn oscillatory_integral(lambda: Complex<f64>, spec: &GramianSpec) -> Complex<f64> {
    oscillatory_integral_in(lambda, spec)
}

/// Exponential expansion of the canonical adjoint solutions of one mode:
/// `alpha[p][j]` multiplies `e^{rates[j] s}` in the trace of datum `p`.
struct ModeExpansion<R: Real> {
    rates: [Complex<R>; 4],
    alpha: [[Complex<R>; 4]; 4],
    beta: [[Complex<R>; 4]; 4],
}

fn mode_expansions<R: Real>(
    cfg: &SystemConfig,
    mode: AdjointMode,
    warnings: &mut Vec<String>,
) -> Result<Vec<ModeExpansion<R>>> {
    (1..=cfg.modes())
        .map(|k| {
            let sys = ModeSystem::<R>::adjoint(cfg, k, mode);
            let mut e = ModeExpansion {
                rates: [Complex::new(R::zero(), R::zero()); 4],
                alpha: [[Complex::new(R::zero(), R::zero()); 4]; 4],
                beta: [[Complex::new(R::zero(), R::zero()); 4]; 4],
            };
            for p in 0..4 {
                let mut init = [R::zero(); 4];
                init[p] = R::one();
                let sol = sys.solve(init)?;
                if p == 0 {
                    if let Some(w) = sol.warning() {
                        warnings.push(w);
                    }
                }
                e.rates = sol.rates;
                e.alpha[p] = sol.alpha_coef;
                e.beta[p] = sol.beta_coef;
            }
            Ok(e)
        })
        .collect()
}

/// Closed-form Gramian in the precision of `R`, symmetrized.
pub fn gramian_matrix<R: Real>(
    cfg: &SystemConfig,
    spec: &GramianSpec,
    mode: AdjointMode,
) -> Result<(DMatrix<R>, Vec<String>)> {
    let n = cfg.modes();
    let mut warnings = Vec::new();
    let modes = mode_expansions::<R>(cfg, mode, &mut warnings)?;
    let m: Vec<R> = cfg.xi_weights().iter().map(|&x| R::from_f64(x)).collect();
    let nw: Vec<R> = cfg.eta_weights().iter().map(|&x| R::from_f64(x)).collect();
    let mut k = DMatrix::<R>::zeros(4 * n, 4 * n);

    for a in 0..n {
        for b in a..n {
            let (ea, eb) = (&modes[a], &modes[b]);
            let mut table = [[Complex::new(R::zero(), R::zero()); 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    table[i][j] = oscillatory_integral_in(ea.rates[i] + eb.rates[j], spec);
                }
            }
            let mm = m[a] * m[b];
            let nn = nw[a] * nw[b];
            for p in 0..4 {
                for q in 0..4 {
                    let mut acc = R::zero();
                    for i in 0..4 {
                        for j in 0..4 {
                            let w = table[i][j];
                            let sa = ea.alpha[p][i] * eb.alpha[q][j];
                            let sb = ea.beta[p][i] * eb.beta[q][j];
                            // real part of (mm sa + nn sb) w
                            let re = (sa.re * w.re - sa.im * w.im) * mm + (sb.re * w.re - sb.im * w.im) * nn;
                            acc += re;
                        }
                    }
                    k[(p * n + a, q * n + b)] = acc;
                    k[(q * n + b, p * n + a)] = acc;
                }
            }
        }
    }
    let half = R::from_f64(0.5);
    let sym = DMatrix::from_fn(4 * n, 4 * n, |i, j| (k[(i, j)] + k[(j, i)]) * half);
    Ok((sym, warnings))
}

/// How a [`Gramian`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramianSource {
    ClosedForm,
    Quadrature,
}

/// Assembled Gramian with its spectrum and (when positive definite) its
/// double-double Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gramian {
    spec: GramianSpec,
    cfg: SystemConfig,
    adjoint_mode: AdjointMode,
    source: GramianSource,
    matrix: DMatrix<f64>,
    matrix_dd: DMatrix<Dd>,
    factor: Option<DMatrix<Dd>>,
    eigen: SymmetricEigen,
    condition: f64,
    warnings: Vec<String>,
}

impl Gramian {
    fn from_dd(
        cfg: &SystemConfig,
        spec: &GramianSpec,
        mode: AdjointMode,
        source: GramianSource,
        matrix_dd: DMatrix<Dd>,
        mut warnings: Vec<String>,
    ) -> Result<Self> {
        let eigen = jacobi_eigen(&matrix_dd).ok_or(Error::EigenFailure)?;
        let (lo, hi) = (eigen.min().to_f64(), eigen.max().to_f64());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        let factor = if lo > 0.0 { cholesky(&matrix_dd) } else { None };

        let report = degeneracy_profile(cfg);
        if report.is_degenerate() {
            warnings.push(format!("degenerate configuration: invisible modes {:?}", report.flagged()));
        }
        if factor.is_none() {
            warnings.push(format!("Gramian is not positive definite (min eigenvalue {lo:e})"));
        } else if condition > CONDITION_WARNING {
            warnings.push(format!("Gramian condition number {condition:e} exceeds {CONDITION_WARNING:e}"));
        }
        Ok(Gramian {
            spec: *spec,
            cfg: cfg.clone(),
            adjoint_mode: mode,
            source,
            matrix: to_f64(&matrix_dd),
            matrix_dd,
            factor,
            eigen,
            condition,
            warnings,
        })
    }

    pub fn spec(&self) -> &GramianSpec {
        &self.spec
    }
    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }
    pub fn adjoint_mode(&self) -> AdjointMode {
        self.adjoint_mode
    }
    pub fn source(&self) -> GramianSource {
        self.source
    }
    /// `4N x 4N`, ordered `[u10 | u20 | u11 | u21]`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn matrix_dd(&self) -> &DMatrix<Dd> {
        &self.matrix_dd
    }
    /// Lower Cholesky factor, present when the matrix is positive definite.
    pub fn factor(&self) -> Option<&DMatrix<Dd>> {
        self.factor.as_ref()
    }
    pub fn is_positive_definite(&self) -> bool {
        self.factor.is_some()
    }
    /// Ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen.values.iter().map(|x| x.to_f64()).collect()
    }
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen.min().to_f64()
    }
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen.max().to_f64()
    }
    /// `lambda_max / lambda_min`; infinite when not positive definite.
    pub fn condition(&self) -> f64 {
        self.condition
    }
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
    pub fn modes(&self) -> usize {
        self.cfg.modes()
    }

    /// `max |K - K^T|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// `a(U, V) = U^T K V` on modal data.
    pub fn bilinear(&self, u: &ModalState, v: &ModalState) -> Result<f64> {
        let (u, v) = (dd_vector(self, u)?, dd_vector(self, v)?);
        Ok(((u.transpose() * &self.matrix_dd) * v)[(0, 0)].to_f64())
    }

    fn solve_dd(&self, rhs: &DMatrix<Dd>) -> Result<DMatrix<Dd>> {
        let l = self
            .factor
            .as_ref()
            .ok_or_else(|| Error::SingularGramian(format!("min eigenvalue {:e}", self.min_eigenvalue())))?;
        Ok(cholesky_solve(l, rhs))
    }

    /// `K^+ rhs` through the eigen-decomposition, dropping eigenvalues below
    /// [`PSEUDO_INVERSE_CUTOFF`] times the largest.
    fn pseudo_solve_dd(&self, rhs: &DMatrix<Dd>) -> (DMatrix<Dd>, usize) {
        let v = &self.eigen.vectors;
        let cut = self.eigen.max() * Dd::from(PSEUDO_INVERSE_CUTOFF);
        let mut proj = v.transpose() * rhs;
        let mut dropped = 0;
        for (i, &lam) in self.eigen.values.iter().enumerate() {
            let scale = if lam > cut {
                Dd::one() / lam
            } else {
                dropped += 1;
                Dd::zero()
            };
            for c in 0..proj.ncols() {
                proj[(i, c)] *= scale;
            }
        }
        (v * proj, dropped)
    }
}

fn dd_vector(g: &Gramian, s: &ModalState) -> Result<DMatrix<Dd>> {
    if s.modes() != g.modes() {
        return Err(Error::Dimension(format!("state has {} modes, Gramian {}", s.modes(), g.modes())));
    }
    Ok(DMatrix::from_iterator(4 * g.modes(), 1, s.to_vector().into_iter().map(Dd::from)))
}

/// Closed-form assembly (double-double internally).
pub fn assemble_gramian(cfg: &SystemConfig, spec: &GramianSpec, mode: AdjointMode) -> Result<Gramian> {
    let (k, warnings) = gramian_matrix::<Dd>(cfg, spec, mode)?;
    Gramian::from_dd(cfg, spec, mode, GramianSource::ClosedForm, k, warnings)
}

/// Adaptive-quadrature assembly from per-mode matrix exponentials of the
/// first-order adjoint generator; independent of the eigen-expansion used by
/// [`assemble_gramian`]. `tol` is relative to the largest entry.
pub fn assemble_gramian_quadrature(
    cfg: &SystemConfig,
    spec: &GramianSpec,
    mode: AdjointMode,
    tol: f64,
) -> Result<Gramian> {
    check_positive("tol", tol)?;
    let n = cfg.modes();
    let dim = 4 * n;

    // balanced generators B_k = D^-1 H_k D, D = diag(1, 1, k, k^2)
    let gens: Vec<(Matrix4<f64>, [f64; 4])> = (1..=n)
        .map(|k| {
            let s = ModeSystem::<f64>::adjoint(cfg, k, mode).stiffness;
            let d = [1.0, 1.0, k as f64, (k * k) as f64];
            let mut h = Matrix4::zeros();
            h[(0, 2)] = 1.0;
            h[(1, 3)] = 1.0;
            h[(2, 0)] = -s[0][0];
            h[(2, 1)] = -s[0][1];
            h[(3, 0)] = -s[1][0];
            h[(3, 1)] = -s[1][1];
            let b = Matrix4::from_fn(|i, j| h[(i, j)] * d[j] / d[i]);
            (b, d)
        })
        .collect();
    let m = cfg.xi_weights().to_vec();
    let nw = cfg.eta_weights().to_vec();

    let npairs = dim * (dim + 1) / 2;
    let mut o1 = vec![0.0; dim];
    let mut o2 = vec![0.0; dim];
    let integrand = |s: f64, out: &mut [f64]| {
        let w = spec.weight(s);
        for (k, (b, d)) in gens.iter().enumerate() {
            let e = (b * s).exp();
            for p in 0..4 {
                // rows alpha, beta of D e^{Bs} D^-1
                o1[p * n + k] = m[k] * e[(0, p)] / d[p];
                o2[p * n + k] = nw[k] * e[(1, p)] / d[p];
            }
        }
        let mut idx = 0;
        for i in 0..dim {
            for j in i..dim {
                out[idx] = w * (o1[i] * o1[j] + o2[i] * o2[j]);
                idx += 1;
            }
        }
    };
    let mut f = integrand;
    let opts = QuadratureOptions { abs_tol: 1e-300, rel_tol: tol, max_intervals: 200_000 };
    let mut total = vec![0.0; npairs];
    for w in spec.breakpoints().windows(2) {
        let r = quadrature::integrate(&mut f, npairs, w[0], w[1], opts)?;
        for (t, v) in total.iter_mut().zip(r.value) {
            *t += v;
        }
    }
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let mut idx = 0;
    for i in 0..dim {
        for j in i..dim {
            k[(i, j)] = total[idx];
            k[(j, i)] = total[idx];
            idx += 1;
        }
    }
    Gramian::from_dd(cfg, spec, mode, GramianSource::Quadrature, to_dd(&k), Vec::new())
}

/// `Omega z = (z_vel, -z_pos)` in `[u10 | u20 | u11 | u21]` layout.
fn apply_omega(z: &DMatrix<Dd>) -> DMatrix<Dd> {
    let h = z.nrows() / 2;
    DMatrix::from_fn(z.nrows(), z.ncols(), |i, c| if i < h { z[(i + h, c)] } else { -z[(i - h, c)] })
}

fn half_pi() -> Dd {
    Dd::PI * Dd::from(0.5)
}

/// `U0 = L_N(Z)`: the solution of `a(U0, V) = (pi/2) V^T Omega Z` for all `V`,
/// i.e. `U0 = (pi/2) K^-1 Omega Z`.
pub fn solve_l(g: &Gramian, z: &ModalState) -> Result<ModalState> {
    let rhs = apply_omega(&dd_vector(g, z)?) * half_pi();
    let u = g.solve_dd(&rhs)?;
    ModalState::from_vector(&u.iter().map(|x| x.to_f64()).collect::<Vec<_>>())
}

/// Sign convention of the feedback `v = sign (pi/2) C K^-1 Omega x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackSign {
    /// `v = -P L_N x`.
    #[default]
    Negative,
    Positive,
}

impl FeedbackSign {
    pub fn value(self) -> f64 {
        match self {
            FeedbackSign::Negative => -1.0,
            FeedbackSign::Positive => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            FeedbackSign::Negative => FeedbackSign::Positive,
            FeedbackSign::Positive => FeedbackSign::Negative,
        }
    }
}

/// The rows of `K^-1` that the feedback reads, with point weights and sign.
///
/// With `phi = K^-1 Omega x` the controls are
/// `v1 = sign (pi/2) sum_k m_k phi_{u10,k}` and `v2 = sign (pi/2) sum_k n_k phi_{u20,k}`,
/// so only block rows 1 and 2 of `K^-1` enter:
/// `v1 = sign (pi/2) m^T (K^11 a_dot + K^12 b_dot - K^13 a - K^14 b)`, likewise
/// `v2` with `K^21 .. K^24` and `n`.
#[derive(Debug, Clone)]
pub struct FeedbackOperator {
    modes: usize,
    m: Vec<f64>,
    n: Vec<f64>,
    sign: FeedbackSign,
    inverse_rows: DMatrix<Dd>,
    factor: DMatrix<Dd>,
    residual: f64,
}

impl FeedbackOperator {
    pub fn modes(&self) -> usize {
        self.modes
    }
    pub fn sign(&self) -> FeedbackSign {
        self.sign
    }
    pub fn with_sign(&self, sign: FeedbackSign) -> Self {
        FeedbackOperator { sign, ..self.clone() }
    }
    pub fn xi_weights(&self) -> &[f64] {
        &self.m
    }
    pub fn eta_weights(&self) -> &[f64] {
        &self.n
    }
    /// `max_i sum_j |(K K^-1 - I)_ij|`, computed in double-double.
    pub fn residual(&self) -> f64 {
        self.residual
    }
    /// Cholesky factor of the Gramian the operator was built from.
    pub fn gramian_factor(&self) -> &DMatrix<Dd> {
        &self.factor
    }

    /// Block `K^{ij}` of `K^-1`, `i` in `1..=2`, `j` in `1..=4`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        assert!((1..=2).contains(&i) && (1..=4).contains(&j), "block ({i}, {j}) not stored");
        let n = self.modes;
        to_f64(&self.inverse_rows.view(((i - 1) * n, (j - 1) * n), (n, n)).into_owned())
    }
    pub fn k11(&self) -> DMatrix<f64> {
        self.block(1, 1)
    }
    pub fn k12(&self) -> DMatrix<f64> {
        self.block(1, 2)
    }
    pub fn k23(&self) -> DMatrix<f64> {
        self.block(2, 3)
    }
    pub fn k24(&self) -> DMatrix<f64> {
        self.block(2, 4)
    }

    /// `2 x 4N` gain `F` with `v = F x`, in double-double.
    pub fn gains_dd(&self) -> DMatrix<Dd> {
        let n = self.modes;
        let mut y = DMatrix::<Dd>::zeros(2, 4 * n);
        for k in 0..n {
            let (mk, nk) = (Dd::from(self.m[k]), Dd::from(self.n[k]));
            for c in 0..4 * n {
                y[(0, c)] += mk * self.inverse_rows[(k, c)];
                y[(1, c)] += nk * self.inverse_rows[(n + k, c)];
            }
        }
        let scale = half_pi() * Dd::from(self.sign.value());
        // (Y Omega)[:, j] = -Y[:, j + 2N] for positions, Y[:, j - 2N] for velocities
        let h = 2 * n;
        DMatrix::from_fn(2, 4 * n, |r, c| if c < h { -y[(r, c + h)] * scale } else { y[(r, c - h)] * scale })
    }

    pub fn gains(&self) -> DMatrix<f64> {
        to_f64(&self.gains_dd())
    }

    /// `(v1, v2)` for the modal state `x`.
    pub fn controls(&self, x: &ModalState) -> (f64, f64) {
        let f = self.gains();
        let v = f * DVector::from_vec(x.to_vector());
        (v[0], v[1])
    }
}

/// Factorizes `K`, forms `K^-1` and keeps its first two block rows.
pub fn block_inverse(g: &Gramian) -> Result<FeedbackOperator> {
    let n = g.modes();
    let eye = linalg::identity(4 * n);
    let inv = g.solve_dd(&eye)?;
    let res = &g.matrix_dd * &inv - &eye;
    let residual = (0..4 * n).map(|i| (0..4 * n).map(|j| res[(i, j)].to_f64().abs()).sum::<f64>()).fold(0.0, f64::max);
    Ok(FeedbackOperator {
        modes: n,
        m: g.cfg.xi_weights().to_vec(),
        n: g.cfg.eta_weights().to_vec(),
        sign: FeedbackSign::Negative,
        inverse_rows: inv.rows(0, 2 * n).into_owned(),
        factor: g.factor.clone().expect("solve_dd succeeded"),
        residual,
    })
}

/// Minimum-energy open-loop control on `[0, T]` and its verification.
#[derive(Debug, Clone)]
pub struct HumControl {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// Adjoint initial datum `U0` generating the control.
    pub adjoint_data: ModalState,
    /// `int_0^T |v|^2 dt`.
    pub control_energy: f64,
    /// Forward-simulated final state.
    pub final_state: ModalState,
    /// Decay-space norm of `X(T) - X_target`.
    pub residual: f64,
    /// `residual` over `max(|X0|, |X_target|)` in the same norm.
    pub relative_residual: f64,
    pub condition: f64,
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

/// Relative residual above which [`hum_control`] attaches a warning.
pub const HUM_RESIDUAL_WARNING: f64 = 1e-6;

/// Steers `x0` to `target` at time `horizon` with the control
/// `v(t) = (2/pi) C e^{H t} U0`, `U0 = (pi/2)^2 K^-1 Omega (e^{-F T} x_T - x0)`,
/// where `K` is the unweighted Gramian on `[0, T]` of the exact adjoint.
///
/// The control is sampled on a uniform grid of step at most `dt`, and the
/// final state is recomputed by exact propagation of the joint
/// state/adjoint system.
pub fn hum_control(
    cfg: &SystemConfig,
    horizon: f64,
    x0: &ModalState,
    target: &ModalState,
    dt: f64,
) -> Result<HumControl> {
    check_positive("T", horizon)?;
    check_positive("dt", dt)?;
    let n = cfg.modes();
    if x0.modes() != n || target.modes() != n {
        return Err(Error::Dimension("initial/target state and configuration disagree on N".into()));
    }
    if let Some(e) = degeneracy_profile(cfg).to_error() {
        return Err(e);
    }
    let spec = GramianSpec::uniform(horizon)?;
    let g = assemble_gramian(cfg, &spec, AdjointMode::Coupled)?;
    let mut warnings = g.warnings().to_vec();
    let model = build_model(cfg);
    let dim = 4 * n;

    let back = (&model.drift * -horizon).exp();
    let d = &back * DVector::from_vec(target.to_vector()) - DVector::from_vec(x0.to_vector());
    let d = DMatrix::from_iterator(dim, 1, d.iter().map(|&x| Dd::from(x)));
    let rhs = apply_omega(&d) * (half_pi() * half_pi());
    let u0 = if g.is_positive_definite() && g.condition() < 1.0 / (Dd::epsilon() * 1e3) {
        g.solve_dd(&rhs)?
    } else {
        let (u, dropped) = g.pseudo_solve_dd(&rhs);
        warnings.push(format!("numerically singular Gramian: pseudo-inverse dropped {dropped} directions"));
        u
    };
    let energy = ((u0.transpose() * &g.matrix_dd * &u0)[(0, 0)] / (half_pi() * half_pi())).to_f64();
    let u0 = ModalState::from_vector(&u0.iter().map(|x| x.to_f64()).collect::<Vec<_>>())?;

    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / steps as f64;
    let sols = solve_all(cfg, &u0, AdjointMode::Coupled)?;
    let two_over_pi = 2.0 / std::f64::consts::PI;
    let mut times = Vec::with_capacity(steps + 1);
    let mut v1 = Vec::with_capacity(steps + 1);
    let mut v2 = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 * h;
        let (a, b) = crate::adjoint::adjoint_traces(cfg, &sols, t)?;
        times.push(t);
        v1.push(two_over_pi * a);
        v2.push(two_over_pi * b);
    }

    // joint system [[F, (2/pi) G C], [0, H]] over the same grid
    let c_obs = observation_matrix(cfg);
    let adj = adjoint_generator(cfg, AdjointMode::Coupled);
    let mut joint = DMatrix::<f64>::zeros(2 * dim, 2 * dim);
    joint.view_mut((0, 0), (dim, dim)).copy_from(&model.drift);
    joint.view_mut((0, dim), (dim, dim)).copy_from(&(&model.input * &c_obs * two_over_pi));
    joint.view_mut((dim, dim), (dim, dim)).copy_from(&adj);
    let step = (joint * h).exp();
    let mut y = DVector::<f64>::zeros(2 * dim);
    y.rows_mut(0, dim).copy_from(&DVector::from_vec(x0.to_vector()));
    y.rows_mut(dim, dim).copy_from(&DVector::from_vec(u0.to_vector()));
    for _ in 0..steps {
        y = &step * y;
    }
    let final_state = ModalState::from_vector(y.rows(0, dim).as_slice())?;

    let space = StateSpaceSpec::decay_space(cfg.xi(), cfg.eta());
    let residual = state_norm(&final_state.difference(target)?, &space)?;
    let scale = state_norm(x0, &space)?.max(state_norm(target, &space)?);
    let relative_residual = if scale > 0.0 { residual / scale } else { residual };
    if relative_residual > HUM_RESIDUAL_WARNING {
        warnings.push(format!("HUM residual {relative_residual:e} exceeds {HUM_RESIDUAL_WARNING:e}"));
    }
    Ok(HumControl {
        horizon,
        times,
        v1,
        v2,
        adjoint_data: u0,
        control_energy: energy,
        final_state,
        residual,
        relative_residual,
        condition: g.condition(),
        min_eigenvalue: g.min_eigenvalue(),
        warnings,
    })
}

/// `2 x 4N` observation `(sum_k m_k alpha_k, sum_k n_k beta_k)`.
pub fn observation_matrix(cfg: &SystemConfig) -> DMatrix<f64> {
    let n = cfg.modes();
    let mut c = DMatrix::zeros(2, 4 * n);
    for k in 0..n {
        c[(0, k)] = cfg.xi_weights()[k];
        c[(1, n + k)] = cfg.eta_weights()[k];
    }
    c
}

/// First-order adjoint generator `[[0, I], [-S, 0]]` on `(alpha, beta, alpha', beta')`.
pub fn adjoint_generator(cfg: &SystemConfig, mode: AdjointMode) -> DMatrix<f64> {
    let n = cfg.modes();
    let mut h = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..2 * n {
        h[(i, 2 * n + i)] = 1.0;
    }
    for k in 0..n {
        let s = ModeSystem::<f64>::adjoint(cfg, k + 1, mode).stiffness;
        h[(2 * n + k, k)] = -s[0][0];
        h[(2 * n + k, n + k)] = -s[0][1];
        h[(3 * n + k, k)] = -s[1][0];
        h[(3 * n + k, n + k)] = -s[1][1];
    }
    h
}

/// Two-sided constants of the observability estimate on a window `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub horizon: f64,
    /// Extreme generalized eigenvalues of (window Gramian, weighted-norm diagonal).
    pub c_min: f64,
    pub c_max: f64,
    /// Largest off-diagonal entry of the window Gramian over its largest entry.
    pub off_diagonal: f64,
}

/// Compares `int_0^T |u1(t, xi)|^2 + |u2(t, eta)|^2 dt` with the
/// `D^0_xi x D^-1_xi x D^0_eta x D^-2_eta` norm of the adjoint data.
pub fn observability_constants(cfg: &SystemConfig, horizon: f64, mode: AdjointMode) -> Result<ObservabilityReport> {
    if let Some(e) = degeneracy_profile(cfg).to_error() {
        return Err(e);
    }
    let spec = GramianSpec::uniform(horizon)?;
    let g = assemble_gramian(cfg, &spec, mode)?;
    let dim = 4 * cfg.modes();
    let diag = StateSpaceSpec::observation_space(cfg.xi(), cfg.eta()).diagonal(cfg.modes())?;
    let inv_sqrt: Vec<Dd> = diag.iter().map(|&d| Dd::one() / Real::sqrt(Dd::from(d))).collect();
    let scaled = DMatrix::from_fn(dim, dim, |i, j| g.matrix_dd[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let e = jacobi_eigen(&scaled).ok_or(Error::EigenFailure)?;
    let k = &g.matrix;
    let mut off = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                off = off.max(k[(i, j)].abs());
            }
        }
    }
    Ok(ObservabilityReport {
        horizon,
        c_min: e.min().to_f64(),
        c_max: e.max().to_f64(),
        off_diagonal: off / max_abs(k),
    })
}
