//! Mode-by-mode solution of the adjoint problem
//! `(alpha, beta)'' + S (alpha, beta) = 0` and its point traces.
//!
//! Each mode is diagonalized once; a solution for given initial data is then a
//! sum of four exponentials `e^{lambda_j t}`. Everything is generic over
//! [`Real`] so the Gramian can be assembled in double-double.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::modal::SystemConfig;
use crate::real::{cabs, cexp, csqrt, Real};

/// Eigenvector matrices with a larger 2-norm condition number are rejected.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

/// Which per-mode stiffness drives the adjoint solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointMode {
    /// True adjoint of the coupled Galerkin model: transposed coupling
    /// `[[k^2+A, B], [C, k^4+D]]`.
    #[default]
    Coupled,
    /// Same stiffness as the primal system, `[[k^2+A, C], [B, k^4+D]]`.
    /// Coincides with `Coupled` when `B = C`.
    PrimalCoupling,
    /// `diag(k^2, k^4)`: uncoupled string and beam oscillations.
    PaperUncoupled,
}

impl AdjointMode {
    pub fn name(self) -> &'static str {
        match self {
            AdjointMode::Coupled => "coupled",
            AdjointMode::PrimalCoupling => "primal-coupling",
            AdjointMode::PaperUncoupled => "paper-uncoupled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coupled" => Some(AdjointMode::Coupled),
            "primal-coupling" => Some(AdjointMode::PrimalCoupling),
            "paper-uncoupled" => Some(AdjointMode::PaperUncoupled),
            _ => None,
        }
    }
}

/// Diagonalized second-order system of one mode.
#[derive(Debug, Clone)]
pub struct ModeSystem<R: Real> {
    pub k: usize,
    /// Row-major 2x2 stiffness.
    pub stiffness: [[R; 2]; 2],
    /// Eigenvalues `nu_a` (string-like), `nu_b` (beam-like).
    pub eigenvalues: [Complex<R>; 2],
    /// Unit eigenvectors, `eigenvectors[j]` belongs to `eigenvalues[j]`.
    pub eigenvectors: [[Complex<R>; 2]; 2],
    /// 2-norm condition number of the eigenvector matrix.
    pub condition: f64,
    pub diagonalizable: bool,
}

fn r<R: Real>(x: f64) -> R {
    R::from_f64(x)
}

fn c0<R: Real>() -> Complex<R> {
    Complex::new(R::zero(), R::zero())
}

impl<R: Real> ModeSystem<R> {
    /// Primal stiffness `[[k^2+A, C], [B, k^4+D]]`.
    pub fn primal(cfg: &SystemConfig, k: usize) -> Self {
        let c = cfg.coupling();
        let k2 = (k * k) as f64;
        Self::from_stiffness(k, [[r(k2 + c.a), r(c.c)], [r(c.b), r(k2 * k2 + c.d)]])
    }

    /// Stiffness used for the adjoint solutions under `mode`.
    pub fn adjoint(cfg: &SystemConfig, k: usize, mode: AdjointMode) -> Self {
        let c = cfg.coupling();
        let k2 = (k * k) as f64;
        let s = match mode {
            AdjointMode::Coupled => [[k2 + c.a, c.b], [c.c, k2 * k2 + c.d]],
            AdjointMode::PrimalCoupling => [[k2 + c.a, c.c], [c.b, k2 * k2 + c.d]],
            AdjointMode::PaperUncoupled => [[k2, 0.0], [0.0, k2 * k2]],
        };
        Self::from_stiffness(k, [[r(s[0][0]), r(s[0][1])], [r(s[1][0]), r(s[1][1])]])
    }

    pub fn from_stiffness(k: usize, stiffness: [[R; 2]; 2]) -> Self {
        let [[p, c], [b, q]] = stiffness;
        let half = r::<R>(0.5);
        let mean = (p + q) * half;
        let diff = (p - q) * half;
        let disc = diff * diff + b * c;
        let det = p * q - b * c;

        let (nu1, nu2) = if disc >= R::zero() {
            let root = disc.sqrt();
            // larger-magnitude root first, the other from the determinant
            let big = if mean >= R::zero() { mean + root } else { mean - root };
            let small = if big == R::zero() { R::zero() } else { det / big };
            (Complex::new(big, R::zero()), Complex::new(small, R::zero()))
        } else {
            let root = (-disc).sqrt();
            (Complex::new(mean, root), Complex::new(mean, -root))
        };
        // string-like eigenvalue is the one closer to p
        let dist = |nu: Complex<R>, x: R| cabs(nu - Complex::new(x, R::zero()));
        let (nu_a, nu_b) = if dist(nu2, p) < dist(nu1, p) { (nu2, nu1) } else { (nu1, nu2) };

        let tiny = r::<R>(R::epsilon()) * (p.abs() + q.abs() + b.abs() + c.abs() + R::one());
        let vec_for = |nu: Complex<R>, fallback: usize| -> [Complex<R>; 2] {
            let cp = Complex::new(c, R::zero());
            let bp = Complex::new(b, R::zero());
            let u = [cp, nu - Complex::new(p, R::zero())];
            let w = [nu - Complex::new(q, R::zero()), bp];
            let nu_ = (cabs(u[0]) * cabs(u[0]) + cabs(u[1]) * cabs(u[1])).sqrt();
            let nw = (cabs(w[0]) * cabs(w[0]) + cabs(w[1]) * cabs(w[1])).sqrt();
            let (v, n) = if nu_ >= nw { (u, nu_) } else { (w, nw) };
            if n <= tiny {
                let mut e = [c0::<R>(), c0::<R>()];
                e[fallback] = Complex::new(R::one(), R::zero());
                e
            } else {
                [v[0] / n, v[1] / n]
            }
        };
        let va = vec_for(nu_a, 0);
        let vb = vec_for(nu_b, 1);

        let overlap = va[0].conj() * vb[0] + va[1].conj() * vb[1];
        let g = cabs(overlap).to_f64().min(1.0);
        let condition = if g >= 1.0 { f64::INFINITY } else { ((1.0 + g) / (1.0 - g)).sqrt() };
        ModeSystem {
            k,
            stiffness,
            eigenvalues: [nu_a, nu_b],
            eigenvectors: [va, vb],
            condition,
            diagonalizable: condition <= MAX_EIGENVECTOR_CONDITION,
        }
    }

    /// Solution with initial data `(alpha, beta, alpha', beta')`.
    pub fn solve(&self, init: [R; 4]) -> Result<AdjointModeSolution<R>> {
        if !self.diagonalizable {
            return Err(Error::NonDiagonalizable { mode: self.k, condition: self.condition });
        }
        let [va, vb] = self.eigenvectors;
        // V = [va | vb]; coordinates y = V c
        let det = va[0] * vb[1] - vb[0] * va[1];
        let solve2 = |y0: R, y1: R| -> [Complex<R>; 2] {
            let y0 = Complex::new(y0, R::zero());
            let y1 = Complex::new(y1, R::zero());
            [(vb[1] * y0 - vb[0] * y1) / det, (va[0] * y1 - va[1] * y0) / det]
        };
        let pos = solve2(init[0], init[1]);
        let vel = solve2(init[2], init[3]);

        let scale = cabs(self.eigenvalues[0]) + cabs(self.eigenvalues[1]);
        let mut rates = [c0::<R>(); 4];
        let mut alpha_coef = [c0::<R>(); 4];
        let mut beta_coef = [c0::<R>(); 4];
        let i = Complex::new(R::zero(), R::one());
        let half = r::<R>(0.5);
        for j in 0..2 {
            let sigma = csqrt(self.eigenvalues[j]);
            if cabs(sigma) <= r::<R>(1e-12) * (scale.sqrt() + R::one()) {
                return Err(Error::NonDiagonalizable { mode: self.k, condition: f64::INFINITY });
            }
            let plus = (pos[j] - i * vel[j] / sigma) * half;
            let minus = (pos[j] + i * vel[j] / sigma) * half;
            let v = self.eigenvectors[j];
            rates[2 * j] = i * sigma;
            rates[2 * j + 1] = -(i * sigma);
            alpha_coef[2 * j] = v[0] * plus;
            alpha_coef[2 * j + 1] = v[0] * minus;
            beta_coef[2 * j] = v[1] * plus;
            beta_coef[2 * j + 1] = v[1] * minus;
        }
        Ok(AdjointModeSolution { k: self.k, rates, alpha_coef, beta_coef })
    }
}

/// `alpha(t) = sum_j alpha_coef[j] e^{rates[j] t}`, likewise `beta`.
///
/// In the uncoupled case the rates are `(ik, -ik, ik^2, -ik^2)` and the
/// nonzero coefficients are `c_k, c_{-k}` (string) and `d_k, d_{-k}` (beam).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointModeSolution<R: Real> {
    pub k: usize,
    pub rates: [Complex<R>; 4],
    pub alpha_coef: [Complex<R>; 4],
    pub beta_coef: [Complex<R>; 4],
}

impl<R: Real> AdjointModeSolution<R> {
    pub fn zero(k: usize) -> Self {
        AdjointModeSolution { k, rates: [c0(); 4], alpha_coef: [c0(); 4], beta_coef: [c0(); 4] }
    }

    /// `(alpha(t), beta(t))`.
    pub fn evaluate(&self, t: R) -> (R, R) {
        let mut a = c0::<R>();
        let mut b = c0::<R>();
        for j in 0..4 {
            let e = cexp(self.rates[j] * t);
            a = a + self.alpha_coef[j] * e;
            b = b + self.beta_coef[j] * e;
        }
        (a.re, b.re)
    }

    /// `(alpha'(t), beta'(t))`.
    pub fn derivative(&self, t: R) -> (R, R) {
        let mut a = c0::<R>();
        let mut b = c0::<R>();
        for j in 0..4 {
            let e = cexp(self.rates[j] * t) * self.rates[j];
            a = a + self.alpha_coef[j] * e;
            b = b + self.beta_coef[j] * e;
        }
        (a.re, b.re)
    }

    /// Largest real part among the rates; positive means a growing mode.
    pub fn max_growth(&self) -> f64 {
        self.rates.iter().map(|z| z.re.to_f64()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn warning(&self) -> Option<String> {
        let g = self.max_growth();
        (g > 0.0).then(|| format!("adjoint mode {} grows with rate {g:e}", self.k))
    }
}

/// Closed-form amplitudes of the uncoupled oscillations:
/// `c_k = (a - i b/k)/2`, `c_{-k} = conj(c_k)`, `d_k = (alpha - i beta/k^2)/2`.
///
/// `(a, b)` are string position and velocity, `(alpha, beta)` the beam's.
pub fn uncoupled_amplitudes(a: f64, b: f64, alpha: f64, beta: f64, k: usize) -> AdjointModeSolution<f64> {
    assert!(k >= 1, "mode index starts at 1");
    let kf = k as f64;
    let ck = Complex::new(a / 2.0, -b / (2.0 * kf));
    let dk = Complex::new(alpha / 2.0, -beta / (2.0 * kf * kf));
    let z = Complex::new(0.0, 0.0);
    AdjointModeSolution {
        k,
        rates: [Complex::new(0.0, kf), Complex::new(0.0, -kf), Complex::new(0.0, kf * kf), Complex::new(0.0, -kf * kf)],
        alpha_coef: [ck, ck.conj(), z, z],
        beta_coef: [z, z, dk, dk.conj()],
    }
}

/// Adjoint solution of mode `k` for `init = (alpha, beta, alpha', beta')`.
pub fn solve_mode(cfg: &SystemConfig, k: usize, init: [f64; 4]) -> Result<AdjointModeSolution<f64>> {
    solve_mode_with(cfg, k, init, AdjointMode::Coupled)
}

pub fn solve_mode_with(
    cfg: &SystemConfig,
    k: usize,
    init: [f64; 4],
    mode: AdjointMode,
) -> Result<AdjointModeSolution<f64>> {
    if k == 0 || k > cfg.modes() {
        return Err(Error::InvalidParameter(format!("mode {k} outside 1..={}", cfg.modes())));
    }
    ModeSystem::<f64>::adjoint(cfg, k, mode).solve(init)
}

/// `(u1(t, xi), u2(t, eta)) = (sum_k alpha_k(t) m_k, sum_k beta_k(t) n_k)`.
pub fn adjoint_traces(cfg: &SystemConfig, solutions: &[AdjointModeSolution<f64>], t: f64) -> Result<(f64, f64)> {
    let mut u1 = 0.0;
    let mut u2 = 0.0;
    for s in solutions {
        if s.k == 0 || s.k > cfg.modes() {
            return Err(Error::Dimension(format!("solution for mode {} outside 1..={}", s.k, cfg.modes())));
        }
        let (a, b) = s.evaluate(t);
        u1 += a * cfg.xi_weights()[s.k - 1];
        u2 += b * cfg.eta_weights()[s.k - 1];
    }
    Ok((u1, u2))
}

/// Solves every mode for the modal initial data `(alpha_k, beta_k, alpha_k', beta_k')`.
pub fn solve_all(
    cfg: &SystemConfig,
    init: &crate::modal::ModalState,
    mode: AdjointMode,
) -> Result<Vec<AdjointModeSolution<f64>>> {
    if init.modes() != cfg.modes() {
        return Err(Error::Dimension("initial data and configuration disagree on N".into()));
    }
    (1..=cfg.modes())
        .map(|k| {
            let i = k - 1;
            solve_mode_with(cfg, k, [init.a[i], init.b[i], init.a_dot[i], init.b_dot[i]], mode)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::{Coupling, ModalState};
    use crate::real::Dd;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn uncoupled(n: usize) -> SystemConfig {
        SystemConfig::new(Coupling::NONE, SQRT_2 / 3.0, SQRT_2 / 4.0, n).unwrap()
    }

    fn close(a: Complex<f64>, b: Complex<f64>) -> bool {
        (a - b).norm() < 1e-14
    }

    // RK4 with a tiny step as an independent ODE oracle.
    fn rk4_mode(s: [[f64; 2]; 2], init: [f64; 4], t: f64) -> [f64; 4] {
        let f = |y: [f64; 4]| [y[2], y[3], -(s[0][0] * y[0] + s[0][1] * y[1]), -(s[1][0] * y[0] + s[1][1] * y[1])];
        let n = (t / 1e-4).ceil() as usize;
        let h = t / n as f64;
        let mut y = init;
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
            let k3 = f(std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
            let k4 = f(std::array::from_fn(|i| y[i] + h * k3[i]));
            y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        y
    }

    #[test]
    fn uncoupled_amplitude_examples() {
        let s = uncoupled_amplitudes(1.0, 0.0, 0.0, 0.0, 3);
        assert!(close(s.alpha_coef[0], Complex::new(0.5, 0.0)));
        assert!(close(s.alpha_coef[1], Complex::new(0.5, 0.0)));

        let s = uncoupled_amplitudes(0.0, 3.0, 0.0, 0.0, 3);
        assert!(close(s.alpha_coef[0], Complex::new(0.0, -0.5)));
        assert!(close(s.alpha_coef[1], Complex::new(0.0, 0.5)));

        let s = uncoupled_amplitudes(0.0, 0.0, 0.0, 9.0, 3);
        assert!(close(s.beta_coef[2], Complex::new(0.0, -0.5)));
        assert!(close(s.beta_coef[3], Complex::new(0.0, 0.5)));
    }

    #[test]
    fn uncoupled_amplitudes_reproduce_initial_data() {
        let s = uncoupled_amplitudes(0.3, -1.2, 2.0, 0.7, 4);
        let (a, b) = s.evaluate(0.0);
        let (ad, bd) = s.derivative(0.0);
        assert!((a - 0.3).abs() < 1e-15 && (b - 2.0).abs() < 1e-15);
        assert!((ad + 1.2).abs() < 1e-14 && (bd - 0.7).abs() < 1e-14);
    }

    #[test]
    fn primal_stiffness_of_reference_mode_one() {
        let m = ModeSystem::<f64>::primal(&SystemConfig::reference(7), 1);
        assert_eq!(m.stiffness, [[4.0, 1.0], [2.0, 1.5]]);
        let adj = ModeSystem::<f64>::adjoint(&SystemConfig::reference(7), 1, AdjointMode::Coupled);
        assert_eq!(adj.stiffness, [[4.0, 2.0], [1.0, 1.5]]);
    }

    #[test]
    fn uncoupled_eigenvalues_are_exact() {
        let cfg = uncoupled(6);
        for k in 1..=6 {
            let m = ModeSystem::<f64>::primal(&cfg, k);
            let k2 = (k * k) as f64;
            assert_eq!(m.eigenvalues[0], Complex::new(k2, 0.0));
            assert_eq!(m.eigenvalues[1], Complex::new(k2 * k2, 0.0));
            assert!(m.diagonalizable);
        }
    }

    #[test]
    fn string_mode_only_excites_string_frequency() {
        let s = solve_mode(&uncoupled(3), 2, [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(close(s.rates[0], Complex::new(0.0, 2.0)));
        assert!(close(s.rates[1], Complex::new(0.0, -2.0)));
        for t in [0.0, 0.4, 3.1, 9.0] {
            let (a, b) = s.evaluate(t);
            assert_eq!(b, 0.0);
            assert!((a - (2.0 * t).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let s = solve_mode(&SystemConfig::reference(7), 4, [0.0; 4]).unwrap();
        for t in [0.0, 1.0, 5.0] {
            assert_eq!(s.evaluate(t), (0.0, 0.0));
        }
        let sols = vec![s; 1];
        assert_eq!(adjoint_traces(&SystemConfig::reference(7), &sols, 2.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn coupled_solution_matches_ode_oracle() {
        let cfg = SystemConfig::reference(7);
        for (k, mode) in [(1, AdjointMode::Coupled), (2, AdjointMode::PrimalCoupling), (3, AdjointMode::Coupled)] {
            let init = [0.7, -0.4, 1.3, 0.2];
            let sys = ModeSystem::<f64>::adjoint(&cfg, k, mode);
            let sol = sys.solve(init).unwrap();
            let y = rk4_mode(sys.stiffness, init, 2.5);
            let (a, b) = sol.evaluate(2.5);
            let (ad, bd) = sol.derivative(2.5);
            for (got, want) in [(a, y[0]), (b, y[1]), (ad, y[2]), (bd, y[3])] {
                assert!((got - want).abs() < 1e-9, "k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn trace_examples_match_closed_forms() {
        let cfg = uncoupled(3);
        let mut init = ModalState::zeros(3);
        init.a[0] = 1.0;
        let sols = solve_all(&cfg, &init, AdjointMode::Coupled).unwrap();
        let mut init2 = ModalState::zeros(3);
        init2.b_dot[1] = 4.0;
        let sols2 = solve_all(&cfg, &init2, AdjointMode::Coupled).unwrap();
        for t in [0.0, 0.3, 1.7, 6.0] {
            let (u1, u2) = adjoint_traces(&cfg, &sols, t).unwrap();
            assert!((u1 - t.cos() * cfg.xi().sin()).abs() < 1e-14);
            assert_eq!(u2, 0.0);
            let (u1, u2) = adjoint_traces(&cfg, &sols2, t).unwrap();
            assert_eq!(u1, 0.0);
            assert!((u2 - (4.0 * t).sin() * (2.0 * cfg.eta()).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn complex_pair_and_growth_warning() {
        // b*c < 0 with p = q gives a complex conjugate pair
        let sys = ModeSystem::<f64>::from_stiffness(1, [[2.0, 1.0], [-1.0, 2.0]]);
        assert!(sys.eigenvalues[0].im.abs() > 0.9);
        let sol = sys.solve([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(sol.warning().is_some());
        let y = rk4_mode(sys.stiffness, [1.0, 0.0, 0.0, 0.0], 1.5);
        let (a, b) = sol.evaluate(1.5);
        assert!((a - y[0]).abs() < 1e-9 && (b - y[1]).abs() < 1e-9);

        // negative stiffness: real exponential growth
        let sys = ModeSystem::<f64>::from_stiffness(1, [[-1.0, 0.0], [0.0, 4.0]]);
        let sol = sys.solve([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((sol.max_growth() - 1.0).abs() < 1e-15);
        assert!((sol.evaluate(2.0).0 - 2f64.cosh()).abs() < 1e-12);
    }

    #[test]
    fn defective_mode_is_rejected() {
        let sys = ModeSystem::<f64>::from_stiffness(1, [[2.0, 1.0], [0.0, 2.0]]);
        assert!(!sys.diagonalizable);
        assert!(matches!(sys.solve([1.0, 0.0, 0.0, 0.0]), Err(Error::NonDiagonalizable { .. })));
        let sys = ModeSystem::<f64>::from_stiffness(1, [[0.0, 0.0], [0.0, 4.0]]);
        assert!(matches!(sys.solve([1.0, 0.0, 0.0, 0.0]), Err(Error::NonDiagonalizable { .. })));
    }

    #[test]
    fn double_double_agrees_with_f64() {
        let cfg = SystemConfig::reference(7);
        let s64 = ModeSystem::<f64>::adjoint(&cfg, 5, AdjointMode::Coupled).solve([1.0, 2.0, 3.0, 4.0]).unwrap();
        let sdd =
            ModeSystem::<Dd>::adjoint(&cfg, 5, AdjointMode::Coupled).solve([1.0, 2.0, 3.0, 4.0].map(Dd::from)).unwrap();
        let (a, b) = sdd.evaluate(Dd::from(3.3));
        let (a2, b2) = s64.evaluate(3.3);
        assert!((a.to_f64() - a2).abs() < 1e-12 && (b.to_f64() - b2).abs() < 1e-12);
    }

    fn random_init() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(-2.0..2.0f64)
    }

    proptest! {
        #[test]
        fn energy_is_conserved_when_symmetric(init in random_init(), k in 1usize..6, c in -1.5..1.5f64) {
            let cfg = SystemConfig::new(Coupling::new(3.0, c, c, 0.5), SQRT_2 / 3.0, SQRT_2 / 4.0, 6).unwrap();
            let s = solve_mode(&cfg, k, init).unwrap();
            let k2 = (k * k) as f64;
            let energy = |t: f64| {
                let (a, b) = s.evaluate(t);
                let (ad, bd) = s.derivative(t);
                ad * ad + bd * bd + (k2 + 3.0) * a * a + (k2 * k2 + 0.5) * b * b + 2.0 * c * a * b
            };
            let e0 = energy(0.0);
            for i in 1..=20 {
                let e = energy(0.5 * i as f64);
                prop_assert!((e - e0).abs() <= 1e-10 * e0.max(1e-300));
            }
        }

        #[test]
        fn uncoupled_frequencies_are_pure(k in 1usize..8) {
            let cfg = uncoupled(8);
            let s = solve_mode(&cfg, k, [1.0, 1.0, 1.0, 1.0]).unwrap();
            let k2 = (k * k) as f64;
            let want = [k2.sqrt(), -k2.sqrt(), k2, -k2];
            for j in 0..4 {
                prop_assert!(s.rates[j].re.abs() <= 1e-12);
                prop_assert!((s.rates[j].im - want[j]).abs() <= 1e-12 * k2);
            }
        }

        #[test]
        fn solve_is_linear(x in random_init(), y in random_init(), k in 1usize..8, t in 0.0..10.0f64) {
            let cfg = SystemConfig::reference(7);
            let k = k.min(7);
            let sum: [f64; 4] = std::array::from_fn(|i| x[i] + 2.0 * y[i]);
            let (a1, b1) = solve_mode(&cfg, k, x).unwrap().evaluate(t);
            let (a2, b2) = solve_mode(&cfg, k, y).unwrap().evaluate(t);
            let (a3, b3) = solve_mode(&cfg, k, sum).unwrap().evaluate(t);
            prop_assert!((a3 - a1 - 2.0 * a2).abs() <= 1e-12 * (1.0 + a3.abs()));
            prop_assert!((b3 - b1 - 2.0 * b2).abs() <= 1e-12 * (1.0 + b3.abs()));
        }

        #[test]
        fn solver_agrees_with_closed_form_uncoupled(init in random_init(), k in 1usize..8) {
            let cfg = uncoupled(7);
            let k = k.min(7);
            let s = solve_mode(&cfg, k, init).unwrap();
            let u = uncoupled_amplitudes(init[0], init[2], init[1], init[3], k);
            for i in 0..100 {
                let t = 0.1 * i as f64 + 0.0137;
                let (a, b) = s.evaluate(t);
                let (a2, b2) = u.evaluate(t);
                prop_assert!((a - a2).abs() <= 1e-12 * (1.0 + a2.abs()));
                prop_assert!((b - b2).abs() <= 1e-12 * (1.0 + b2.abs()));
            }
        }
    }
}
