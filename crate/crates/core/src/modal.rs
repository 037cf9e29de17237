//! Modal state representation, weighted spaces `D^alpha_beta` and point traces.
//!
//! Coefficients are stored against plain `sin(kx)`; the `L^2(0, pi)` mass of one
//! such mode is `pi/2`.

use crate::error::{Error, Result};

/// `|sin(k*beta)|` below this flags mode `k` as invisible at `beta`.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// The four coupling constants of the string-beam system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    /// Zeroth-order term of the string equation.
    pub a: f64,
    /// String displacement feeding the beam equation.
    pub b: f64,
    /// Beam displacement feeding the string equation.
    pub c: f64,
    /// Zeroth-order term of the beam equation.
    pub d: f64,
}

impl Coupling {
    pub const NONE: Coupling = Coupling { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Coupling { a, b, c, d }
    }
}

/// System parameters plus the point weights `sin(k*xi)`, `sin(k*eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    coupling: Coupling,
    xi: f64,
    eta: f64,
    modes: usize,
    xi_weights: Vec<f64>,
    eta_weights: Vec<f64>,
}

impl SystemConfig {
    pub fn new(coupling: Coupling, xi: f64, eta: f64, modes: usize) -> Result<Self> {
        let Coupling { a, b, c, d } = coupling;
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("coupling constants must be finite".into()));
        }
        for (name, p) in [("xi", xi), ("eta", eta)] {
            if !(p > 0.0 && p < std::f64::consts::PI) {
                return Err(Error::InvalidParameter(format!("{name} = {p} must lie in (0, pi)")));
            }
        }
        if modes == 0 {
            return Err(Error::InvalidParameter("truncation order N must be at least 1".into()));
        }
        Ok(SystemConfig {
            coupling,
            xi,
            eta,
            modes,
            xi_weights: point_weights(xi, modes),
            eta_weights: point_weights(eta, modes),
        })
    }

    /// `A = 3, B = 2, C = 1, D = 1/2`, `xi = sqrt(2)/3`, `eta = sqrt(2)/4`.
    pub fn reference(modes: usize) -> Self {
        let s2 = std::f64::consts::SQRT_2;
        SystemConfig::new(Coupling::new(3.0, 2.0, 1.0, 0.5), s2 / 3.0, s2 / 4.0, modes)
            .expect("reference configuration is valid")
    }

    pub fn with_coupling(&self, coupling: Coupling) -> Result<Self> {
        SystemConfig::new(coupling, self.xi, self.eta, self.modes)
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    /// Truncation order `N`.
    pub fn modes(&self) -> usize {
        self.modes
    }
    /// `m_k = sin(k*xi)`, `k = 1..=N`.
    pub fn xi_weights(&self) -> &[f64] {
        &self.xi_weights
    }
    /// `n_k = sin(k*eta)`, `k = 1..=N`.
    pub fn eta_weights(&self) -> &[f64] {
        &self.eta_weights
    }
    /// Dimension of the first-order state, `4N`.
    pub fn state_dim(&self) -> usize {
        4 * self.modes
    }
}

fn point_weights(point: f64, modes: usize) -> Vec<f64> {
    (1..=modes).map(|k| (k as f64 * point).sin()).collect()
}

/// Modal coefficients of `(y1, y1_t, y2, y2_t)`.
///
/// The flat vector layout used by matrices is `[a | b | a_dot | b_dot]`, which
/// is the `[u10 | u20 | u11 | u21]` ordering of the Gramian.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub a: Vec<f64>,
    pub a_dot: Vec<f64>,
    pub b: Vec<f64>,
    pub b_dot: Vec<f64>,
}

impl ModalState {
    pub fn new(a: Vec<f64>, a_dot: Vec<f64>, b: Vec<f64>, b_dot: Vec<f64>) -> Result<Self> {
        let n = a.len();
        if a_dot.len() != n || b.len() != n || b_dot.len() != n {
            return Err(Error::Dimension(format!(
                "state components have lengths {}, {}, {}, {}",
                n,
                a_dot.len(),
                b.len(),
                b_dot.len()
            )));
        }
        let state = ModalState { a, a_dot, b, b_dot };
        if !state.is_finite() {
            return Err(Error::InvalidParameter("state has non-finite entries".into()));
        }
        Ok(state)
    }

    pub fn zeros(modes: usize) -> Self {
        ModalState { a: vec![0.0; modes], a_dot: vec![0.0; modes], b: vec![0.0; modes], b_dot: vec![0.0; modes] }
    }

    /// Smooth data exciting every mode: `a_k = 1/k`, `b_k = 1/k^2`, zero velocities.
    pub fn smooth_default(modes: usize) -> Self {
        let mut s = ModalState::zeros(modes);
        for k in 1..=modes {
            s.a[k - 1] = 1.0 / k as f64;
            s.b[k - 1] = 1.0 / (k * k) as f64;
        }
        s
    }

    pub fn modes(&self) -> usize {
        self.a.len()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.modes());
        v.extend_from_slice(&self.a);
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.a_dot);
        v.extend_from_slice(&self.b_dot);
        v
    }

    pub fn from_vector(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(4) || v.is_empty() {
            return Err(Error::Dimension(format!("state vector length {} is not 4N", v.len())));
        }
        let n = v.len() / 4;
        ModalState::new(v[..n].to_vec(), v[2 * n..3 * n].to_vec(), v[n..2 * n].to_vec(), v[3 * n..].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        [&self.a, &self.a_dot, &self.b, &self.b_dot].iter().all(|c| c.iter().all(|x| x.is_finite()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let f = |c: &Vec<f64>| c.iter().map(|x| x * factor).collect();
        ModalState { a: f(&self.a), a_dot: f(&self.a_dot), b: f(&self.b), b_dot: f(&self.b_dot) }
    }

    pub fn difference(&self, other: &ModalState) -> Result<Self> {
        if other.modes() != self.modes() {
            return Err(Error::Dimension("states have different truncation orders".into()));
        }
        let f = |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(p, q)| p - q).collect();
        Ok(ModalState {
            a: f(&self.a, &other.a),
            a_dot: f(&self.a_dot, &other.a_dot),
            b: f(&self.b, &other.b),
            b_dot: f(&self.b_dot, &other.b_dot),
        })
    }
}

/// One factor `D^alpha_beta` (or its dual) of a product space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSpaceSpec {
    pub alpha: f64,
    pub beta: f64,
    pub dual: bool,
}

impl WeightedSpaceSpec {
    pub fn direct(alpha: f64, beta: f64) -> Self {
        WeightedSpaceSpec { alpha, beta, dual: false }
    }

    pub fn dual(alpha: f64, beta: f64) -> Self {
        WeightedSpaceSpec { alpha, beta, dual: true }
    }

    pub fn dual_of(self) -> Self {
        WeightedSpaceSpec { dual: !self.dual, ..self }
    }

    /// Squared-norm weight of mode `k`: `k^(2a) sin^2(k b)` or its reciprocal.
    pub fn weight(&self, k: usize) -> Result<f64> {
        let s = (k as f64 * self.beta).sin();
        let kp = (k as f64).powf(2.0 * self.alpha);
        if self.dual {
            if s.abs() < DEGENERACY_THRESHOLD {
                return Err(Error::DegenerateWeight { mode: k, point: self.beta, value: s.abs() });
            }
            Ok(1.0 / (kp * s * s))
        } else {
            Ok(kp * s * s)
        }
    }
}

pub fn weighted_norm_squared(c: &[f64], spec: &WeightedSpaceSpec) -> Result<f64> {
    c.iter().enumerate().map(|(i, &ck)| spec.weight(i + 1).map(|w| w * ck * ck)).sum()
}

/// `sqrt(sum_k w_k |c_k|^2)` for the weights of `spec`.
pub fn weighted_norm(c: &[f64], spec: &WeightedSpaceSpec) -> Result<f64> {
    weighted_norm_squared(c, spec).map(f64::sqrt)
}

/// Product space for `(y1, y1_t, y2, y2_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpaceSpec {
    pub string_pos: WeightedSpaceSpec,
    pub string_vel: WeightedSpaceSpec,
    pub beam_pos: WeightedSpaceSpec,
    pub beam_vel: WeightedSpaceSpec,
}

impl StateSpaceSpec {
    /// `(D^0_xi x D^-1_xi)' x (D^0_eta x D^-2_eta)'`, the space of the decay estimate.
    pub fn decay_space(xi: f64, eta: f64) -> Self {
        StateSpaceSpec {
            string_pos: WeightedSpaceSpec::dual(0.0, xi),
            string_vel: WeightedSpaceSpec::dual(-1.0, xi),
            beam_pos: WeightedSpaceSpec::dual(0.0, eta),
            beam_vel: WeightedSpaceSpec::dual(-2.0, eta),
        }
    }

    /// `D^0_xi x D^1_xi x D^0_eta x D^2_eta`, used for the plotted energies.
    pub fn plot_space(xi: f64, eta: f64) -> Self {
        StateSpaceSpec {
            string_pos: WeightedSpaceSpec::direct(0.0, xi),
            string_vel: WeightedSpaceSpec::direct(1.0, xi),
            beam_pos: WeightedSpaceSpec::direct(0.0, eta),
            beam_vel: WeightedSpaceSpec::direct(2.0, eta),
        }
    }

    /// `D^0_xi x D^-1_xi x D^0_eta x D^-2_eta` on adjoint data, the right-hand
    /// side of the observability estimate.
    pub fn observation_space(xi: f64, eta: f64) -> Self {
        StateSpaceSpec {
            string_pos: WeightedSpaceSpec::direct(0.0, xi),
            string_vel: WeightedSpaceSpec::direct(-1.0, xi),
            beam_pos: WeightedSpaceSpec::direct(0.0, eta),
            beam_vel: WeightedSpaceSpec::direct(-2.0, eta),
        }
    }

    /// Per-coordinate squared-norm weights in `[a | b | a_dot | b_dot]` order.
    pub fn diagonal(&self, modes: usize) -> Result<Vec<f64>> {
        let mut d = Vec::with_capacity(4 * modes);
        for spec in [&self.string_pos, &self.beam_pos, &self.string_vel, &self.beam_vel] {
            for k in 1..=modes {
                d.push(spec.weight(k)?);
            }
        }
        Ok(d)
    }
}

pub fn state_norm_squared(s: &ModalState, spec: &StateSpaceSpec) -> Result<f64> {
    Ok(weighted_norm_squared(&s.a, &spec.string_pos)?
        + weighted_norm_squared(&s.a_dot, &spec.string_vel)?
        + weighted_norm_squared(&s.b, &spec.beam_pos)?
        + weighted_norm_squared(&s.b_dot, &spec.beam_vel)?)
}

pub fn state_norm(s: &ModalState, spec: &StateSpaceSpec) -> Result<f64> {
    state_norm_squared(s, spec).map(f64::sqrt)
}

/// `sum_k c_k sin(k x)`.
pub fn trace(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().map(|(i, ck)| ck * ((i + 1) as f64 * x).sin()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeWeights {
    pub mode: usize,
    pub xi: f64,
    pub eta: f64,
}

/// Magnitudes `|sin(k*xi)|`, `|sin(k*eta)|` for every retained mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    pub modes: Vec<ModeWeights>,
    pub min_xi: f64,
    pub min_eta: f64,
    pub flagged_xi: Vec<usize>,
    pub flagged_eta: Vec<usize>,
}

impl DegeneracyReport {
    pub fn is_degenerate(&self) -> bool {
        !self.flagged_xi.is_empty() || !self.flagged_eta.is_empty()
    }

    /// Union of flagged modes, sorted.
    pub fn flagged(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.flagged_xi.iter().chain(&self.flagged_eta).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn to_error(&self) -> Option<Error> {
        self.is_degenerate().then(|| Error::DegenerateConfiguration {
            xi_modes: self.flagged_xi.clone(),
            eta_modes: self.flagged_eta.clone(),
        })
    }
}

pub fn degeneracy_profile(cfg: &SystemConfig) -> DegeneracyReport {
    let modes: Vec<ModeWeights> = (1..=cfg.modes())
        .map(|k| ModeWeights { mode: k, xi: cfg.xi_weights()[k - 1].abs(), eta: cfg.eta_weights()[k - 1].abs() })
        .collect();
    let min_xi = modes.iter().map(|m| m.xi).fold(f64::INFINITY, f64::min);
    let min_eta = modes.iter().map(|m| m.eta).fold(f64::INFINITY, f64::min);
    let flagged =
        |f: fn(&ModeWeights) -> f64| modes.iter().filter(|m| f(m) < DEGENERACY_THRESHOLD).map(|m| m.mode).collect();
    DegeneracyReport { flagged_xi: flagged(|m| m.xi), flagged_eta: flagged(|m| m.eta), modes, min_xi, min_eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    const XI: f64 = SQRT_2 / 3.0;
    const ETA: f64 = SQRT_2 / 4.0;

    #[test]
    fn config_rejects_points_outside_interval() {
        assert!(SystemConfig::new(Coupling::NONE, 0.0, 1.0, 3).is_err());
        assert!(SystemConfig::new(Coupling::NONE, 1.0, std::f64::consts::PI, 3).is_err());
        assert!(SystemConfig::new(Coupling::NONE, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn config_weights_are_plain_sines() {
        let cfg = SystemConfig::reference(7);
        for k in 1..=7 {
            assert_eq!(cfg.xi_weights()[k - 1], (k as f64 * XI).sin());
            assert_eq!(cfg.eta_weights()[k - 1], (k as f64 * ETA).sin());
        }
    }

    #[test]
    fn single_mode_norm_is_sine() {
        let n = weighted_norm(&[1.0], &WeightedSpaceSpec::direct(0.0, XI)).unwrap();
        assert_eq!(n, XI.sin());
        assert_eq!(weighted_norm(&[0.0; 5], &WeightedSpaceSpec::dual(3.0, XI)).unwrap(), 0.0);
    }

    #[test]
    fn two_mode_norm_matches_direct_sum() {
        let got = weighted_norm(&[1.0, 1.0], &WeightedSpaceSpec::direct(-1.0, XI)).unwrap();
        let want = (XI.sin().powi(2) + 0.25 * (2.0 * XI).sin().powi(2)).sqrt();
        assert_relative_eq!(got, want, max_relative = 1e-15);
    }

    #[test]
    fn dual_norm_rejects_degenerate_point() {
        let err = weighted_norm(&[0.0, 1.0], &WeightedSpaceSpec::dual(0.0, FRAC_PI_2)).unwrap_err();
        assert!(matches!(err, Error::DegenerateWeight { mode: 2, .. }));
        // direct weights never fail
        assert!(weighted_norm(&[0.0, 1.0], &WeightedSpaceSpec::direct(0.0, FRAC_PI_2)).is_ok());
    }

    #[test]
    fn state_norm_single_entries() {
        let mut s = ModalState::zeros(3);
        assert_eq!(state_norm(&s, &StateSpaceSpec::decay_space(XI, ETA)).unwrap(), 0.0);
        s.a[0] = 1.0;
        let got = state_norm(&s, &StateSpaceSpec::decay_space(XI, ETA)).unwrap();
        assert_relative_eq!(got, 1.0 / XI.sin().abs(), max_relative = 1e-15);

        let mut s = ModalState::zeros(3);
        s.b_dot[1] = 1.0;
        let got = state_norm(&s, &StateSpaceSpec::plot_space(XI, ETA)).unwrap();
        assert_relative_eq!(got, 4.0 * (2.0 * ETA).sin().abs(), max_relative = 1e-15);
    }

    #[test]
    fn trace_values() {
        assert_relative_eq!(trace(&[1.0], FRAC_PI_2), 1.0);
        assert_eq!(trace(&[0.3, -2.0, 5.0], 0.0), 0.0);
        let want = XI.sin() + 0.5 * (2.0 * XI).sin();
        assert_relative_eq!(trace(&[1.0, 0.5], XI), want, max_relative = 1e-15);
    }

    #[test]
    fn degeneracy_flags_rational_points() {
        let cfg = SystemConfig::new(Coupling::NONE, FRAC_PI_2, ETA, 2).unwrap();
        let r = degeneracy_profile(&cfg);
        assert_eq!(r.flagged_xi, vec![2]);
        assert!(r.min_xi < 1e-15);

        let cfg = SystemConfig::new(Coupling::NONE, FRAC_PI_2, ETA, 7).unwrap();
        assert_eq!(degeneracy_profile(&cfg).flagged(), vec![2, 4, 6]);

        let r = degeneracy_profile(&SystemConfig::reference(7));
        assert!(!r.is_degenerate());
        assert!(r.min_xi > 0.0 && r.min_eta > 0.0);
        let r = degeneracy_profile(&SystemConfig::reference(1));
        assert!(!r.is_degenerate());
    }

    #[test]
    fn vector_layout_roundtrip() {
        let s = ModalState::new(vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0], vec![7.0, 8.0]).unwrap();
        let v = s.to_vector();
        assert_eq!(v, vec![1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
        assert_eq!(ModalState::from_vector(&v).unwrap(), s);
        assert!(ModalState::new(vec![1.0], vec![], vec![1.0], vec![1.0]).is_err());
        assert!(ModalState::new(vec![f64::NAN], vec![0.0], vec![0.0], vec![0.0]).is_err());
    }

    fn coeffs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, 1..12)
    }

    fn spec() -> impl Strategy<Value = WeightedSpaceSpec> {
        (-2.0..2.0f64, prop::sample::select(vec![XI, ETA, 1.0, 2.5]), any::<bool>())
            .prop_map(|(alpha, beta, dual)| WeightedSpaceSpec { alpha, beta, dual })
    }

    proptest! {
        #[test]
        fn norm_is_homogeneous(c in coeffs(), s in spec(), lambda in -5.0..5.0f64) {
            let scaled: Vec<f64> = c.iter().map(|x| lambda * x).collect();
            let lhs = weighted_norm(&scaled, &s).unwrap();
            let rhs = lambda.abs() * weighted_norm(&c, &s).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn dual_pairing_bounds_l2(c in coeffs(), s in spec()) {
            let l2: f64 = c.iter().map(|x| x * x).sum();
            let prod = weighted_norm(&c, &s).unwrap() * weighted_norm(&c, &s.dual_of()).unwrap();
            prop_assert!(prod >= l2 * (1.0 - 1e-12));
        }

        #[test]
        fn dual_pairing_is_tight_on_single_modes(k in 0usize..10, x in 0.1..3.0f64, s in spec()) {
            let mut c = vec![0.0; 10];
            c[k] = x;
            let prod = weighted_norm(&c, &s).unwrap() * weighted_norm(&c, &s.dual_of()).unwrap();
            prop_assert!((prod - x * x).abs() <= 1e-10 * x * x);
        }

        #[test]
        fn trace_is_linear(c in coeffs(), x in 0.0..std::f64::consts::PI) {
            let d: Vec<f64> = c.iter().map(|v| 0.5 - v).collect();
            let sum: Vec<f64> = c.iter().zip(&d).map(|(p, q)| p + q).collect();
            let lhs = trace(&sum, x);
            let rhs = trace(&c, x) + trace(&d, x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn state_norm_is_sum_of_components(
            a in prop::collection::vec(-3.0..3.0f64, 4),
            ad in prop::collection::vec(-3.0..3.0f64, 4),
            b in prop::collection::vec(-3.0..3.0f64, 4),
            bd in prop::collection::vec(-3.0..3.0f64, 4),
        ) {
            let st = StateSpaceSpec::decay_space(XI, ETA);
            let s = ModalState::new(a.clone(), ad.clone(), b.clone(), bd.clone()).unwrap();
            let total = state_norm_squared(&s, &st).unwrap();
            let parts = weighted_norm_squared(&a, &st.string_pos).unwrap()
                + weighted_norm_squared(&ad, &st.string_vel).unwrap()
                + weighted_norm_squared(&b, &st.beam_pos).unwrap()
                + weighted_norm_squared(&bd, &st.beam_vel).unwrap();
            prop_assert_eq!(total, parts);
        }
    }
}
