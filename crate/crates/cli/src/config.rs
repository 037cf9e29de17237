//! Flat `key = value` run configurations.
//!
//! Lines are `key = value`; `#` starts a comment. Every key may appear at most
//! once and unknown keys are rejected. Numeric values accept plain decimals and
//! small expressions over `pi` and `sqrt2`, e.g. `sqrt2/3`, `2pi+0.5`,
//! `pi/2`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pointstab::{
    AdjointMode, Coupling, GramianSpec, IntegrationMethod, ModalState, NaturalEnergyForm, StateSpaceSpec, SystemConfig,
};

use crate::error::CliError;

const KEYS: &[&str] = &[
    "N",
    "A",
    "B",
    "C",
    "D",
    "xi",
    "eta",
    "omega",
    "S",
    "weight_kind",
    "T",
    "t_end",
    "dt",
    "integrator",
    "energy_space",
    "natural_energy",
    "adjoint_mode",
    "sign",
    "output_dir",
    "initial",
    "a",
    "b",
    "adot",
    "bdot",
    "target",
    "fit_start",
    "fit_end",
];

const REQUIRED: &[&str] = &["N", "A", "B", "C", "D", "xi", "eta"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightChoice {
    PureExponential,
    Komornik,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergySpace {
    /// Space of the decay estimate.
    Decay,
    /// Space of the plotted energies.
    Plot,
}

impl EnergySpace {
    pub fn name(self) -> &'static str {
        match self {
            EnergySpace::Decay => "decay",
            EnergySpace::Plot => "plot",
        }
    }

    pub fn spec(self, cfg: &SystemConfig) -> StateSpaceSpec {
        match self {
            EnergySpace::Decay => StateSpaceSpec::decay_space(cfg.xi(), cfg.eta()),
            EnergySpace::Plot => StateSpaceSpec::plot_space(cfg.xi(), cfg.eta()),
        }
    }
}

/// Fixed feedback sign, or the one giving a stable closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignChoice {
    Auto,
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Zero,
    Initial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub omega: Option<f64>,
    /// Gramian horizon; `None` means the default for the weight.
    pub s: Option<f64>,
    pub weight_kind: WeightChoice,
    /// Controllability horizon, also the exponential part of the `e_omega` weight.
    pub t: f64,
    pub t_end: f64,
    pub dt: f64,
    pub integrator: IntegrationMethod,
    pub energy_space: EnergySpace,
    pub natural_form: NaturalEnergyForm,
    pub adjoint_mode: AdjointMode,
    pub sign: SignChoice,
    pub output_dir: Option<PathBuf>,
    pub initial: ModalState,
    pub initial_name: String,
    pub target: Target,
    pub fit_start: f64,
    pub fit_end: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {}: unknown key '{key}'", no + 1)));
            }
            if value.is_empty() {
                return Err(CliError::Config(format!("line {}: empty value for '{key}'", no + 1)));
            }
            if raw.insert(key, (no + 1, value)).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key '{key}'", no + 1)));
            }
        }
        for key in REQUIRED {
            if !raw.contains_key(key) {
                return Err(CliError::Config(format!("missing required key '{key}'")));
            }
        }
        Fields { raw }.build()
    }

    pub fn with_omega(mut self, omega: f64) -> Result<Self, CliError> {
        check_positive("omega", omega)?;
        self.omega = Some(omega);
        Ok(self)
    }

    pub fn omega(&self) -> Result<f64, CliError> {
        self.omega.ok_or_else(|| CliError::Config("missing required key 'omega' (or pass --omega)".into()))
    }

    /// Weight of the feedback Gramian.
    pub fn gramian_spec(&self) -> Result<GramianSpec, CliError> {
        let omega = self.omega()?;
        let spec = match self.weight_kind {
            WeightChoice::PureExponential => match self.s {
                Some(s) => GramianSpec::pure_exponential_with_horizon(omega, s),
                None => GramianSpec::pure_exponential(omega),
            },
            WeightChoice::Komornik => GramianSpec::komornik(omega, self.t),
        };
        spec.map_err(CliError::from)
    }

    pub fn target_state(&self) -> ModalState {
        match self.target {
            Target::Zero => ModalState::zeros(self.system.modes()),
            Target::Initial => self.initial.clone(),
        }
    }
}

struct Fields<'a> {
    raw: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Fields<'a> {
    fn str(&self, key: &str) -> Option<(usize, &'a str)> {
        self.raw.get(key).copied()
    }

    fn num(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.str(key) {
            None => Ok(None),
            Some((line, v)) => eval(v).map(Some).map_err(|e| CliError::Config(format!("line {line}: '{key}': {e}"))),
        }
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>, CliError> {
        let Some((line, v)) = self.str(key) else { return Ok(None) };
        let items = v
            .split(',')
            .map(|s| eval(s.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("line {line}: '{key}': {e}")))?;
        if items.len() != n {
            return Err(CliError::Config(format!("line {line}: '{key}' has {} entries, N = {n}", items.len())));
        }
        Ok(Some(items))
    }

    fn word<T>(&self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>, allowed: &str) -> Result<T, CliError> {
        match self.str(key) {
            None => Ok(default),
            Some((line, v)) => parse(v)
                .ok_or_else(|| CliError::Config(format!("line {line}: '{key}' must be one of {allowed}, got '{v}'"))),
        }
    }

    fn build(self) -> Result<RunConfig, CliError> {
        let (line, n_raw) = self.str("N").expect("required");
        let modes: usize = n_raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| CliError::Config(format!("line {line}: N must be a positive integer, got '{n_raw}'")))?;
        let need = |k: &str| -> Result<f64, CliError> { Ok(self.num(k)?.expect("required")) };
        let coupling = Coupling::new(need("A")?, need("B")?, need("C")?, need("D")?);
        let system = SystemConfig::new(coupling, need("xi")?, need("eta")?, modes)?;

        let omega = self.num("omega")?;
        if let Some(w) = omega {
            check_positive("omega", w)?;
        }
        let s = self.num("S")?;
        if let Some(s) = s {
            check_positive("S", s)?;
        }
        let weight_kind = self.word(
            "weight_kind",
            WeightChoice::PureExponential,
            |v| match v {
                "pure_exponential" => Some(WeightChoice::PureExponential),
                "komornik_eomega" => Some(WeightChoice::Komornik),
                _ => None,
            },
            "pure_exponential, komornik_eomega",
        )?;
        if weight_kind == WeightChoice::Komornik && s.is_some() {
            return Err(CliError::Config("S is fixed by T and omega for komornik_eomega; remove S".into()));
        }
        let t = self.num_or("T", 2.0 * std::f64::consts::PI + 0.5)?;
        check_positive("T", t)?;
        let t_end = self.num_or("t_end", 10.0)?;
        check_positive("t_end", t_end)?;
        let dt = self.num_or("dt", 1e-3)?;
        check_positive("dt", dt)?;
        if dt > t_end {
            return Err(CliError::Config(format!("dt = {dt} exceeds t_end = {t_end}")));
        }
        let fit_start = self.num_or("fit_start", 1.0)?;
        let fit_end = self.num_or("fit_end", 8.0)?;
        if !(fit_start >= 0.0 && fit_end > fit_start) {
            return Err(CliError::Config(format!("need 0 <= fit_start < fit_end (got {fit_start}, {fit_end})")));
        }

        let integrator =
            self.word("integrator", IntegrationMethod::ExactLti, IntegrationMethod::parse, "exact_lti, rk4")?;
        let energy_space = self.word(
            "energy_space",
            EnergySpace::Decay,
            |v| match v {
                "decay" => Some(EnergySpace::Decay),
                "plot" => Some(EnergySpace::Plot),
                _ => None,
            },
            "decay, plot",
        )?;
        let natural_form = self.word(
            "natural_energy",
            NaturalEnergyForm::KineticElastic,
            |v| match v {
                "kinetic_elastic" => Some(NaturalEnergyForm::KineticElastic),
                "full" => Some(NaturalEnergyForm::Full),
                _ => None,
            },
            "kinetic_elastic, full",
        )?;
        let adjoint_mode = self.word(
            "adjoint_mode",
            AdjointMode::default(),
            AdjointMode::parse,
            "coupled, primal-coupling, paper-uncoupled",
        )?;
        let sign = self.word(
            "sign",
            SignChoice::Auto,
            |v| match v {
                "auto" => Some(SignChoice::Auto),
                "negative" | "-1" => Some(SignChoice::Negative),
                "positive" | "+1" | "1" => Some(SignChoice::Positive),
                _ => None,
            },
            "auto, negative, positive",
        )?;
        let target = self.word(
            "target",
            Target::Zero,
            |v| match v {
                "zero" => Some(Target::Zero),
                "initial" => Some(Target::Initial),
                _ => None,
            },
            "zero, initial",
        )?;
        let output_dir = self.str("output_dir").map(|(_, v)| PathBuf::from(v));

        let initial_name = self.str("initial").map(|(_, v)| v).unwrap_or("smooth");
        let explicit = ["a", "b", "adot", "bdot"].iter().any(|k| self.raw.contains_key(k));
        let initial = match initial_name {
            "explicit" => {
                let zero = || vec![0.0; modes];
                ModalState::new(
                    self.list("a", modes)?.unwrap_or_else(zero),
                    self.list("adot", modes)?.unwrap_or_else(zero),
                    self.list("b", modes)?.unwrap_or_else(zero),
                    self.list("bdot", modes)?.unwrap_or_else(zero),
                )?
            }
            _ if explicit => {
                return Err(CliError::Config("coefficient lists a, b, adot, bdot require initial = explicit".into()))
            }
            "smooth" => ModalState::smooth_default(modes),
            "zero" => ModalState::zeros(modes),
            other => {
                return Err(CliError::Config(format!("'initial' must be one of smooth, zero, explicit, got '{other}'")))
            }
        };

        Ok(RunConfig {
            system,
            omega,
            s,
            weight_kind,
            t,
            t_end,
            dt,
            integrator,
            energy_space,
            natural_form,
            adjoint_mode,
            sign,
            output_dir,
            initial,
            initial_name: initial_name.to_string(),
            target,
            fit_start,
            fit_end,
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Evaluates `+ - * /` over decimals, `pi`, `sqrt2` and parentheses. A number
/// directly followed by a constant multiplies it (`2pi`).
pub fn eval(src: &str) -> Result<f64, String> {
    let mut p = Parser { s: src.as_bytes(), i: 0 };
    let v = p.sum()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(format!("unexpected '{}' in '{src}'", &src[p.i..]));
    }
    if !v.is_finite() {
        return Err(format!("'{src}' is not finite"));
    }
    Ok(v)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.i += 1;
            let r = self.product()?;
            v = if op == b'+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.i += 1;
            let r = self.unary()?;
            v = if op == b'*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'-') => {
                self.i += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.i += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some(b'(') => {
                self.i += 1;
                let v = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err("missing ')'".into());
                }
                self.i += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                // implicit product with a trailing constant: 2pi, 3sqrt2
                if self.s.get(self.i).is_some_and(|c| c.is_ascii_alphabetic()) {
                    Ok(v * self.constant()?)
                } else {
                    Ok(v)
                }
            }
            Some(_) => self.constant(),
            None => Err("expected a value".into()),
        }
    }

    fn number(&mut self) -> Result<f64, String> {
        let start = self.i;
        let s = self.s;
        let digits = |i: &mut usize| {
            while *i < s.len() && s[*i].is_ascii_digit() {
                *i += 1;
            }
        };
        digits(&mut self.i);
        if self.s.get(self.i) == Some(&b'.') {
            self.i += 1;
            digits(&mut self.i);
        }
        if matches!(self.s.get(self.i), Some(b'e' | b'E')) {
            let save = self.i;
            self.i += 1;
            if matches!(self.s.get(self.i), Some(b'+' | b'-')) {
                self.i += 1;
            }
            let exp_start = self.i;
            digits(&mut self.i);
            if self.i == exp_start {
                self.i = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
        text.parse::<f64>().map_err(|_| format!("bad number '{text}'"))
    }

    fn constant(&mut self) -> Result<f64, String> {
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_alphanumeric() {
            self.i += 1;
        }
        match std::str::from_utf8(&self.s[start..self.i]).expect("ascii") {
            "pi" => Ok(std::f64::consts::PI),
            "sqrt2" => Ok(std::f64::consts::SQRT_2),
            "" => Err(format!("unexpected character '{}'", self.s[start] as char)),
            other => Err(format!("unknown symbol '{other}'")),
        }
    }
}
