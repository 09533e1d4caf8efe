//! Flat `key = value` experiment configs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::psi::PsiFunction;
use crate::solver::{RhsFamily, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::stability::DEFAULT_TERMS;
use crate::volterra::{HadamardWeight, KernelFamily};

const KEYS: &[&str] = &[
    "command",
    "psi",
    "mu",
    "eta",
    "a",
    "b",
    "horizon",
    "delta",
    "f",
    "volterra",
    "kernel",
    "hadamard_weight",
    "L_f",
    "L_W",
    "epsilon",
    "phi",
    "n",
    "tol",
    "max_iter",
    "trials",
    "seed",
    "out",
    "v",
    "g",
    "terms",
    "inflate",
    "z",
    "oracle",
];

pub const DEFAULT_N: usize = 1024;
pub const MIN_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Check,
    Uh,
    Uhr,
    Gronwall,
    Ml,
}

impl Command {
    fn needs_problem(self) -> bool {
        !matches!(self, Command::Ml)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Solve => "solve",
            Command::Check => "check",
            Command::Uh => "uh",
            Command::Uhr => "uhr",
            Command::Gronwall => "gronwall",
            Command::Ml => "ml",
        })
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Command::Solve,
            "check" => Command::Check,
            "uh" => Command::Uh,
            "uhr" => Command::Uhr,
            "gronwall" => Command::Gronwall,
            "ml" => Command::Ml,
            _ => return Err(Error::domain(format!("unknown command {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolterraSpec {
    Zero,
    State(f64),
    Hadamard,
}

impl FromStr for VolterraSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(VolterraSpec::Zero),
            "state" => Ok(VolterraSpec::State(1.0)),
            "hadamard" => Ok(VolterraSpec::Hadamard),
            _ => match s.strip_prefix("state:").and_then(|c| c.trim().parse::<f64>().ok()) {
                Some(c) if c.is_finite() => Ok(VolterraSpec::State(c)),
                _ => Err(Error::domain(format!(
                    "unknown volterra {s:?} (expected zero, state, state:<c> or hadamard)"
                ))),
            },
        }
    }
}

impl fmt::Display for VolterraSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolterraSpec::Zero => write!(f, "zero"),
            VolterraSpec::State(c) => write!(f, "state:{c}"),
            VolterraSpec::Hadamard => write!(f, "hadamard"),
        }
    }
}

/// Comparison function φ for Ulam–Hyers–Rassias runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiSpec {
    Const(f64),
    /// φ(t) = c0 + c1·t.
    Affine(f64, f64),
    /// φ(t) = E_μ((Ψ(t) − Ψ(a))^μ).
    MittagLeffler,
}

impl FromStr for PhiSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::domain(format!("unknown phi {s:?} (expected const:<c>, affine:<c0>:<c1> or ml)"));
        let num = |v: &str| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad);
        if s == "ml" {
            return Ok(PhiSpec::MittagLeffler);
        }
        if let Some(c) = s.strip_prefix("const:") {
            return Ok(PhiSpec::Const(num(c)?));
        }
        if let Some(rest) = s.strip_prefix("affine:") {
            let (c0, c1) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(PhiSpec::Affine(num(c0)?, num(c1)?));
        }
        Err(bad())
    }
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Const(c) => write!(f, "const:{c}"),
            PhiSpec::Affine(c0, c1) => write!(f, "affine:{c0}:{c1}"),
            PhiSpec::MittagLeffler => write!(f, "ml"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub psi: PsiFunction,
    pub mu: f64,
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub f: RhsFamily,
    pub volterra: VolterraSpec,
    pub kernel: KernelFamily,
    pub hadamard_weight: HadamardWeight,
    pub l_f: Option<f64>,
    pub l_w: Option<f64>,
    pub epsilon: f64,
    pub phi: PhiSpec,
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<String>,
    pub v: f64,
    pub g: f64,
    pub terms: usize,
    pub inflate: f64,
    pub z: f64,
    pub oracle: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            psi: PsiFunction::identity(),
            mu: 0.5,
            eta: 1.0,
            a: 0.0,
            b: 1.0,
            delta: 0.0,
            f: RhsFamily::Zero,
            volterra: VolterraSpec::Zero,
            kernel: KernelFamily::Linear(1.0),
            hadamard_weight: HadamardWeight::InvS,
            l_f: None,
            l_w: None,
            epsilon: 1e-3,
            phi: PhiSpec::Affine(1.0, 1.0),
            n: DEFAULT_N,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            trials: 20,
            seed: 42,
            out: None,
            v: 1.0,
            g: 0.2,
            terms: DEFAULT_TERMS,
            inflate: 1.0,
            z: 1.0,
            oracle: false,
        }
    }
}

/// Raw `key → (line, value)` pairs, with comments and blank lines dropped.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse { line, key: content.to_string(), message: "expected `key = value`".into() });
        };
        let key = key.trim();
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if key.is_empty() {
            return Err(Error::Parse { line, key: String::new(), message: "empty key".into() });
        }
        if out.insert(key.to_string(), (line, value.to_string())).is_some() {
            return Err(Error::Parse { line, key: key.to_string(), message: "duplicate key".into() });
        }
    }
    Ok(out)
}

fn required_keys(cmd: Command) -> &'static [&'static str] {
    match cmd {
        Command::Solve | Command::Check | Command::Uh => &["psi", "mu", "eta", "a", "b"],
        Command::Uhr => &["psi", "mu", "eta", "a", "horizon"],
        Command::Gronwall => &["psi", "mu", "a", "b"],
        Command::Ml => &["mu", "z"],
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path, command: Command) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, command)
    }

    /// Parses and validates; every violation is reported at once.
    pub fn parse(text: &str, command: Command) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut cfg = ExperimentConfig::default();
        let mut errs = Vec::new();

        for (key, (line, _)) in &pairs {
            if !KEYS.contains(&key.as_str()) {
                errs.push(format!("line {line}: unknown key {key:?}"));
            }
        }
        if pairs.contains_key("b") && pairs.contains_key("horizon") {
            errs.push("give either b or horizon, not both".into());
        }
        for key in required_keys(command) {
            let present = pairs.contains_key(*key) || (*key == "horizon" && pairs.contains_key("b"));
            if !present {
                errs.push(format!("missing required key {key:?} for `{command}`"));
            }
        }

        macro_rules! field {
            ($key:literal, $slot:expr) => {
                if let Some((line, v)) = pairs.get($key) {
                    match v.parse() {
                        Ok(x) => $slot = x,
                        Err(e) => errs.push(format!("line {line}: {} = {v:?}: {e}", $key)),
                    }
                }
            };
        }
        macro_rules! number {
            ($key:literal, $slot:expr) => {
                if let Some((line, v)) = pairs.get($key) {
                    match v.parse::<f64>() {
                        Ok(x) if x.is_finite() => $slot = x,
                        _ => errs.push(format!("line {line}: {} = {v:?} is not a finite number", $key)),
                    }
                }
            };
        }
        macro_rules! integer {
            ($key:literal, $slot:expr) => {
                if let Some((line, v)) = pairs.get($key) {
                    match v.parse() {
                        Ok(x) => $slot = x,
                        Err(_) => errs.push(format!("line {line}: {} = {v:?} is not a nonnegative integer", $key)),
                    }
                }
            };
        }

        if let Some((line, v)) = pairs.get("command") {
            match v.parse::<Command>() {
                Ok(c) if c == command => cfg.command = Some(c),
                Ok(c) => errs.push(format!("line {line}: config is for `{c}`, invoked as `{command}`")),
                Err(e) => errs.push(format!("line {line}: {e}")),
            }
        }
        field!("psi", cfg.psi);
        number!("mu", cfg.mu);
        number!("eta", cfg.eta);
        number!("a", cfg.a);
        number!("b", cfg.b);
        number!("horizon", cfg.b);
        number!("delta", cfg.delta);
        field!("f", cfg.f);
        field!("volterra", cfg.volterra);
        field!("kernel", cfg.kernel);
        field!("hadamard_weight", cfg.hadamard_weight);
        if let Some((line, v)) = pairs.get("L_f") {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => cfg.l_f = Some(x),
                _ => errs.push(format!("line {line}: L_f = {v:?} must be a number ≥ 0")),
            }
        }
        if let Some((line, v)) = pairs.get("L_W") {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => cfg.l_w = Some(x),
                _ => errs.push(format!("line {line}: L_W = {v:?} must be a number ≥ 0")),
            }
        }
        number!("epsilon", cfg.epsilon);
        field!("phi", cfg.phi);
        integer!("n", cfg.n);
        number!("tol", cfg.tol);
        integer!("max_iter", cfg.max_iter);
        integer!("trials", cfg.trials);
        integer!("seed", cfg.seed);
        if let Some((_, v)) = pairs.get("out") {
            cfg.out = Some(v.clone());
        }
        number!("v", cfg.v);
        number!("g", cfg.g);
        integer!("terms", cfg.terms);
        number!("inflate", cfg.inflate);
        number!("z", cfg.z);
        field!("oracle", cfg.oracle);

        errs.extend(cfg.violations(command));
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Range checks alone, for configs assembled in code.
    pub fn validate(&self, command: Command) -> Result<()> {
        let errs = self.violations(command);
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    fn violations(&self, command: Command) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            errs.push(format!("mu out of (0,1]: got {}", self.mu));
        }
        if command == Command::Ml {
            if self.z < 0.0 {
                errs.push(format!("z = {} must be ≥ 0", self.z));
            }
            return errs;
        }
        if !(0.0..=1.0).contains(&self.eta) {
            errs.push(format!("eta = {} out of [0,1]", self.eta));
        }
        if !(self.b > self.a) {
            errs.push(format!("need b > a, got a = {}, b = {}", self.a, self.b));
        } else if command.needs_problem() {
            let report = self.psi.validate(self.a, self.b);
            for f in report.failures() {
                errs.push(format!("psi = {} on [{}, {}]: {f}", self.psi, self.a, self.b));
            }
        }
        if self.n < MIN_N {
            errs.push(format!("n = {} must be ≥ {MIN_N}", self.n));
        }
        if !(self.tol > 0.0) {
            errs.push(format!("tol = {} must be > 0", self.tol));
        }
        if self.max_iter == 0 {
            errs.push("max_iter must be ≥ 1".into());
        }
        if self.volterra == VolterraSpec::Hadamard && self.psi != PsiFunction::hadamard() {
            errs.push(format!("volterra = hadamard needs psi = hadamard, got {}", self.psi));
        }
        match command {
            Command::Uh => {
                if !(self.epsilon > 0.0) {
                    errs.push(format!("epsilon = {} must be > 0", self.epsilon));
                }
                if self.trials == 0 {
                    errs.push("trials must be ≥ 1".into());
                }
            }
            Command::Uhr => {
                if self.trials == 0 {
                    errs.push("trials must be ≥ 1".into());
                }
                match self.phi {
                    PhiSpec::Const(c) if c <= 0.0 => errs.push(format!("phi = {} must be positive", self.phi)),
                    PhiSpec::Affine(c0, c1) if c1 < 0.0 || c0 + c1 * self.a <= 0.0 => {
                        errs.push(format!("phi = {} must be positive and nondecreasing on [a, horizon]", self.phi))
                    }
                    _ => {}
                }
            }
            Command::Gronwall => {
                if !(self.v >= 0.0) || !(self.g >= 0.0) {
                    errs.push("v and g must be ≥ 0".into());
                }
                if self.terms == 0 {
                    errs.push("terms must be ≥ 1".into());
                }
                if !(self.inflate > 0.0) {
                    errs.push(format!("inflate = {} must be > 0", self.inflate));
                }
            }
            _ => {}
        }
        errs
    }
}
