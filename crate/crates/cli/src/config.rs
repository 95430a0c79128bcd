//! Experiment configuration and its plain-text `key = value` file format.
//!
//! Lists are comma separated; an empty value means "unset". Real numbers may be written
//! as multiples of the critical temperature, e.g. `beta = 2*beta_c`.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use dgff_core::closedform::{beta_c, FORMULAS};

use crate::error::{CliError, Result};

/// Which experiment a run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Sample,
    Green,
    FreeEnergy,
    Overlap,
    HighPoints,
    BoundaryMass,
    BkCheck,
    Pd,
    Predict,
    GremMc,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Sample,
        Experiment::Green,
        Experiment::FreeEnergy,
        Experiment::Overlap,
        Experiment::HighPoints,
        Experiment::BoundaryMass,
        Experiment::BkCheck,
        Experiment::Pd,
        Experiment::Predict,
        Experiment::GremMc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sample => "sample",
            Experiment::Green => "green",
            Experiment::FreeEnergy => "free-energy",
            Experiment::Overlap => "overlap",
            Experiment::HighPoints => "high-points",
            Experiment::BoundaryMass => "boundary-mass",
            Experiment::BkCheck => "bk-check",
            Experiment::Pd => "pd",
            Experiment::Predict => "predict",
            Experiment::GremMc => "grem-mc",
        }
    }

    fn uses_box(self) -> bool {
        !matches!(self, Experiment::Pd | Experiment::Predict)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        // `bk-identities` is accepted as a synonym.
        if s == "bk-identities" {
            return Ok(Experiment::BkCheck);
        }
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!(
                    "unknown experiment `{s}`; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: Vec<usize>,
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Variance parameter of the REM prediction.
    pub sigma_sq: Option<f64>,
    pub rho: Option<f64>,
    pub delta: f64,
    pub gamma: Vec<f64>,
    pub disorder: usize,
    pub pairs: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub formula: Option<String>,
    pub atoms: usize,
    pub samples: usize,
    pub r: Option<f64>,
    pub u: Option<f64>,
    pub du: f64,
    pub snapshot_in: Option<PathBuf>,
    pub snapshot_out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            n: vec![64],
            beta: vec![1.0],
            alpha: 0.5,
            sigma1: 1.0,
            sigma2: 1.0,
            sigma_sq: None,
            rho: None,
            delta: 0.1,
            gamma: vec![0.5],
            disorder: 10,
            pairs: 10_000,
            seed: 0,
            workers: None,
            out: PathBuf::from("out"),
            formula: None,
            atoms: 10_000,
            samples: 10_000,
            r: None,
            u: None,
            du: 1e-4,
            snapshot_in: None,
            snapshot_out: None,
        }
    }

    /// Parses the key-value format; unknown keys and bad values are errors naming the key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut experiment = None;
        let mut pending = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(
                    "<file>",
                    format!("line {}: expected `key = value`", lineno + 1),
                )
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "experiment" {
                experiment = Some(
                    value
                        .parse::<Experiment>()
                        .map_err(|e| CliError::config("experiment", e))?,
                );
            } else {
                pending.push((key.to_string(), value.to_string()));
            }
        }
        let experiment = experiment.ok_or_else(|| CliError::config("experiment", "missing"))?;
        let mut config = ExperimentConfig::new(experiment);
        for (key, value) in pending {
            config.set(&key, &value)?;
        }
        Ok(config)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "experiment" => {
                self.experiment = v.parse().map_err(|e| CliError::config("experiment", e))?
            }
            "n" => self.n = list(key, v, parse_usize)?,
            "beta" => self.beta = list(key, v, parse_real)?,
            "alpha" => self.alpha = parse_real(key, v)?,
            "sigma1" => self.sigma1 = parse_real(key, v)?,
            "sigma2" => self.sigma2 = parse_real(key, v)?,
            "sigma_sq" => self.sigma_sq = optional(key, v, parse_real)?,
            "rho" => self.rho = optional(key, v, parse_real)?,
            "delta" => self.delta = parse_real(key, v)?,
            "gamma" => self.gamma = list(key, v, parse_real)?,
            "disorder" => self.disorder = parse_usize(key, v)?,
            "pairs" => self.pairs = parse_usize(key, v)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|e| CliError::config(key, format!("`{v}`: {e}")))?
            }
            "workers" => self.workers = optional(key, v, parse_usize)?,
            "out" => self.out = PathBuf::from(v),
            "formula" => self.formula = (!v.is_empty()).then(|| v.to_string()),
            "atoms" => self.atoms = parse_usize(key, v)?,
            "samples" => self.samples = parse_usize(key, v)?,
            "r" => self.r = optional(key, v, parse_real)?,
            "u" => self.u = optional(key, v, parse_real)?,
            "du" => self.du = parse_real(key, v)?,
            "snapshot_in" => self.snapshot_in = (!v.is_empty()).then(|| PathBuf::from(v)),
            "snapshot_out" => self.snapshot_out = (!v.is_empty()).then(|| PathBuf::from(v)),
            other => return Err(CliError::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Writes every key, so `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let ns: Vec<String> = self.n.iter().map(|n| n.to_string()).collect();
        writeln!(s, "experiment = {}", self.experiment).unwrap();
        writeln!(s, "n = {}", ns.join(", ")).unwrap();
        writeln!(s, "beta = {}", join(&self.beta)).unwrap();
        writeln!(s, "alpha = {}", self.alpha).unwrap();
        writeln!(s, "sigma1 = {}", self.sigma1).unwrap();
        writeln!(s, "sigma2 = {}", self.sigma2).unwrap();
        writeln!(s, "sigma_sq = {}", opt(self.sigma_sq)).unwrap();
        writeln!(s, "rho = {}", opt(self.rho)).unwrap();
        writeln!(s, "delta = {}", self.delta).unwrap();
        writeln!(s, "gamma = {}", join(&self.gamma)).unwrap();
        writeln!(s, "disorder = {}", self.disorder).unwrap();
        writeln!(s, "pairs = {}", self.pairs).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(
            s,
            "workers = {}",
            self.workers.map(|w| w.to_string()).unwrap_or_default()
        )
        .unwrap();
        writeln!(s, "out = {}", self.out.display()).unwrap();
        writeln!(s, "formula = {}", self.formula.clone().unwrap_or_default()).unwrap();
        writeln!(s, "atoms = {}", self.atoms).unwrap();
        writeln!(s, "samples = {}", self.samples).unwrap();
        writeln!(s, "r = {}", opt(self.r)).unwrap();
        writeln!(s, "u = {}", opt(self.u)).unwrap();
        writeln!(s, "du = {}", self.du).unwrap();
        writeln!(s, "snapshot_in = {}", path(&self.snapshot_in)).unwrap();
        writeln!(s, "snapshot_out = {}", path(&self.snapshot_out)).unwrap();
        s
    }

    /// Checks every parameter domain the chosen experiment depends on.
    pub fn validate(&self) -> Result<()> {
        let e = self.experiment;
        if e.uses_box() {
            if self.n.is_empty() {
                return Err(CliError::config("n", "at least one box size is required"));
            }
            if let Some(&bad) = self.n.iter().find(|&&n| n < 4) {
                return Err(CliError::config(
                    "n",
                    format!("{bad} is below the minimum of 4"),
                ));
            }
        }
        if let Some(&bad) = self.beta.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(CliError::config(
                "beta",
                format!("{bad} must be a finite value >= 0"),
            ));
        }
        if matches!(
            e,
            Experiment::FreeEnergy
                | Experiment::Overlap
                | Experiment::BoundaryMass
                | Experiment::BkCheck
                | Experiment::GremMc
        ) && self.beta.is_empty()
        {
            return Err(CliError::config(
                "beta",
                "at least one inverse temperature is required",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::config(
                "alpha",
                format!("{} is outside (0, 1)", self.alpha),
            ));
        }
        for (key, s) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(CliError::config(
                    key,
                    format!("{s} must be a finite value >= 0"),
                ));
            }
        }
        if let Some(s2) = self.sigma_sq {
            if !(s2 > 0.0 && s2.is_finite()) {
                return Err(CliError::config(
                    "sigma_sq",
                    format!("{s2} must be positive"),
                ));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(CliError::config("rho", format!("{rho} is outside (0, 1)")));
            }
            if rho >= self.alpha && matches!(e, Experiment::FreeEnergy | Experiment::BkCheck) {
                return Err(CliError::config(
                    "rho",
                    format!("{rho} must be below alpha = {}", self.alpha),
                ));
            }
        }
        if matches!(e, Experiment::BoundaryMass | Experiment::BkCheck) && self.rho.is_none() {
            return Err(CliError::config("rho", format!("required by {e}")));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return Err(CliError::config(
                "delta",
                format!("{} is outside [0, 1/2)", self.delta),
            ));
        }
        if let Some(&bad) = self.gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return Err(CliError::config(
                "gamma",
                format!("{bad} must be a finite value >= 0"),
            ));
        }
        for (key, v) in [
            ("disorder", self.disorder),
            ("pairs", self.pairs),
            ("atoms", self.atoms),
            ("samples", self.samples),
        ] {
            if v == 0 {
                return Err(CliError::config(key, "must be at least 1"));
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        if let Some(r) = self.r {
            if !(0.0..=1.0).contains(&r) {
                return Err(CliError::config("r", format!("{r} is outside [0, 1]")));
            }
        }
        if !(self.du > 0.0 && self.du.is_finite()) {
            return Err(CliError::config(
                "du",
                format!("{} must be positive", self.du),
            ));
        }
        if e == Experiment::Predict {
            match &self.formula {
                None => return Err(CliError::config("formula", "required by predict")),
                Some(f) if !FORMULAS.contains(&f.as_str()) => {
                    return Err(CliError::config(
                        "formula",
                        format!(
                            "unknown formula `{f}`; expected one of {}",
                            FORMULAS.join(", ")
                        ),
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

fn list<T>(key: &str, v: &str, one: fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|item| one(key, item.trim())).collect()
}

fn optional<T>(key: &str, v: &str, one: fn(&str, &str) -> Result<T>) -> Result<Option<T>> {
    if v.is_empty() {
        Ok(None)
    } else {
        one(key, v).map(Some)
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|e| CliError::config(key, format!("`{v}`: {e}")))
}

/// A real number, `beta_c`, or `<real>*beta_c`.
pub fn parse_real(key: &str, v: &str) -> Result<f64> {
    let bad = |e: String| CliError::config(key, format!("`{v}`: {e}"));
    let compact: String = v.chars().filter(|c| !c.is_whitespace()).collect();
    let x = if compact == "beta_c" {
        beta_c()
    } else if let Some(m) = compact.strip_suffix("*beta_c") {
        m.parse::<f64>().map_err(|e| bad(e.to_string()))? * beta_c()
    } else {
        compact.parse::<f64>().map_err(|e| bad(e.to_string()))?
    };
    if x.is_nan() {
        return Err(bad("not a number".into()));
    }
    Ok(x)
}
