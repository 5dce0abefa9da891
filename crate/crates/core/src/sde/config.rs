//! Simulation parameters and the plain-text `key = value` config format.
//!
//! Recognized keys:
//!
//! | key              | meaning                                         |
//! |------------------|-------------------------------------------------|
//! | `eta`            | viscosity, `>= 0`                               |
//! | `dt`             | time step, `> 0`                                |
//! | `T`              | horizon, `>= dt`                                |
//! | `N`              | particle count, `>= 1`                          |
//! | `k_field`        | field truncation `K_f`                          |
//! | `k_noise`        | noise truncation `K_W`, `1 <= K_W <= K_f`       |
//! | `scheme`         | `ito-euler` or `strat-heun`                     |
//! | `seed`           | 64-bit master seed                              |
//! | `ic`             | `taylor-green`, `random-smooth:<seed>:<slope>`, `file:<path>` |
//! | `nu_override`    | optional noise amplitude replacing `sqrt(2 eta / c_K)` |
//! | `snapshot_every` | optional snapshot cadence in steps (0: final only) |
//!
//! Blank lines and text after `#` are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ItoEuler,
    StratHeun,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ito-euler" => Ok(Scheme::ItoEuler),
            "strat-heun" => Ok(Scheme::StratHeun),
            other => Err(Error::config(format!(
                "unknown scheme {other:?} (expected ito-euler or strat-heun)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::ItoEuler => "ito-euler",
            Scheme::StratHeun => "strat-heun",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    TaylorGreen,
    /// Random divergence-free field with spectrum `|k|^-slope`, energy 1/4.
    RandomSmooth { seed: u64, slope: f64 },
    /// Velocity read from an MFNS snapshot.
    File(PathBuf),
}

impl FromStr for InitialCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "taylor-green" {
            return Ok(InitialCondition::TaylorGreen);
        }
        if let Some(rest) = s.strip_prefix("random-smooth:") {
            let (seed, slope) = rest.split_once(':').ok_or_else(|| {
                Error::config(format!("random-smooth needs <seed>:<slope>, got {s:?}"))
            })?;
            let seed = seed
                .parse()
                .map_err(|_| Error::config(format!("bad random-smooth seed {seed:?}")))?;
            let slope: f64 = slope
                .parse()
                .map_err(|_| Error::config(format!("bad random-smooth slope {slope:?}")))?;
            if !slope.is_finite() {
                return Err(Error::config("random-smooth slope must be finite"));
            }
            return Ok(InitialCondition::RandomSmooth { seed, slope });
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::config("file initial condition needs a path"));
            }
            return Ok(InitialCondition::File(PathBuf::from(path)));
        }
        Err(Error::config(format!(
            "unknown initial condition {s:?} (expected taylor-green, random-smooth:<seed>:<slope> or file:<path>)"
        )))
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::TaylorGreen => f.write_str("taylor-green"),
            InitialCondition::RandomSmooth { seed, slope } => {
                write!(f, "random-smooth:{seed}:{slope}")
            }
            InitialCondition::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub eta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub particles: usize,
    pub k_field: usize,
    pub k_noise: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub initial_condition: InitialCondition,
    pub nu_override: Option<f64>,
    pub snapshot_every: usize,
}

pub const CONFIG_KEYS: &[&str] = &[
    "eta",
    "dt",
    "T",
    "N",
    "k_field",
    "k_noise",
    "scheme",
    "seed",
    "ic",
    "nu_override",
    "snapshot_every",
];

const REQUIRED_KEYS: &[&str] = &[
    "eta", "dt", "T", "N", "k_field", "k_noise", "scheme", "seed", "ic",
];

/// Parses `key = value` lines into a map, rejecting unknown and duplicate keys.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
        })?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::config(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::config(format!("line {}: duplicate key {key:?}", lineno + 1)));
        }
    }
    Ok(map)
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map
        .get(key)
        .ok_or_else(|| Error::config(format!("missing key {key:?}")))?;
    raw.parse()
        .map_err(|_| Error::config(format!("invalid value for {key}: {raw:?}")))
}

impl SimConfig {
    /// Builds and validates a config from a key/value map.
    pub fn from_key_values(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::config(format!("unknown key {key:?}")));
            }
        }
        for key in REQUIRED_KEYS {
            if !map.contains_key(*key) {
                return Err(Error::config(format!("missing key {key:?}")));
            }
        }
        let scheme: Scheme = map["scheme"].parse()?;
        let initial_condition: InitialCondition = map["ic"].parse()?;
        let config = SimConfig {
            eta: get(map, "eta")?,
            dt: get(map, "dt")?,
            horizon: get(map, "T")?,
            particles: get(map, "N")?,
            k_field: get(map, "k_field")?,
            k_noise: get(map, "k_noise")?,
            scheme,
            seed: get(map, "seed")?,
            initial_condition,
            nu_override: if map.contains_key("nu_override") {
                Some(get(map, "nu_override")?)
            } else {
                None
            },
            snapshot_every: if map.contains_key("snapshot_every") {
                get(map, "snapshot_every")?
            } else {
                0
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(&parse_key_values(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, msg),
            other => other,
        })
    }

    /// Loads `path` and then replaces or adds the given `(key, value)` pairs,
    /// so command-line values take precedence over the file.
    pub fn load_with_overrides(path: &Path, overrides: &[(&str, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = parse_key_values(&text).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, msg),
            other => other,
        })?;
        for (k, v) in overrides {
            map.insert((*k).to_string(), v.clone());
        }
        Self::from_key_values(&map)
    }

    /// Text form accepted by [`SimConfig::parse`]; floats use the shortest
    /// representation that round-trips.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_key_values() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("eta".into(), self.eta.to_string());
        m.insert("dt".into(), self.dt.to_string());
        m.insert("T".into(), self.horizon.to_string());
        m.insert("N".into(), self.particles.to_string());
        m.insert("k_field".into(), self.k_field.to_string());
        m.insert("k_noise".into(), self.k_noise.to_string());
        m.insert("scheme".into(), self.scheme.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("ic".into(), self.initial_condition.to_string());
        if let Some(nu) = self.nu_override {
            m.insert("nu_override".into(), nu.to_string());
        }
        if self.snapshot_every != 0 {
            m.insert("snapshot_every".into(), self.snapshot_every.to_string());
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.eta, self.dt, self.horizon]
            .iter()
            .chain(self.nu_override.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("eta, dt, T and nu_override must be finite"));
        }
        if self.eta < 0.0 {
            return Err(Error::config(format!("eta = {} must be >= 0", self.eta)));
        }
        if self.dt <= 0.0 {
            return Err(Error::config(format!("dt = {} must be > 0", self.dt)));
        }
        if self.horizon < self.dt {
            return Err(Error::config(format!(
                "T = {} must be at least dt = {}",
                self.horizon, self.dt
            )));
        }
        if self.particles < 1 {
            return Err(Error::config("N must be at least 1"));
        }
        if self.k_noise < 1 || self.k_noise > self.k_field {
            return Err(Error::config(format!(
                "need 1 <= k_noise <= k_field, got k_noise = {}, k_field = {}",
                self.k_noise, self.k_field
            )));
        }
        if let Some(nu) = self.nu_override {
            if nu < 0.0 {
                return Err(Error::config(format!("nu_override = {nu} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Number of fixed steps; the run ends at `steps * dt`, the multiple of
    /// `dt` closest to `T`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// `nu = sqrt(2 eta / c_K)`, or the override.
    pub fn nu(&self, covariance_constant: f64) -> f64 {
        self.nu_override
            .unwrap_or_else(|| (2.0 * self.eta / covariance_constant).sqrt())
    }

    /// Viscosity of the equation satisfied by the mean, `c_K nu^2 / 2`. Equals
    /// `eta` for the canonical `nu`.
    pub fn effective_viscosity(&self, covariance_constant: f64) -> f64 {
        match self.nu_override {
            None => self.eta,
            Some(nu) => 0.5 * covariance_constant * nu * nu,
        }
    }
}
