//! Run configuration: a TOML file with the model keys.
//!
//! ```toml
//! [system]
//! N = 3
//! t = 1.0
//! U = 0.0
//! [coupling]
//! vL = 0.2
//! vR = 0.2
//! [reservoir]
//! alpha = -0.5
//! thetaF = 1.0
//! k0 = 1.0
//! kmax = 6.0          # optional, default 10·(k0 + 1)
//! [thermo]
//! betaL = 5.0         # inf allowed
//! betaR = 5.0
//! muL = 0.5
//! muR = -0.5
//! [grid]
//! points = 400        # optional
//! delta = 0.0         # optional, 0 = automatic
//! [current]
//! prefactor = 2.0     # optional
//! measure_2pi = false # optional
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use toml::{Table, Value};

use crate::model::{make_chain_system, ChainSpec, PowerLawChannel, SystemSpec, ThermoState};
use crate::transport::CurrentConvention;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("missing config key `{0}`")]
    Missing(String),
    #[error("unknown config key `{0}`")]
    Unknown(String),
    #[error("config key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub t_hop: f64,
    pub u: f64,
    pub v_l: f64,
    pub v_r: f64,
    pub alpha: f64,
    pub theta_f: f64,
    pub k0: f64,
    pub k_max: f64,
    pub beta_l: f64,
    pub beta_r: f64,
    pub mu_l: f64,
    pub mu_r: f64,
    pub points: usize,
    pub delta: f64,
    pub prefactor: f64,
    pub measure_2pi: bool,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("system", &["N", "t", "U"]),
    ("coupling", &["vL", "vR"]),
    ("reservoir", &["alpha", "thetaF", "k0", "kmax"]),
    ("thermo", &["betaL", "betaR", "muL", "muR"]),
    ("grid", &["points", "delta"]),
    ("current", &["prefactor", "measure_2pi"]),
];

struct Reader<'a> {
    root: &'a Table,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        let (sec, name) = key.split_once('.').expect("dotted key");
        self.root.get(sec).and_then(|s| s.as_table()).and_then(|t| t.get(name))
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(ConfigError::Invalid { key: key.into(), msg: format!("expected a number, got {}", other.type_str()) }),
        }
    }

    fn req(&self, key: &str) -> Result<f64, ConfigError> {
        self.float(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn finite(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.req(key)?;
        if !x.is_finite() {
            return Err(ConfigError::Invalid { key: key.into(), msg: "must be finite".into() });
        }
        Ok(x)
    }

    fn count(&self, key: &str, default: Option<usize>) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => default.ok_or_else(|| ConfigError::Missing(key.into())),
            Some(Value::Integer(i)) if *i >= 1 => Ok(*i as usize),
            Some(_) => Err(ConfigError::Invalid { key: key.into(), msg: "expected a positive integer".into() }),
        }
    }
}

fn invalid(key: &str, msg: &str) -> ConfigError {
    ConfigError::Invalid { key: key.into(), msg: msg.into() }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
        for (sec, val) in &root {
            let Some(known) = SCHEMA.iter().find(|(s, _)| s == sec).map(|(_, k)| *k) else {
                return Err(ConfigError::Unknown(sec.clone()));
            };
            let Some(table) = val.as_table() else {
                return Err(invalid(sec, "expected a table"));
            };
            for key in table.keys() {
                if !known.contains(&key.as_str()) {
                    return Err(ConfigError::Unknown(format!("{sec}.{key}")));
                }
            }
        }
        let r = Reader { root: &root };
        let n = r.count("system.N", None)?;
        let k0 = r.finite("reservoir.k0")?;
        let beta = |key: &str| -> Result<f64, ConfigError> {
            let b = r.req(key)?;
            if b.is_nan() || b <= 0.0 {
                return Err(invalid(key, "must be positive (inf allowed)"));
            }
            Ok(b)
        };
        let measure_2pi = match r.get("current.measure_2pi") {
            None => false,
            Some(Value::Boolean(b)) => *b,
            Some(_) => return Err(invalid("current.measure_2pi", "expected a boolean")),
        };
        let cfg = Self {
            n,
            t_hop: r.finite("system.t")?,
            u: r.finite("system.U")?,
            v_l: r.finite("coupling.vL")?,
            v_r: r.finite("coupling.vR")?,
            alpha: r.finite("reservoir.alpha")?,
            theta_f: r.finite("reservoir.thetaF")?,
            k0,
            k_max: r.float("reservoir.kmax")?.unwrap_or(PowerLawChannel::default_k_max(k0)),
            beta_l: beta("thermo.betaL")?,
            beta_r: beta("thermo.betaR")?,
            mu_l: r.finite("thermo.muL")?,
            mu_r: r.finite("thermo.muR")?,
            points: r.count("grid.points", Some(400))?,
            delta: r.float("grid.delta")?.unwrap_or(0.0),
            prefactor: r.float("current.prefactor")?.unwrap_or(2.0),
            measure_2pi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.alpha <= -1.0 {
            return Err(invalid("reservoir.alpha", "must exceed -1"));
        }
        if self.theta_f <= 0.0 {
            return Err(invalid("reservoir.thetaF", "must be positive"));
        }
        if self.k0 < 0.0 {
            return Err(invalid("reservoir.k0", "must be nonnegative"));
        }
        if !(self.k_max.is_finite() && self.k_max > self.k0) {
            return Err(invalid("reservoir.kmax", "must be finite and exceed k0"));
        }
        if self.points < 2 {
            return Err(invalid("grid.points", "must be at least 2"));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(invalid("grid.delta", "must be finite and nonnegative"));
        }
        if !(self.prefactor.is_finite() && self.prefactor > 0.0) {
            return Err(invalid("current.prefactor", "must be positive"));
        }
        Ok(())
    }

    /// Canonical TOML text; parsing it gives back the same config.
    pub fn echo(&self) -> String {
        let f = |x: f64| -> String {
            if x.is_infinite() {
                if x > 0.0 { "inf".into() } else { "-inf".into() }
            } else {
                format!("{x:?}")
            }
        };
        let mut s = String::new();
        let _ = writeln!(s, "[system]\nN = {}\nt = {}\nU = {}", self.n, f(self.t_hop), f(self.u));
        let _ = writeln!(s, "[coupling]\nvL = {}\nvR = {}", f(self.v_l), f(self.v_r));
        let _ = writeln!(s, "[reservoir]\nalpha = {}\nthetaF = {}\nk0 = {}\nkmax = {}", f(self.alpha), f(self.theta_f), f(self.k0), f(self.k_max));
        let _ = writeln!(s, "[thermo]\nbetaL = {}\nbetaR = {}\nmuL = {}\nmuR = {}", f(self.beta_l), f(self.beta_r), f(self.mu_l), f(self.mu_r));
        let _ = writeln!(s, "[grid]\npoints = {}\ndelta = {}", self.points, f(self.delta));
        let _ = write!(s, "[current]\nprefactor = {}\nmeasure_2pi = {}\n", f(self.prefactor), self.measure_2pi);
        s
    }

    pub fn system(&self) -> crate::Result<SystemSpec> {
        make_chain_system(&ChainSpec::new(self.n, self.t_hop, self.u)?, self.v_l, self.v_r)
    }

    /// Both reservoirs share this channel; v_L, v_R sit in the system couplings.
    pub fn channel(&self) -> crate::Result<PowerLawChannel> {
        PowerLawChannel::new(1.0, self.alpha, self.theta_f, self.k0, self.k_max)
    }

    pub fn thermo(&self) -> crate::Result<ThermoState> {
        ThermoState::new(self.beta_l, self.beta_r, self.mu_l, self.mu_r)
    }

    pub fn convention(&self) -> CurrentConvention {
        CurrentConvention { prefactor: self.prefactor, measure_2pi: self.measure_2pi }
    }

    /// The reference benchmark: N = 3 chain between two flat-density reservoirs.
    pub fn benchmark() -> Self {
        Self {
            n: 3,
            t_hop: 1.0,
            u: 0.0,
            v_l: 0.2,
            v_r: 0.2,
            alpha: -0.5,
            theta_f: 1.0,
            k0: 1.0,
            k_max: 6.0,
            beta_l: 5.0,
            beta_r: 5.0,
            mu_l: 0.5,
            mu_r: -0.5,
            points: 400,
            delta: 0.0,
            prefactor: 2.0,
            measure_2pi: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[system]\nN = 1\nt = 1.0\nU = 2\n[coupling]\nvL = 0.1\nvR = 0.1\n\
        [reservoir]\nalpha = -0.5\nthetaF = 1.0\nk0 = 1.0\n[thermo]\nbetaL = inf\nbetaR = 2.0\nmuL = 0.5\nmuR = 0.0\n";

    #[test]
    fn defaults_fill_optional_keys() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.k_max, 20.0);
        assert_eq!(c.points, 400);
        assert_eq!(c.prefactor, 2.0);
        assert!(!c.measure_2pi);
        assert!(c.beta_l.is_infinite());
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(RunConfig::parse(&c.echo()).unwrap(), c);
        let b = RunConfig::benchmark();
        assert_eq!(RunConfig::parse(&b.echo()).unwrap(), b);
    }

    #[test]
    fn missing_and_unknown_keys() {
        let text = MINIMAL.replace("muR = 0.0\n", "");
        assert_eq!(RunConfig::parse(&text), Err(ConfigError::Missing("thermo.muR".into())));
        let text = format!("{MINIMAL}spin = 1\n");
        assert_eq!(RunConfig::parse(&text), Err(ConfigError::Unknown("thermo.spin".into())));
        let text = format!("{MINIMAL}[extra]\nx = 1\n");
        assert_eq!(RunConfig::parse(&text), Err(ConfigError::Unknown("extra".into())));
    }

    #[test]
    fn rejects_bad_values() {
        let text = MINIMAL.replace("alpha = -0.5", "alpha = -1.5");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Invalid { .. })));
        let text = MINIMAL.replace("betaR = 2.0", "betaR = -1.0");
        assert!(matches!(RunConfig::parse(&text), Err(ConfigError::Invalid { .. })));
    }
}
