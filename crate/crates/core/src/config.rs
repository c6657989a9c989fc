//! Flat `key = value` experiment configuration with environment overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::algebra::{Ket, PureState, C64};
use crate::bath::BathParams;
use crate::controls::{Orientation, ProtocolParams, Variant};

/// Prefix for environment overrides, e.g. `DMME_G2M=0.1`.
pub const ENV_PREFIX: &str = "DMME_";

pub const DEFAULT_GRID: usize = 401;

pub const KEYS: &[&str] = &[
    "gamma",
    "delta",
    "g2m",
    "omega_e",
    "variant",
    "orientation",
    "g3",
    "temperature",
    "s32",
    "s24",
    "kappa",
    "lamb_shift",
    "initial_state",
    "amplitudes",
    "closed_system",
    "grid",
    "out_dir",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`; accepted keys: {}", KEYS.join(", "))]
    UnknownKey { line: usize, key: String },
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Psi3,
    Ket00,
    Psi4,
    Custom(PureState),
}

impl InitialState {
    pub fn name(&self) -> &'static str {
        match self {
            InitialState::Psi3 => "psi3_0",
            InitialState::Ket00 => "ket00",
            InitialState::Psi4 => "psi4_0",
            InitialState::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: ProtocolParams,
    pub bath: BathParams,
    pub initial_state: InitialState,
    pub closed_system: bool,
    /// Number of output points on [0, T].
    pub grid: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolParams::default(),
            bath: BathParams::default(),
            initial_state: InitialState::Ket00,
            closed_system: false,
            grid: DEFAULT_GRID,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Parsed but not yet validated entries.
#[derive(Default)]
struct Pending {
    initial: Option<String>,
    amplitudes: Option<Ket>,
}

fn parse_f64(key: &str, v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number for {key}"))?;
    if !x.is_finite() {
        return Err(format!("{key} must be finite"));
    }
    Ok(x)
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean for {key}")),
    }
}

/// Eight reals `re0, im0, ..., re3, im3`.
fn parse_amplitudes(v: &str) -> Result<Ket, String> {
    let parts: Vec<f64> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64("amplitudes", s))
        .collect::<Result<_, _>>()?;
    if parts.len() != 8 {
        return Err(format!("amplitudes needs 8 numbers (re,im for each of |00>,|01>,|10>,|11>), got {}", parts.len()));
    }
    Ok(Ket::from_fn(|i, _| C64::new(parts[2 * i], parts[2 * i + 1])))
}

impl ExperimentConfig {
    fn set(&mut self, pending: &mut Pending, key: &str, value: &str) -> Result<(), String> {
        let p = &mut self.protocol;
        let b = &mut self.bath;
        match key {
            "gamma" => p.gamma = parse_f64(key, value)?,
            "delta" => p.delta = parse_f64(key, value)?,
            "g2m" => p.g2m = parse_f64(key, value)?,
            "omega_e" => p.omega_e = parse_f64(key, value)?,
            "g3" => p.g3 = parse_f64(key, value)?,
            "variant" => {
                p.variant = match value {
                    "cos2" => Variant::Cos2,
                    "sin3" => Variant::Sin3,
                    _ => return Err(format!("variant must be cos2 or sin3, got `{value}`")),
                }
            }
            "orientation" => {
                p.orientation = match value {
                    "forward" => Orientation::Forward,
                    "reversed" => Orientation::Reversed,
                    _ => return Err(format!("orientation must be forward or reversed, got `{value}`")),
                }
            }
            "temperature" => b.temperature = parse_f64(key, value)?,
            "s32" => b.s32 = parse_f64(key, value)?,
            "s24" => b.s24 = parse_f64(key, value)?,
            "kappa" => b.cutoff_multiplier = parse_f64(key, value)?,
            "lamb_shift" => b.include_lamb_shift = parse_bool(key, value)?,
            "initial_state" => match value {
                "psi3_0" | "ket00" | "psi4_0" | "custom" => pending.initial = Some(value.to_string()),
                _ => return Err(format!("initial_state must be psi3_0, ket00, psi4_0 or custom, got `{value}`")),
            },
            "amplitudes" => pending.amplitudes = Some(parse_amplitudes(value)?),
            "closed_system" => self.closed_system = parse_bool(key, value)?,
            "grid" => {
                self.grid = value.parse().map_err(|_| format!("grid must be a positive integer, got `{value}`"))?
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => unreachable!("key checked against KEYS"),
        }
        Ok(())
    }

    fn resolve(&mut self, pending: Pending) -> Result<(), ConfigError> {
        let name = pending.initial.as_deref().unwrap_or(match self.initial_state {
            InitialState::Custom(_) => "custom",
            s => s.name(),
        });
        self.initial_state = match name {
            "psi3_0" => InitialState::Psi3,
            "ket00" => InitialState::Ket00,
            "psi4_0" => InitialState::Psi4,
            _ => {
                let amps = match (pending.amplitudes, self.initial_state) {
                    (Some(a), _) => a,
                    (None, InitialState::Custom(s)) => *s.amplitudes(),
                    (None, _) => return Err(invalid("amplitudes", "required when initial_state = custom")),
                };
                InitialState::Custom(PureState::normalized(amps).map_err(|e| invalid("amplitudes", e.to_string()))?)
            }
        };
        Ok(())
    }

    /// Parses config text on top of the defaults. Does not validate.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut pending = Pending::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(ConfigError::Parse { line, message: format!("expected `key = value`, got `{body}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey { line, key: k.to_string() });
            }
            cfg.set(&mut pending, k, v).map_err(|message| ConfigError::Parse { line, message })?;
        }
        cfg.resolve(pending)?;
        Ok(cfg)
    }

    /// Applies `DMME_<KEY>` overrides from the given variables. Other
    /// variables are ignored.
    pub fn apply_overrides<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut pending = Pending::default();
        let mut sorted: Vec<_> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        sorted.sort();
        for (var, value) in sorted {
            let key = var[ENV_PREFIX.len()..].to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(invalid(&var, format!("unknown key; accepted keys: {}", KEYS.join(", "))));
            }
            self.set(&mut pending, &key, value.trim()).map_err(|m| invalid(&var, m))?;
        }
        self.resolve(pending)
    }

    /// Field-level checks. Combinations that are only rejected when a run
    /// starts (Lamb shift at T > 0, inadmissible g2m) are left to the runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.protocol;
        let b = &self.bath;
        for (name, v) in [
            ("gamma", p.gamma),
            ("delta", p.delta),
            ("g2m", p.g2m),
            ("omega_e", p.omega_e),
            ("g3", p.g3),
            ("temperature", b.temperature),
            ("s32", b.s32),
            ("s24", b.s24),
            ("kappa", b.cutoff_multiplier),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return Err(invalid("delta", format!("{} is outside (0, 1)", p.delta)));
        }
        if p.omega_e <= 0.0 {
            return Err(invalid("omega_e", "must be > 0"));
        }
        p.validate().map_err(|e| invalid("protocol", e.to_string()))?;
        for (name, v) in [("temperature", b.temperature), ("s32", b.s32), ("s24", b.s24)] {
            if v < 0.0 {
                return Err(invalid(name, "must be >= 0"));
            }
        }
        if b.cutoff_multiplier <= 0.0 {
            return Err(invalid("kappa", "must be > 0"));
        }
        if self.grid < 2 {
            return Err(invalid("grid", "needs at least 2 points"));
        }
        Ok(())
    }

    /// Canonical key/value form, e.g. for run summaries.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let p = &self.protocol;
        let b = &self.bath;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("gamma", p.gamma.to_string());
        put("delta", p.delta.to_string());
        put("g2m", p.g2m.to_string());
        put("omega_e", p.omega_e.to_string());
        put("g3", p.g3.to_string());
        put(
            "variant",
            match p.variant {
                Variant::Cos2 => "cos2",
                Variant::Sin3 => "sin3",
            }
            .into(),
        );
        put(
            "orientation",
            match p.orientation {
                Orientation::Forward => "forward",
                Orientation::Reversed => "reversed",
            }
            .into(),
        );
        put("temperature", b.temperature.to_string());
        put("s32", b.s32.to_string());
        put("s24", b.s24.to_string());
        put("kappa", b.cutoff_multiplier.to_string());
        put("lamb_shift", b.include_lamb_shift.to_string());
        put("initial_state", self.initial_state.name().into());
        if let InitialState::Custom(s) = self.initial_state {
            let a: Vec<String> = s.amplitudes().iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]).collect();
            put("amplitudes", a.join(","));
        }
        put("closed_system", self.closed_system.to_string());
        put("grid", self.grid.to_string());
        put("out_dir", self.out_dir.display().to_string());
        m
    }
}

/// Reads `path`, applies process environment overrides and validates.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    cfg.apply_overrides(std::env::vars())?;
    cfg.validate()?;
    Ok(cfg)
}

/// Defaults plus environment overrides, for runs without a config file.
pub fn default_config() -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_overrides(std::env::vars())?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.protocol.gamma, 1.0);
        assert_eq!(cfg.protocol.g2m, 0.02);
        assert_eq!(cfg.protocol.delta, 0.1f64.sqrt());
        assert_eq!(cfg.bath.cutoff_multiplier, 10.0);
        assert_eq!((cfg.bath.s32, cfg.bath.s24, cfg.bath.temperature), (0.1, 0.01, 0.0));
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_values_and_comments() {
        let text =
            "# comment\n g2m = 0.1  # inline\nvariant=sin3\nlamb_shift = yes\ninitial_state = psi4_0\ngrid = 11\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.protocol.g2m, 0.1);
        assert_eq!(cfg.protocol.variant, Variant::Sin3);
        assert!(cfg.bath.include_lamb_shift);
        assert_eq!(cfg.initial_state, InitialState::Psi4);
        assert_eq!(cfg.grid, 11);
    }

    #[test]
    fn delta_out_of_range() {
        let cfg = ExperimentConfig::parse("delta = 1.5").unwrap();
        match cfg.validate() {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "delta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_lists_accepted() {
        let err = ExperimentConfig::parse("\n\nbogus = 1").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 3, .. }));
        let msg = err.to_string();
        for k in KEYS {
            assert!(msg.contains(k));
        }
    }

    #[test]
    fn parse_errors_carry_line() {
        assert!(matches!(ExperimentConfig::parse("gamma 1"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("\ng2m = abc"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(ExperimentConfig::parse("g2m = inf"), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn custom_amplitudes() {
        let cfg = ExperimentConfig::parse("initial_state = custom\namplitudes = 1,0, 0,0, 0,0, -1,0").unwrap();
        let InitialState::Custom(s) = cfg.initial_state else { panic!() };
        assert!((s.inner(&PureState::bell_minus()).norm() - 1.0).abs() < 1e-15);
        assert!(ExperimentConfig::parse("initial_state = custom").is_err());
        assert!(ExperimentConfig::parse("amplitudes = 1,2,3").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut cfg = ExperimentConfig::default();
        let vars = [("DMME_G2M", "0.05"), ("DMME_LAMB_SHIFT", "true"), ("HOME", "/x")];
        cfg.apply_overrides(vars.iter().map(|(a, b)| (a.to_string(), b.to_string()))).unwrap();
        assert_eq!(cfg.protocol.g2m, 0.05);
        assert!(cfg.bath.include_lamb_shift);
        let bad = cfg.apply_overrides([("DMME_NOPE".to_string(), "1".to_string())]);
        assert!(matches!(bad, Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn pairs_round_trip() {
        let text = "g2m = 0.03\ninitial_state = custom\namplitudes = 0,0, 1,0, 0,1, 0,0\nclosed_system = true";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let back: String = cfg.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(ExperimentConfig::parse(&back).unwrap(), cfg);
    }
}
