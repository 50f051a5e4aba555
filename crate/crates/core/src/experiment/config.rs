//! Experiment description: a TOML file with `[model]`, `[bath]`,
//! `[protocol]`, `[sweep]`, `[fit]`, `[output]`, `[run]` and `[integrator]`
//! sections, overridable through `AKZ_<SECTION>__<KEY>` variables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aux_bath::AuxBathParams;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec, Observable, QrmCorrection};
use crate::moments::{BathSpec, DeltaMethod};
use crate::ode::IntegratorSettings;
use crate::protocol::QuenchProtocol;

pub const ENV_PREFIX: &str = "AKZ_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelSection,
    #[serde(default)]
    pub bath: BathSection,
    pub protocol: ProtocolSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "sweep".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qrm_correction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    /// `closed`, `markovian` or `structured`.
    #[serde(default = "closed")]
    pub kind: String,
    #[serde(default)]
    pub kappa: f64,
    /// Markovian only, in units of `ω`.
    #[serde(default)]
    pub temperature: f64,
    /// Structured only; defaults to `20 ω`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    /// Structured only; the built-in Ohmic table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_file: Option<PathBuf>,
}

fn closed() -> String {
    "closed".into()
}

impl Default for BathSection {
    fn default() -> Self {
        Self {
            kind: closed(),
            kappa: 0.0,
            temperature: 0.0,
            omega_c: None,
            aux_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub g_final: f64,
    #[serde(default = "one")]
    pub r_n: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub tau_min: f64,
    pub tau_max: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    /// System sizes for `size-crossover`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta: Vec<f64>,
}

fn default_ppd() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Window bounds; the sweep range when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn yes() -> bool {
    true
}

fn default_tolerance() -> f64 {
    0.05
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            enabled: true,
            tau_min: None,
            tau_max: None,
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "all_observables")]
    pub observables: Vec<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn all_observables() -> Vec<String> {
    Observable::ALL.iter().map(|o| o.key().to_string()).collect()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            observables: all_observables(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Also fit the closed leg against its KZ or adiabatic law.
    #[serde(default = "yes")]
    pub run_isolated: bool,
    /// Worker threads; 0 uses every available processor.
    #[serde(default)]
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            run_isolated: true,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// `difference` or `subtract`.
    #[serde(default = "default_method")]
    pub delta_method: String,
}

fn default_rtol() -> f64 {
    IntegratorSettings::default().rtol
}

fn default_atol() -> f64 {
    IntegratorSettings::default().atol
}

fn default_max_steps() -> usize {
    IntegratorSettings::default().max_steps
}

fn default_method() -> String {
    "difference".into()
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            rtol: default_rtol(),
            atol: default_atol(),
            max_steps: default_max_steps(),
            delta_method: default_method(),
        }
    }
}

fn parse_error(e: impl std::fmt::Display) -> Error {
    Error::validation("config", e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, std::iter::empty::<(String, String)>())
    }

    /// Parses `text` after applying `AKZ_`-prefixed `(name, value)` pairs;
    /// other names are ignored.
    pub fn from_toml_with_overrides<I, K, V>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table = text.parse().map_err(parse_error)?;
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string()))
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (k, v) in &vars {
            apply_override(&mut table, &k[ENV_PREFIX.len()..], v)?;
        }
        toml::Value::Table(table).try_into().map_err(parse_error)
    }

    /// Reads `path` with overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_with_overrides(&text, std::env::vars())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Typed view, checking every field.
    pub fn resolve(&self) -> Result<Experiment> {
        Experiment::from_config(self.clone())
    }
}

fn apply_override(table: &mut toml::Table, name: &str, raw: &str) -> Result<()> {
    let path: Vec<String> = name.split("__").map(|s| s.to_ascii_lowercase()).collect();
    if path.iter().any(String::is_empty) {
        return Err(Error::validation(
            format!("{ENV_PREFIX}{name}"),
            "expected AKZ_<SECTION>__<KEY>",
        ));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, sections) = path.split_last().expect("non-empty");
    let mut cur = table;
    for s in sections {
        let entry = cur
            .entry(s.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::validation(path.join("."), format!("`{s}` is not a section")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum BathModel {
    Closed,
    Markovian(BathSpec),
    Structured(AuxBathParams),
}

impl BathModel {
    pub fn is_closed(&self) -> bool {
        match self {
            BathModel::Closed => true,
            BathModel::Markovian(b) => b.is_closed(),
            BathModel::Structured(p) => p.kappa == 0.0,
        }
    }
}

/// Validated, typed experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: ModelSpec,
    pub bath: BathModel,
    pub protocol: QuenchProtocol,
    pub taus: Vec<f64>,
    pub window: (f64, f64),
    pub observables: Vec<Observable>,
    pub settings: IntegratorSettings,
    pub method: DeltaMethod,
    pub hash: String,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

/// `points_per_decade` per decade, endpoints included exactly.
pub fn tau_grid(tau_min: f64, tau_max: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (tau_max / tau_min).log10();
    let n = ((decades * points_per_decade as f64).round() as usize).max(1);
    (0..=n)
        .map(|i| match i {
            0 => tau_min,
            i if i == n => tau_max,
            i => tau_min * 10f64.powf(decades * i as f64 / n as f64),
        })
        .collect()
}

impl Experiment {
    fn from_config(config: ExperimentConfig) -> Result<Self> {
        let m = &config.model;
        let kind: ModelKind = m.kind.parse()?;
        positive("model.omega", m.omega)?;
        let mut model = match kind {
            ModelKind::ThermodynamicLimit => {
                if m.eta.is_some() {
                    return Err(Error::validation("model.eta", "the thermodynamic limit has no size"));
                }
                ModelSpec::thermodynamic(m.omega)
            }
            ModelKind::Qrm | ModelKind::Lmg => {
                let eta = match (m.eta, config.sweep.eta.first()) {
                    (Some(e), _) => e,
                    (None, Some(&e)) => e,
                    (None, None) => return Err(Error::validation("model.eta", "required for finite-size models")),
                };
                positive("model.eta", eta)?;
                if kind == ModelKind::Qrm {
                    ModelSpec::qrm(eta, m.omega)
                } else {
                    ModelSpec::lmg(eta, m.omega)
                }
            }
        };
        if let Some(c) = &m.qrm_correction {
            let c: QrmCorrection = c.parse()?;
            if kind != ModelKind::Qrm {
                return Err(Error::validation("model.qrm_correction", "only applies to `qrm`"));
            }
            model = model.with_qrm_correction(c);
        }
        model.validate()?;

        let b = &config.bath;
        let bath = match b.kind.to_ascii_lowercase().as_str() {
            "closed" => {
                if b.kappa != 0.0 {
                    return Err(Error::validation("bath.kappa", "a closed bath takes no coupling"));
                }
                BathModel::Closed
            }
            "markovian" => {
                if !(b.kappa >= 0.0 && b.kappa.is_finite()) {
                    return Err(Error::validation("bath.kappa", "must be finite and >= 0"));
                }
                if !(b.temperature >= 0.0 && b.temperature.is_finite()) {
                    return Err(Error::validation("bath.temperature", "must be finite and >= 0"));
                }
                let spec = BathSpec::from_temperature(b.kappa, b.temperature, m.omega)
                    .map_err(|e| Error::validation("bath", e.to_string()))?;
                BathModel::Markovian(spec)
            }
            "structured" => {
                if kind != ModelKind::ThermodynamicLimit {
                    return Err(Error::validation(
                        "bath.kind",
                        "the structured bath is only available for the thermodynamic limit",
                    ));
                }
                if b.temperature != 0.0 {
                    return Err(Error::validation("bath.temperature", "the structured bath is at T = 0"));
                }
                let params = match &b.aux_file {
                    Some(p) => {
                        if b.omega_c.is_some() {
                            return Err(Error::validation("bath.omega_c", "set inside the aux file"));
                        }
                        let params = AuxBathParams::from_file(&config.resolve_path(p))?;
                        if b.kappa != 0.0 && b.kappa != params.kappa {
                            return Err(Error::validation("bath.kappa", "conflicts with the aux file"));
                        }
                        params
                    }
                    None => {
                        let wc = b.omega_c.unwrap_or(20.0 * m.omega);
                        positive("bath.omega_c", wc)?;
                        AuxBathParams::ohmic_default(b.kappa, wc)
                    }
                };
                params
                    .validate()
                    .map_err(|e| Error::validation("bath", e.to_string()))?;
                BathModel::Structured(params)
            }
            other => {
                return Err(Error::validation(
                    "bath.kind",
                    format!("expected `closed`, `markovian` or `structured`, got `{other}`"),
                ))
            }
        };

        let p = &config.protocol;
        if !(0.0..=1.0).contains(&p.g_final) || p.g_final == 0.0 {
            return Err(Error::validation("protocol.g_final", "must lie in (0, 1]"));
        }
        positive("protocol.r_n", p.r_n)?;

        let s = &config.sweep;
        positive("sweep.tau_min", s.tau_min)?;
        positive("sweep.tau_max", s.tau_max)?;
        if !(s.tau_min < s.tau_max) {
            return Err(Error::validation(
                "sweep",
                format!("tau_min = {} must be below tau_max = {}", s.tau_min, s.tau_max),
            ));
        }
        if s.points_per_decade == 0 {
            return Err(Error::validation("sweep.points_per_decade", "must be positive"));
        }
        let protocol = QuenchProtocol::new(p.g_final, s.tau_min, p.r_n)?;

        let f = &config.fit;
        let window = (f.tau_min.unwrap_or(s.tau_min), f.tau_max.unwrap_or(s.tau_max));
        if f.enabled {
            if s.points_per_decade < 5 {
                return Err(Error::validation(
                    "sweep.points_per_decade",
                    format!("a fitted sweep needs at least 5, got {}", s.points_per_decade),
                ));
            }
            if !(window.0 < window.1) {
                return Err(Error::validation("fit", "window tau_min must be below tau_max"));
            }
            if window.0 < s.tau_min || window.1 > s.tau_max {
                return Err(Error::validation(
                    "fit",
                    format!(
                        "window [{}, {}] leaves the sweep range [{}, {}]",
                        window.0, window.1, s.tau_min, s.tau_max
                    ),
                ));
            }
            positive("fit.tolerance", f.tolerance)?;
        }
        for (i, &eta) in s.eta.iter().enumerate() {
            positive(&format!("sweep.eta[{i}]"), eta)?;
        }

        let mut observables = Vec::new();
        for (i, o) in config.output.observables.iter().enumerate() {
            let o: Observable = o
                .parse()
                .map_err(|e: Error| Error::validation(format!("output.observables[{i}]"), e.to_string()))?;
            if observables.contains(&o) {
                return Err(Error::validation(
                    format!("output.observables[{i}]"),
                    format!("`{o}` listed twice"),
                ));
            }
            observables.push(o);
        }
        if observables.is_empty() {
            return Err(Error::validation("output.observables", "must not be empty"));
        }

        let ic = &config.integrator;
        let settings = IntegratorSettings {
            rtol: ic.rtol,
            atol: ic.atol,
            max_steps: ic.max_steps,
            h_max: None,
        };
        settings.validate()?;
        let method = match ic.delta_method.to_ascii_lowercase().as_str() {
            "difference" => DeltaMethod::Difference,
            "subtract" => DeltaMethod::Subtract,
            other => {
                return Err(Error::validation(
                    "integrator.delta_method",
                    format!("expected `difference` or `subtract`, got `{other}`"),
                ))
            }
        };

        let hash = config_hash(&config, &bath)?;
        Ok(Self {
            taus: tau_grid(s.tau_min, s.tau_max, s.points_per_decade),
            model,
            bath,
            protocol,
            window,
            observables,
            settings,
            method,
            hash,
            config,
        })
    }

    pub fn at_critical(&self) -> bool {
        self.protocol.g_final() == crate::model::G_CRITICAL
    }

    /// Same experiment at another system size, with its own hash.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut cfg = self.config.clone();
        cfg.model.eta = Some(eta);
        cfg.sweep.eta.clear();
        cfg.resolve()
    }
}

/// First 16 hex digits of SHA-256 over the canonical config text plus the
/// aux file, if any.
fn config_hash(config: &ExperimentConfig, bath: &BathModel) -> Result<String> {
    let mut h = Sha256::new();
    h.update(config.to_toml_string().as_bytes());
    if let (BathModel::Structured(_), Some(p)) = (bath, &config.bath.aux_file) {
        h.update(std::fs::read(config.resolve_path(p))?);
    }
    Ok(h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect())
}
