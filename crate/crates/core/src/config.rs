//! Scenario files: TOML with one table per module, plus `a.b.c=value`
//! overrides applied after parsing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::acoustic::AcousticParams;
use crate::error::{Error, Result};
use crate::experiment::ExperimentSection;
use crate::geometry::GeometryConfig;
use crate::localization::LocalizationConfig;
use crate::optical::{ExtinctionTable, OpticalParams, WaterKind, WaterType};

/// Keys that are valid but absent from the default document because their
/// default is "unset".
const OPTIONAL_KEYS: &[&str] = &["geometry.sink", "geometry.divergence_half_angle"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticalSection {
    pub water_type: WaterKind,
    pub extinction: ExtinctionTable,
    #[serde(flatten)]
    pub link: OpticalParams,
}

impl Default for OpticalSection {
    fn default() -> Self {
        OpticalSection {
            water_type: WaterKind::ClearOcean,
            extinction: ExtinctionTable::default(),
            link: OpticalParams::default(),
        }
    }
}

impl OpticalSection {
    pub fn water(&self) -> Result<WaterType> {
        WaterType::new(self.water_type, self.extinction.get(self.water_type))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub geometry: GeometryConfig,
    pub optical: OpticalSection,
    pub acoustic: AcousticParams,
    pub localization: LocalizationConfig,
    pub experiment: ExperimentSection,
}

impl Config {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_file_with_overrides(path, &[])
    }

    pub fn from_file_with_overrides(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        check_keys(&doc)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Config = Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `dotted.key=value` override to an already built config.
    pub fn with_override(&self, assignment: &str) -> Result<Self> {
        let text = self.to_toml()?;
        Self::from_toml_with_overrides(&text, &[assignment.to_string()])
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.optical.link.validate()?;
        for kind in WaterKind::ALL {
            WaterType::new(kind, self.optical.extinction.get(kind))?;
        }
        self.acoustic.validate()?;
        self.localization.validate()?;
        self.experiment.validate(self)?;
        Ok(())
    }
}

fn schema() -> Table {
    match Value::try_from(Config::default()) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("the default config serialises to a table"),
    }
}

fn known(schema: &Table, path: &[&str]) -> bool {
    let dotted = path.join(".");
    if OPTIONAL_KEYS.contains(&dotted.as_str()) {
        return true;
    }
    let mut cur = schema;
    for (i, key) in path.iter().enumerate() {
        match cur.get(*key) {
            Some(Value::Table(t)) if i + 1 < path.len() => cur = t,
            Some(_) if i + 1 == path.len() => return true,
            _ => return false,
        }
    }
    false
}

fn check_keys(doc: &Table) -> Result<()> {
    fn walk<'a>(t: &'a Table, prefix: &mut Vec<&'a str>, schema: &Table) -> Result<()> {
        for (k, v) in t {
            prefix.push(k);
            if !known(schema, prefix) {
                return Err(Error::config(prefix.join("."), "unknown configuration key"));
            }
            let dotted = prefix.join(".");
            if let (Value::Table(inner), false) = (v, OPTIONAL_KEYS.contains(&dotted.as_str())) {
                walk(inner, prefix, schema)?;
            }
            prefix.pop();
        }
        Ok(())
    }
    walk(doc, &mut Vec::new(), &schema())
}

fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Sets `key=value` inside `doc`. The key must name an existing setting.
pub fn apply_override(doc: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) || !known(&schema(), &path) {
        return Err(Error::config(key, "unknown configuration key"));
    }
    let mut cur = doc;
    for part in &path[..path.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, "parent is not a table"))?;
    }
    cur.insert(path[path.len() - 1].to_string(), parse_value(raw));
    Ok(())
}
