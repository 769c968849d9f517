//! The single engine configuration document.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyConfig, AssetLibrary, FailurePolicy, DEFAULT_GRID_CELL, DEFAULT_MAX_ATTEMPTS};
use crate::curation::CurationConfig;
use crate::geometry::Aabb;
use crate::hierarchy::{parse_hierarchy, HierarchyDocument, FLOOR};
use crate::mol::FitOptions;
use crate::predictor::{TableFitOptions, DEFAULT_MIN_COUNT};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// A config problem, located by its field path (`fit.k`,
/// `templates.bedroom`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn err(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub k: usize,
    pub lambda: f64,
    pub min_count: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitOptions::default();
        Self {
            k: f.k,
            lambda: f.lambda,
            min_count: DEFAULT_MIN_COUNT,
            tol: f.tol,
            max_iters: f.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub scene_type: String,
    pub scene_count: usize,
    /// Cap on nodes added to the base template.
    pub n_max: usize,
    /// Expansion gain applied to co-occurrence frequencies.
    pub expansion_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblySection {
    pub boundary: Aabb,
    pub max_attempts: usize,
    pub gravity_enabled: bool,
    pub rejection_enabled: bool,
    pub failure_policy: FailurePolicy,
    pub grid_cell: f64,
}

impl AssemblySection {
    pub fn with_boundary(boundary: Aabb) -> Self {
        Self {
            boundary,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            gravity_enabled: true,
            rejection_enabled: true,
            failure_policy: FailurePolicy::Skip,
            grid_cell: DEFAULT_GRID_CELL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub version: u32,
    pub seed: u64,
    pub taxonomy: Vec<String>,
    pub templates: BTreeMap<String, HierarchyDocument>,
    pub curation: CurationConfig,
    pub fit: FitSection,
    pub generation: GenerationSection,
    pub assembly: AssemblySection,
    pub assets: AssetLibrary,
}

impl Default for EngineConfig {
    /// The bedroom fixture setup.
    fn default() -> Self {
        crate::fixtures::bedroom().config()
    }
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: EngineConfig = serde_json::from_str(text).map_err(|e| err("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("configs always serialize");
        s.push('\n');
        s
    }

    pub fn assembly_config(&self, seed: u64) -> AssemblyConfig {
        AssemblyConfig {
            max_attempts: self.assembly.max_attempts,
            seed,
            gravity_enabled: self.assembly.gravity_enabled,
            rejection_enabled: self.assembly.rejection_enabled,
            failure_policy: self.assembly.failure_policy,
            grid_cell: self.assembly.grid_cell,
        }
    }

    pub fn table_fit_options(&self) -> TableFitOptions {
        TableFitOptions {
            fit: FitOptions {
                k: self.fit.k,
                lambda: self.fit.lambda,
                max_iters: self.fit.max_iters,
                tol: self.fit.tol,
            },
            min_count: self.fit.min_count,
            seed: self.seed,
        }
    }

    /// Checks every numeric bound and that every referenced category is in
    /// the taxonomy.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_FORMAT_VERSION {
            return Err(err(
                "version",
                format!("unsupported version {}, expected {CONFIG_FORMAT_VERSION}", self.version),
            ));
        }
        let mut cats: HashSet<&str> = HashSet::from([FLOOR]);
        for (i, c) in self.taxonomy.iter().enumerate() {
            if c.is_empty() || c == "-" || c.chars().any(char::is_whitespace) {
                return Err(err(format!("taxonomy[{i}]"), format!("invalid category `{c}`")));
            }
            if !cats.insert(c) {
                return Err(err(format!("taxonomy[{i}]"), format!("duplicate category `{c}`")));
            }
        }
        let known = |field: String, c: &str| -> Result<(), ConfigError> {
            if cats.contains(c) {
                Ok(())
            } else {
                Err(err(field, format!("category `{c}` is not in the taxonomy")))
            }
        };

        for (name, doc) in &self.templates {
            let field = format!("templates.{name}");
            let spec = parse_hierarchy(doc).map_err(|e| err(field.clone(), e.to_string()))?;
            for n in spec.support().nodes() {
                known(field.clone(), &n.category)?;
            }
        }

        self.curation.validate().map_err(|e| match e {
            crate::curation::CurationError::InvalidConfig { field, message } => {
                err(format!("curation.{field}"), message)
            }
            other => err("curation", other.to_string()),
        })?;
        for (i, r) in self.curation.rule_table.iter().enumerate() {
            known(format!("curation.rule_table[{i}].anchor"), &r.anchor)?;
            known(format!("curation.rule_table[{i}].dependent"), &r.dependent)?;
        }

        let f = &self.fit;
        if f.k == 0 {
            return Err(err("fit.k", "must be at least 1"));
        }
        if !(f.lambda >= 0.0 && f.lambda.is_finite()) {
            return Err(err("fit.lambda", format!("must be non-negative, got {}", f.lambda)));
        }
        if f.min_count < f.k {
            return Err(err("fit.min_count", format!("must be at least fit.k = {}", f.k)));
        }
        if !(f.tol > 0.0 && f.tol.is_finite()) {
            return Err(err("fit.tol", format!("must be positive, got {}", f.tol)));
        }
        if f.max_iters == 0 {
            return Err(err("fit.max_iters", "must be at least 1"));
        }

        let g = &self.generation;
        if !self.templates.contains_key(&g.scene_type) {
            return Err(err(
                "generation.scene_type",
                format!("no template for scene type `{}`", g.scene_type),
            ));
        }
        if !(g.expansion_k >= 0.0 && g.expansion_k.is_finite()) {
            return Err(err("generation.expansion_k", format!("must be non-negative, got {}", g.expansion_k)));
        }

        let a = &self.assembly;
        if !a.boundary.is_valid() {
            return Err(err("assembly.boundary", "min must be below max on every axis"));
        }
        if a.max_attempts == 0 {
            return Err(err("assembly.max_attempts", "must be at least 1"));
        }
        if !(a.grid_cell > 0.0 && a.grid_cell.is_finite()) {
            return Err(err("assembly.grid_cell", format!("must be positive, got {}", a.grid_cell)));
        }

        for (c, s) in &self.assets.sizes {
            let field = format!("assets.sizes.{c}");
            known(field.clone(), c)?;
            if !s.iter().all(|x| *x > 0.0 && x.is_finite()) {
                return Err(err(field, format!("extents must be positive, got {s:?}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = EngineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(EngineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = EngineConfig::default();
        cfg.fit.k = 0;
        assert_eq!(cfg.validate().unwrap_err().field, "fit.k");

        let mut cfg = EngineConfig::default();
        cfg.curation.overlap_min = 2.0;
        assert_eq!(cfg.validate().unwrap_err().field, "curation.overlap_min");

        let mut cfg = EngineConfig::default();
        cfg.taxonomy.retain(|c| c != "laptop");
        let e = cfg.validate().unwrap_err();
        assert!(e.field.starts_with("templates.") || e.field.starts_with("curation.") || e.field.starts_with("assets."), "{e}");

        let mut cfg = EngineConfig::default();
        cfg.generation.scene_type = "kitchen".into();
        assert_eq!(cfg.validate().unwrap_err().field, "generation.scene_type");

        let mut cfg = EngineConfig::default();
        cfg.version = 3;
        assert_eq!(cfg.validate().unwrap_err().field, "version");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = EngineConfig::default().to_json().replacen("\"seed\"", "\"sead\"", 1);
        assert_eq!(EngineConfig::from_json(&text).unwrap_err().field, "<document>");
    }
}
