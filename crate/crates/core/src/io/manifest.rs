//! Run manifest (JSON).
//!
//! ```json
//! {
//!   "dataset": "BFW",                 // used in output file names
//!   "model": "toy",                   // used in output file names
//!   "cohorts": [
//!     { "label": "C", "archive": "maps.amap", "filter": { "ethnicity": "C" } },
//!     { "label": "E", "archive": "maps.amap", "filter": { "ethnicity": "E" } }
//!   ],
//!   "reference": "C",                 // cohort other groups are compared against
//!   "scores": "scores.csv",           // optional; needed by `fairness`
//!   "overlay_image": "face.png",      // optional background for overlays
//!   "output_dir": "out"               // optional; else $FAIRSCOPE_OUTPUT_DIR, else "fairscope-out"
//! }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cam::ActivationMap;
use crate::demographics::{Ethnicity, Gender};
use crate::error::{Error, IoContext, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "FAIRSCOPE_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "fairscope-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ethnicity: Option<Ethnicity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
}

impl CohortFilter {
    pub fn accepts(&self, map: &ActivationMap) -> bool {
        let d = map.demographics();
        self.ethnicity.is_none_or(|e| d.ethnicity == e) && self.gender.is_none_or(|g| d.gender == g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortDef {
    pub label: String,
    pub archive: PathBuf,
    #[serde(default)]
    pub filter: CohortFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortManifest {
    pub dataset: String,
    #[serde(default = "default_model")]
    pub model: String,
    pub cohorts: Vec<CohortDef>,
    pub reference: String,
    #[serde(default)]
    pub scores: Option<PathBuf>,
    #[serde(default)]
    pub overlay_image: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative paths resolve against; set by [`CohortManifest::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_model() -> String {
    "model".into()
}

impl CohortManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).io_context(|| format!("reading manifest {}", path.display()))?;
        let mut manifest: CohortManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let name_ok = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        if !name_ok(&self.dataset) || !name_ok(&self.model) {
            return Err(Error::Manifest("dataset and model names must be non-empty [A-Za-z0-9._-]".into()));
        }
        if self.cohorts.is_empty() {
            return Err(Error::Manifest("no cohorts defined".into()));
        }
        let mut labels = BTreeSet::new();
        for c in &self.cohorts {
            if !name_ok(&c.label) {
                return Err(Error::Manifest(format!("cohort label {:?} must be non-empty [A-Za-z0-9._-]", c.label)));
            }
            if !labels.insert(c.label.as_str()) {
                return Err(Error::Manifest(format!("duplicate cohort label {:?}", c.label)));
            }
            self.require_file(&c.archive)?;
        }
        if !labels.contains(self.reference.as_str()) {
            return Err(Error::Manifest(format!("reference group {:?} is not among the cohorts", self.reference)));
        }
        if let Some(p) = &self.scores {
            self.require_file(p)?;
        }
        if let Some(p) = &self.overlay_image {
            self.require_file(p)?;
        }
        Ok(())
    }

    fn require_file(&self, p: &Path) -> Result<()> {
        let full = self.resolve(p);
        if !full.is_file() {
            return Err(Error::Manifest(format!("referenced file {} does not exist", full.display())));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Output directory: manifest field, then the environment, then the default.
    pub fn output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(p) => self.resolve(p),
            None => match std::env::var_os(OUTPUT_DIR_ENV) {
                Some(v) if !v.is_empty() => PathBuf::from(v),
                _ => self.base_dir.join(DEFAULT_OUTPUT_DIR),
            },
        }
    }

    pub fn reference_cohort(&self) -> &CohortDef {
        self.cohorts.iter().find(|c| c.label == self.reference).expect("validated")
    }

    /// Cohorts other than the reference, in manifest order.
    pub fn comparison_cohorts(&self) -> impl Iterator<Item = &CohortDef> {
        self.cohorts.iter().filter(move |c| c.label != self.reference)
    }
}
