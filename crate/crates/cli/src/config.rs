//! Run configuration shared by all subcommands, loadable from TOML or JSON.

use crate::CliError;
use datquant::classify::{BoostConfig, ClassifierConfig, ForestConfig, SvmConfig};
use datquant::pipeline::{ExtractOptions, ThresholdMode};
use datquant::preprocess::SliceWindow;
use datquant::segment::SegmentOptions;
use datquant::shape::{ShapeOptions, SideCombination};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    Fixed,
    #[default]
    Auto,
    /// Every subject must carry a manifest override.
    PerSubject,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub mode: ThresholdKind,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub k: usize,
    pub repeats: usize,
    pub classifiers: Vec<String>,
    /// Also feed the SBR columns to the classifiers.
    pub include_sbr: bool,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            k: 10,
            repeats: 100,
            classifiers: vec!["svm".into()],
            include_sbr: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Absent means a seed is drawn and recorded in every report.
    pub seed: Option<u64>,
    pub alpha: f64,
    /// Worker threads; 0 = all cores. Never affects results.
    pub workers: usize,
    pub slices: SliceWindow,
    pub side: SideCombination,
    pub radiological: bool,
    pub absolute_ai: bool,
    pub min_area: usize,
    pub threshold: ThresholdConfig,
    pub manifest: Option<PathBuf>,
    pub sbr: Option<PathBuf>,
    pub cv: CvSection,
    pub svm: SvmConfig,
    pub forest: ForestConfig,
    pub boost: BoostConfig,
    pub importance: ForestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            alpha: 0.05,
            workers: 0,
            slices: SliceWindow::default(),
            side: SideCombination::Mean,
            radiological: false,
            absolute_ai: false,
            min_area: SegmentOptions::default().min_area,
            threshold: ThresholdConfig::default(),
            manifest: None,
            sbr: None,
            cv: CvSection::default(),
            svm: SvmConfig::default(),
            forest: ForestConfig::default(),
            boost: BoostConfig::default(),
            importance: ForestConfig::importance(),
        }
    }
}

impl RunConfig {
    /// Reads `.toml` or `.json`. Relative file references resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
            _ => toml::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
        };
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.manifest, &mut cfg.sbr].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Invalid(m));
        if self.cv.k < 2 {
            return bad(format!("cv.k must be at least 2, got {}", self.cv.k));
        }
        if self.cv.repeats < 1 {
            return bad("cv.repeats must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        match (self.threshold.mode, self.threshold.value) {
            (ThresholdKind::Fixed, None) => return bad("threshold.mode = fixed needs threshold.value".into()),
            (_, Some(t)) if !(t > 0.0 && t < 1.0) => {
                return bad(format!("threshold.value must lie in (0, 1), got {t}"))
            }
            _ => {}
        }
        for name in &self.cv.classifiers {
            if ClassifierConfig::from_name(name).is_none() {
                return bad(format!("unknown classifier {name:?}"));
            }
        }
        if self.cv.classifiers.is_empty() {
            return bad("cv.classifiers is empty".into());
        }
        self.svm.validate().map_err(|e| CliError::Invalid(format!("svm: {e}")))?;
        self.forest.validate().map_err(|e| CliError::Invalid(format!("forest: {e}")))?;
        self.boost.validate().map_err(|e| CliError::Invalid(format!("boost: {e}")))?;
        self.importance
            .validate()
            .map_err(|e| CliError::Invalid(format!("importance: {e}")))?;
        for p in [&self.manifest, &self.sbr].into_iter().flatten() {
            if !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// Classifier configs named in `cv.classifiers`, carrying this config's
    /// parameter sections.
    pub fn classifiers(&self) -> Vec<ClassifierConfig> {
        self.cv
            .classifiers
            .iter()
            .filter_map(|n| ClassifierConfig::from_name(n))
            .map(|c| match c {
                ClassifierConfig::Svm(_) => ClassifierConfig::Svm(self.svm),
                ClassifierConfig::Forest(_) => ClassifierConfig::Forest(self.forest),
                ClassifierConfig::Boost(_) => ClassifierConfig::Boost(self.boost),
                other => other,
            })
            .collect()
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            window: self.slices,
            threshold: match (self.threshold.mode, self.threshold.value) {
                (ThresholdKind::Fixed, Some(t)) => ThresholdMode::Fixed(t),
                _ => ThresholdMode::Auto,
            },
            segment: SegmentOptions {
                min_area: self.min_area,
                radiological: self.radiological,
            },
            shape: ShapeOptions {
                combine: self.side,
                absolute_ai: self.absolute_ai,
            },
        }
    }

    /// Fills in a random seed when none is set. Returns true if one was drawn.
    pub fn resolve_seed(&mut self) -> bool {
        if self.seed.is_some() {
            return false;
        }
        self.seed = Some(rand::random::<u64>() >> 11);
        true
    }

    pub fn seed_or_zero(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// SHA-256 of the canonical JSON form, ignoring the worker count.
    pub fn hash(&self) -> String {
        let canonical = Self { workers: 0, ..self.clone() };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        crate::provenance::hex(&Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.cv.k, cfg.cv.repeats, cfg.alpha), (10, 100, 0.05));
        assert_eq!(cfg.importance.n_trees, 75);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = RunConfig::default();
        cfg.cv.k = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.cv.repeats = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.threshold.mode = ThresholdKind::Fixed;
        assert!(cfg.validate().is_err());
        cfg.threshold.value = Some(1.5);
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.cv.classifiers = vec!["knn".into()];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.sbr = Some("/nonexistent/sbr.csv".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = Some(9);
        cfg.slices = SliceWindow::new(0, 13);
        cfg.threshold = ThresholdConfig {
            mode: ThresholdKind::PerSubject,
            value: None,
        };
        cfg.cv.classifiers = vec!["svm".into(), "forest".into()];
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 3\nslices = \"0:13\"\n[cv]\nrepeats = 2\n").unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.cv.k, 10);
        assert_eq!(cfg.cv.repeats, 2);
        assert!(toml::from_str::<RunConfig>("sead = 3").is_err());
    }

    #[test]
    fn hash_ignores_workers() {
        let a = RunConfig::default();
        let b = RunConfig { workers: 7, ..a.clone() };
        let c = RunConfig { alpha: 0.01, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
