use super::boost::{train_boost, BoostConfig, BoostModel};
use super::dataset::Dataset;
use super::forest::{train_forest, ForestConfig, ForestModel};
use super::gnb::{train_gnb, GnbModel};
use super::svm::{train_svm, SvmConfig, SvmModel};
use super::{Classifier, ClassifyError};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    Svm(SvmConfig),
    NaiveBayes,
    Forest(ForestConfig),
    Boost(BoostConfig),
}

impl ClassifierConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Svm(_) => "svm",
            Self::NaiveBayes => "naive_bayes",
            Self::Forest(_) => "forest",
            Self::Boost(_) => "boost",
        }
    }

    /// Default configuration for `svm`, `naive_bayes` (or `gnb`), `forest`, `boost`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "svm" => Some(Self::Svm(SvmConfig::default())),
            "naive_bayes" | "gnb" | "nb" => Some(Self::NaiveBayes),
            "forest" | "rf" => Some(Self::Forest(ForestConfig::default())),
            "boost" | "boosted_trees" => Some(Self::Boost(BoostConfig::default())),
            _ => None,
        }
    }

    /// The four classifiers with their default settings.
    pub fn all() -> [Self; 4] {
        [
            Self::Svm(SvmConfig::default()),
            Self::NaiveBayes,
            Self::Forest(ForestConfig::default()),
            Self::Boost(BoostConfig::default()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum TrainedModel<T: Real> {
    Svm(SvmModel<T>),
    NaiveBayes(GnbModel<T>),
    Forest(ForestModel<T>),
    Boost(BoostModel<T>),
}

/// Trains the configured classifier; `seed` only matters for the forest.
pub fn train<T: Real>(
    cfg: &ClassifierConfig,
    data: &Dataset<T>,
    seed: u64,
) -> Result<TrainedModel<T>, ClassifyError> {
    Ok(match cfg {
        ClassifierConfig::Svm(c) => TrainedModel::Svm(train_svm(data, c)?),
        ClassifierConfig::NaiveBayes => TrainedModel::NaiveBayes(train_gnb(data)?),
        ClassifierConfig::Forest(c) => TrainedModel::Forest(train_forest(data, c, seed)?),
        ClassifierConfig::Boost(c) => TrainedModel::Boost(train_boost(data, c)?),
    })
}

impl<T: Real> Classifier<T> for TrainedModel<T> {
    fn score(&self, row: &[T]) -> T {
        match self {
            Self::Svm(m) => m.score(row),
            Self::NaiveBayes(m) => m.score(row),
            Self::Forest(m) => m.score(row),
            Self::Boost(m) => m.score(row),
        }
    }

    fn predict(&self, row: &[T]) -> bool {
        match self {
            Self::Svm(m) => m.predict(row),
            Self::NaiveBayes(m) => m.predict(row),
            Self::Forest(m) => m.predict(row),
            Self::Boost(m) => m.predict(row),
        }
    }
}

/// Versioned JSON envelope for a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ModelDocument<T: Real> {
    pub format_version: u32,
    pub column_ids: Vec<String>,
    pub model: TrainedModel<T>,
}

impl<T: Real> ModelDocument<T> {
    pub fn new(column_ids: Vec<String>, model: TrainedModel<T>) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            column_ids,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        let doc: Self =
            serde_json::from_str(text).map_err(|e| ClassifyError::InvalidConfig(e.to_string()))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ClassifyError::InvalidConfig(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset<f64> {
        let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64, ((i * 5) % 7) as f64]).collect();
        Dataset::from_rows(&rows, (0..24).map(|i| i >= 12).collect()).unwrap()
    }

    #[test]
    fn every_model_round_trips_through_json() {
        let d = toy();
        for cfg in ClassifierConfig::all() {
            let m = train(&cfg, &d, 3).unwrap();
            let doc = ModelDocument::new(d.column_ids().to_vec(), m.clone());
            let back = ModelDocument::<f64>::from_json(&doc.to_json()).unwrap();
            for i in 0..d.n_rows() {
                assert_eq!(back.model.score(d.row(i)), m.score(d.row(i)), "{}", cfg.name());
            }
        }
    }

    #[test]
    fn version_is_checked() {
        let d = toy();
        let doc = ModelDocument::new(vec![], train(&ClassifierConfig::NaiveBayes, &d, 0).unwrap());
        let text = doc.to_json().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(ModelDocument::<f64>::from_json(&text).is_err());
    }

    #[test]
    fn names() {
        for cfg in ClassifierConfig::all() {
            assert_eq!(ClassifierConfig::from_name(cfg.name()), Some(cfg));
        }
        assert_eq!(ClassifierConfig::from_name("knn"), None);
        let js = serde_json::to_string(&ClassifierConfig::from_name("svm").unwrap()).unwrap();
        assert!(js.contains("\"kind\":\"svm\"") && js.contains("\"gamma\":0.0625"));
    }
}
