//! Autoencoder-filtered PRC forest, evaluation metrics and the repeated
//! random-split benchmark.

use std::collections::hash_map::DefaultHasher;
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{self, AeConfig, AutoencoderModel, TrainReport};
use crate::data::{self, Dataset, DatasetSummary, Label, SplitSpec};
use crate::forest::{self, ForestParams, PrcForest};
use crate::seed::derive_seed;
use crate::{Error, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(predicted: &[Label], actual: &[Label]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::LengthMismatch {
                expected: actual.len(),
                found: predicted.len(),
            });
        }
        if actual.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut c = ConfusionCounts::default();
        for (p, a) in predicted.iter().zip(actual) {
            match (p.is_positive(), a.is_positive()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// 0/0 ratios that were reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndefinedRatios {
    /// No actual positives (recall).
    pub recall: bool,
    /// No actual negatives (specificity).
    pub specificity: bool,
    /// No predicted positives (precision).
    pub precision: bool,
}

impl UndefinedRatios {
    pub fn any(&self) -> bool {
        self.recall || self.specificity || self.precision
    }
}

impl fmt::Display for UndefinedRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.recall, "recall"),
            (self.specificity, "specificity"),
            (self.precision, "precision"),
        ]
        .into_iter()
        .filter_map(|(set, name)| set.then_some(name))
        .collect();
        f.write_str(&names.join("|"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub recall: f64,
    pub specificity: f64,
    pub precision: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub undefined: UndefinedRatios,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl MetricSet {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let (recall, no_pos) = ratio(c.tp, c.tp + c.fn_);
        let (specificity, no_neg) = ratio(c.tn, c.tn + c.fp);
        let (precision, no_pred) = ratio(c.tp, c.tp + c.fp);
        let (accuracy, _) = ratio(c.tp + c.tn, c.total());
        MetricSet {
            recall,
            specificity,
            precision,
            accuracy,
            f1: crate::prc::harmonic_mean(precision, recall),
            undefined: UndefinedRatios {
                recall: no_pos,
                specificity: no_neg,
                precision: no_pred,
            },
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.recall,
            self.specificity,
            self.precision,
            self.accuracy,
            self.f1,
        ]
    }
}

pub fn compute_metrics(predicted: &[Label], actual: &[Label]) -> Result<MetricSet> {
    Ok(MetricSet::from_counts(&ConfusionCounts::from_labels(
        predicted, actual,
    )?))
}

/// Field-wise arithmetic means over repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub recall: f64,
    pub specificity: f64,
    pub precision: f64,
    pub accuracy: f64,
    pub f1: f64,
}

impl MeanMetrics {
    pub fn of(sets: &[MetricSet]) -> Option<Self> {
        if sets.is_empty() {
            return None;
        }
        let n = sets.len() as f64;
        let mut sum = [0.0; 5];
        for s in sets {
            for (acc, v) in sum.iter_mut().zip(s.values()) {
                *acc += v;
            }
        }
        Some(MeanMetrics {
            recall: sum[0] / n,
            specificity: sum[1] / n,
            precision: sum[2] / n,
            accuracy: sum[3] / n,
            f1: sum[4] / n,
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.recall,
            self.specificity,
            self.precision,
            self.accuracy,
            self.f1,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "PRC-RF")]
    PrcRf,
    #[serde(rename = "AE-PRC-RF")]
    AePrcRf,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::PrcRf => "PRC-RF",
            Algorithm::AePrcRf => "AE-PRC-RF",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::PrcRf => "PRC-RF",
            Algorithm::AePrcRf => "Autoencoder-PRC-RF",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prc-rf" | "prcrf" => Ok(Algorithm::PrcRf),
            "ae-prc-rf" | "aeprcrf" | "autoencoder-prc-rf" => Ok(Algorithm::AePrcRf),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm `{other}`"
            ))),
        }
    }
}

/// Forest trained on the autoencoder-filtered training set, with the
/// autoencoder and its report kept for audit.
#[derive(Debug, Clone)]
pub struct AePrcRf {
    pub forest: PrcForest,
    pub autoencoder: AutoencoderModel,
    pub report: TrainReport,
}

/// Trains, thresholds and applies the autoencoder filter to `train`.
pub fn autoencoder_filter(
    train: &Dataset,
    ae_config: &AeConfig,
) -> Result<(Dataset, AutoencoderModel, TrainReport)> {
    let mut model = autoencoder::ae_init(ae_config, train.n_features())?;
    let mut report = autoencoder::ae_train(&mut model, train)?;
    report.threshold = Some(autoencoder::fit_threshold(&mut model, train)?);
    let (filtered, flagged) = autoencoder::filter_dataset(&model, train)?;
    report.flagged_rows = flagged;
    Ok((filtered, model, report))
}

pub fn train_ae_prc_rf(
    train: &Dataset,
    ae_config: &AeConfig,
    forest_params: &ForestParams,
) -> Result<AePrcRf> {
    if !train.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let (filtered, autoencoder, report) = autoencoder_filter(train, ae_config)?;
    let forest = forest::build_forest(&filtered, forest_params)?;
    Ok(AePrcRf {
        forest,
        autoencoder,
        report,
    })
}

/// Model file written by the `train` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainedModel {
    PrcRf {
        schema_version: u32,
        forest: crate::forest::ForestRecord,
    },
    AePrcRf {
        schema_version: u32,
        forest: crate::forest::ForestRecord,
        autoencoder: AutoencoderModel,
    },
}

impl TrainedModel {
    pub fn prc_rf(forest: &PrcForest) -> Self {
        TrainedModel::PrcRf {
            schema_version: SCHEMA_VERSION,
            forest: forest.to_record(),
        }
    }

    pub fn ae_prc_rf(forest: &PrcForest, autoencoder: &AutoencoderModel) -> Self {
        TrainedModel::AePrcRf {
            schema_version: SCHEMA_VERSION,
            forest: forest.to_record(),
            autoencoder: autoencoder.clone(),
        }
    }

    pub fn forest(&self) -> Result<PrcForest> {
        let (version, record) = match self {
            TrainedModel::PrcRf {
                schema_version,
                forest,
            }
            | TrainedModel::AePrcRf {
                schema_version,
                forest,
                ..
            } => (*schema_version, forest),
        };
        if version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        PrcForest::from_record(record)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub algorithms: Vec<Algorithm>,
    pub repetitions: usize,
    /// `seed` is the master seed for the per-repetition split seeds.
    pub split: SplitSpec,
    /// `seed` is the master seed for the per-repetition autoencoder seeds.
    pub ae_config: AeConfig,
    /// `master_seed` is the master for the per-repetition forest seeds.
    pub forest_params: ForestParams,
}

/// Seeds used by one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionSeeds {
    pub split: u64,
    pub forest: u64,
    pub autoencoder: u64,
}

impl BenchmarkConfig {
    /// Derives the split, forest and autoencoder master seeds from one seed.
    pub fn reseed(&mut self, master: u64) {
        self.split.seed = derive_seed(master, 0);
        self.forest_params.master_seed = derive_seed(master, 1);
        self.ae_config.seed = derive_seed(master, 2);
    }

    /// `derive_seed(master, repetition)` for each of the three streams.
    pub fn seeds(&self, repetition: usize) -> RepetitionSeeds {
        let r = repetition as u64;
        RepetitionSeeds {
            split: derive_seed(self.split.seed, r),
            forest: derive_seed(self.forest_params.master_seed, r),
            autoencoder: derive_seed(self.ae_config.seed, r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub counts: ConfusionCounts,
    pub metrics: MetricSet,
    /// Rows removed by the autoencoder (AE-PRC-RF only).
    pub flagged_rows: Option<usize>,
    /// Hash of the exact train and test partitions the algorithm received.
    pub partition_digest: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seeds: RepetitionSeeds,
    pub runs: Vec<AlgorithmRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionFailure {
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dataset: DatasetSummary,
    pub algorithms: Vec<Algorithm>,
    pub repetitions: usize,
    pub results: Vec<RepetitionResult>,
    pub failures: Vec<RepetitionFailure>,
    pub means: Vec<(Algorithm, MeanMetrics)>,
}

fn partition_digest(train: &Dataset, test: &Dataset) -> u64 {
    let mut h = DefaultHasher::new();
    for part in [train, test] {
        part.n_rows().hash(&mut h);
        for v in part.features() {
            v.to_bits().hash(&mut h);
        }
        part.labels().hash(&mut h);
    }
    h.finish()
}

fn run_algorithm(
    algorithm: Algorithm,
    train: &Dataset,
    test: &Dataset,
    config: &BenchmarkConfig,
    seeds: &RepetitionSeeds,
) -> Result<AlgorithmRun> {
    let forest_params = ForestParams {
        master_seed: seeds.forest,
        ..config.forest_params
    };
    let (forest, flagged_rows) = match algorithm {
        Algorithm::PrcRf => (forest::build_forest(train, &forest_params)?, None),
        Algorithm::AePrcRf => {
            let ae_config = AeConfig {
                seed: seeds.autoencoder,
                ..config.ae_config.clone()
            };
            let model = train_ae_prc_rf(train, &ae_config, &forest_params)?;
            let flagged = model.report.flagged_rows.len();
            (model.forest, Some(flagged))
        }
    };
    let predicted: Vec<Label> = forest
        .predict_dataset(test)?
        .into_iter()
        .map(|(label, _)| label)
        .collect();
    let counts = ConfusionCounts::from_labels(&predicted, test.labels())?;
    Ok(AlgorithmRun {
        algorithm,
        counts,
        metrics: MetricSet::from_counts(&counts),
        flagged_rows,
        partition_digest: partition_digest(train, test),
    })
}

fn run_repetition(
    dataset: &Dataset,
    config: &BenchmarkConfig,
    repetition: usize,
) -> Result<RepetitionResult> {
    let seeds = config.seeds(repetition);
    let split = SplitSpec {
        seed: seeds.split,
        ..config.split
    };
    let (train, test) = data::train_test_split(dataset, &split)?;
    let runs = config
        .algorithms
        .iter()
        .map(|&a| run_algorithm(a, &train, &test, config, &seeds))
        .collect::<Result<Vec<_>>>()?;
    Ok(RepetitionResult {
        repetition,
        seeds,
        runs,
    })
}

/// Runs every algorithm on the same train/test partition for each
/// repetition. A failed repetition is excluded (and listed under
/// `failures`); more than 10% failures abort the run.
pub fn run_benchmark(dataset: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.repetitions == 0 {
        return Err(Error::InvalidParameter(
            "repetitions must be at least 1".into(),
        ));
    }
    if config.algorithms.is_empty() {
        return Err(Error::InvalidParameter("no algorithm selected".into()));
    }
    config.split.validate()?;

    let outcomes: Vec<Result<RepetitionResult>> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(dataset, config, r))
        .collect();

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (repetition, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(result) => results.push(result),
            Err(e) => failures.push(RepetitionFailure {
                repetition,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() * 10 > config.repetitions || results.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: config.repetitions,
            first: failures
                .first()
                .map(|f| format!("repetition {}: {}", f.repetition, f.message))
                .unwrap_or_default(),
        });
    }

    let means = config
        .algorithms
        .iter()
        .map(|&a| {
            let sets: Vec<MetricSet> = results
                .iter()
                .flat_map(|r| r.runs.iter().filter(|run| run.algorithm == a))
                .map(|run| run.metrics)
                .collect();
            (
                a,
                MeanMetrics::of(&sets).expect("at least one repetition succeeded"),
            )
        })
        .collect();

    Ok(BenchmarkReport {
        dataset: data::summarize(dataset),
        algorithms: config.algorithms.clone(),
        repetitions: config.repetitions,
        results,
        failures,
        means,
    })
}

impl BenchmarkReport {
    pub fn mean(&self, algorithm: Algorithm) -> Option<&MeanMetrics> {
        self.means
            .iter()
            .find(|(a, _)| *a == algorithm)
            .map(|(_, m)| m)
    }

    /// Aligned table of mean metrics, 4 decimal places.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let s = &self.dataset;
        let _ = writeln!(
            out,
            "Dataset: {}  observations: {}  minority fraction: {:.4}  features: {}",
            s.name, s.n_observations, s.minority_fraction, s.n_features
        );
        let _ = writeln!(
            out,
            "Repetitions: {} ({} excluded)",
            self.repetitions,
            self.failures.len()
        );
        let _ = writeln!(
            out,
            "{:<20} {:>8} {:>11} {:>9} {:>8} {:>8}",
            "Algorithms", "Recall", "Specificity", "Precision", "Accuracy", "F1 Score"
        );
        for (algorithm, m) in &self.means {
            let _ = writeln!(
                out,
                "{:<20} {:>8.4} {:>11.4} {:>9.4} {:>8.4} {:>8.4}",
                algorithm.display_name(),
                m.recall,
                m.specificity,
                m.precision,
                m.accuracy,
                m.f1
            );
        }
        for failure in &self.failures {
            let _ = writeln!(
                out,
                "warning: repetition {} excluded: {}",
                failure.repetition, failure.message
            );
        }
        out
    }

    /// One delimited record per algorithm and repetition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "algorithm,repetition,recall,specificity,precision,accuracy,f1,seed,undefined\n",
        );
        for result in &self.results {
            for run in &result.runs {
                let m = &run.metrics;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    run.algorithm,
                    result.repetition,
                    m.recall,
                    m.specificity,
                    m.precision,
                    m.accuracy,
                    m.f1,
                    result.seeds.split,
                    m.undefined
                );
            }
        }
        out
    }
}
