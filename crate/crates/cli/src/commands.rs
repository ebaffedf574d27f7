use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use prc_forest::autoencoder::{AeConfig, Optimizer, TrainingPopulation};
use prc_forest::data::{self, CsvOptions, PositiveRule};
use prc_forest::pipeline::{self, Algorithm, BenchmarkConfig, TrainedModel};
use prc_forest::seed::derive_seed;
use prc_forest::{forest, Dataset, ForestParams, SplitSpec, TreeParams};
use rayon::prelude::*;

use crate::args::{
    AeArgs, BenchmarkArgs, Cli, Command, DataArgs, FilterArgs, ForestArgs, InspectArgs,
    OptimizerArg, Population, PredictArgs, TrainArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Inspect(args) => inspect(&args),
        Command::Train(args) => with_threads(args.run.threads, || train(&args)),
        Command::Predict(args) => with_threads(args.threads, || predict(&args)),
        Command::Filter(args) => with_threads(args.run.threads, || filter(&args)),
        Command::Benchmark(args) => with_threads(args.run.threads, || benchmark(&args)),
    }
}

fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot start worker threads")?;
    pool.install(job)
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .with_context(|| format!("delimiter {c:?} is not a single ASCII character"))
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let options = CsvOptions {
        target_column: args.target.clone(),
        positive: args.positive_label.parse::<PositiveRule>()?,
        delimiter: delimiter_byte(args.delimiter)?,
        drop_columns: args.drop_columns.clone(),
    };
    Ok(data::load_csv_with(&args.data, &options)?)
}

fn forest_params(args: &ForestArgs, n_features: usize, master_seed: u64) -> Result<ForestParams> {
    let n_features_per_split = args
        .n_features
        .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1));
    let tree_params = TreeParams {
        max_depth: args.max_depth,
        min_leaf_size: args.min_leaf,
        n_features_per_split,
        rng_seed: 0,
    };
    tree_params.validate(n_features)?;
    if args.n_trees == 0 {
        bail!("--n-trees must be at least 1");
    }
    Ok(ForestParams {
        n_trees: args.n_trees,
        tree_params,
        master_seed,
    })
}

fn ae_config(args: &AeArgs, n_features: usize, seed: u64) -> Result<AeConfig> {
    let mut config = if args.ae_widths.is_empty() {
        AeConfig::default_for(n_features)
    } else {
        if args.ae_widths[0] != n_features {
            bail!(
                "--ae-widths starts with {} but the data has {n_features} features",
                args.ae_widths[0]
            );
        }
        AeConfig::with_widths(args.ae_widths.clone())
    };
    config.epochs = args.ae_epochs;
    config.batch_size = args.ae_batch;
    config.learning_rate = args.ae_lr;
    config.filter_quantile = args.ae_quantile;
    config.seed = seed;
    config.training_population = match args.ae_population {
        Population::All => TrainingPopulation::AllRows,
        Population::Majority => TrainingPopulation::MajorityClass,
    };
    config.optimizer = match args.ae_optimizer {
        OptimizerArg::Adam => Optimizer::Adam,
        OptimizerArg::Sgd => Optimizer::Sgd,
    };
    config.validate()?;
    Ok(config)
}

/// Writes every file under a temporary name first and renames them only once
/// all writes succeeded, so a failure leaves no partial artifact behind.
fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    let result = (|| {
        for (path, bytes) in files {
            let tmp = temp_path(path);
            staged.push(tmp.clone());
            fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        }
        for ((path, _), tmp) in files.iter().zip(&staged) {
            fs::rename(tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(())
    })();
    if result.is_err() {
        for tmp in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.{}.tmp", std::process::id()))
}

fn inspect(args: &InspectArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let summary = data::summarize(&dataset);
    println!("dataset,observations,minority_fraction,features");
    println!("{summary}");
    if args.common.verbose > 0 {
        let (neg, pos) = dataset.class_counts();
        eprintln!("positive rows {pos}, negative rows {neg}");
    }
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let p = dataset.n_features();
    let params = forest_params(&args.forest, p, derive_seed(args.run.seed, 1))?;

    let (model, forest, flagged) = if args.ae {
        let config = ae_config(&args.autoencoder, p, derive_seed(args.run.seed, 2))?;
        let trained = pipeline::train_ae_prc_rf(&dataset, &config, &params)?;
        let model = TrainedModel::ae_prc_rf(&trained.forest, &trained.autoencoder);
        let flagged = trained.report.flagged_rows.len();
        (
            model,
            trained.forest,
            Some((flagged, trained.report.threshold)),
        )
    } else {
        let forest = forest::build_forest(&dataset, &params)?;
        (TrainedModel::prc_rf(&forest), forest, None)
    };
    write_all(&[(args.out.clone(), model.to_json()?.into_bytes())])?;

    let (neg, pos) = dataset.class_counts();
    let algorithm = if args.ae {
        Algorithm::AePrcRf
    } else {
        Algorithm::PrcRf
    };
    println!(
        "trained {} on {} rows ({pos} positive, {neg} negative), {p} features, {} trees",
        algorithm.display_name(),
        dataset.n_rows(),
        forest.trees().len()
    );
    if let Some((flagged, threshold)) = flagged {
        let threshold = threshold.map_or_else(|| "none".to_string(), |t| format!("{t:.6}"));
        println!("autoencoder flagged {flagged} rows (threshold {threshold})");
    }
    println!("model written to {}", args.out.display());
    if args.common.verbose > 0 {
        let mut importance: Vec<(String, f64)> = forest.feature_importance().into_iter().collect();
        importance.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (name, value) in importance.iter().take(10) {
            eprintln!("{value:.4}  {name}");
        }
    }
    Ok(())
}

fn predict(args: &PredictArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("cannot read model {}", args.model.display()))?;
    let forest = TrainedModel::from_json(&text)?.forest()?;

    let mut skip = args.drop_columns.clone();
    skip.extend(args.target.clone());
    let (names, rows) =
        data::load_feature_table(&args.data, delimiter_byte(args.delimiter)?, &skip)?;
    if names.len() != forest.n_features() {
        bail!(
            "feature file has {} columns but the model expects {}",
            names.len(),
            forest.n_features()
        );
    }
    if let Some((found, expected)) = names
        .iter()
        .zip(forest.feature_names())
        .find(|(found, expected)| found != expected)
    {
        bail!("feature column `{found}` does not match model feature `{expected}`");
    }

    let predictions = rows
        .par_iter()
        .map(|row| forest.predict(row))
        .collect::<prc_forest::Result<Vec<_>>>()?;
    let mut out = String::from("prediction,vote_fraction\n");
    for (label, fraction) in &predictions {
        out.push_str(&format!("{},{fraction}\n", label.code()));
    }
    write_all(&[(args.out.clone(), out.into_bytes())])?;
    if args.common.verbose > 0 {
        let positives = predictions.iter().filter(|(l, _)| l.is_positive()).count();
        eprintln!("{} rows, {positives} predicted positive", predictions.len());
    }
    Ok(())
}

fn flagged_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "filtered".to_string());
    out.with_file_name(format!("{stem}.flagged.txt"))
}

fn filter(args: &FilterArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let config = ae_config(
        &args.autoencoder,
        dataset.n_features(),
        derive_seed(args.run.seed, 2),
    )?;
    let (filtered, _model, report) = pipeline::autoencoder_filter(&dataset, &config)?;

    let mut cleaned = Vec::new();
    data::write_csv(
        &filtered,
        &mut cleaned,
        &args.data.target,
        delimiter_byte(args.data.delimiter)?,
    )?;
    let flagged: String = report
        .flagged_rows
        .iter()
        .map(|i| format!("{i}\n"))
        .collect();
    let flagged_out = flagged_path(&args.out);
    write_all(&[
        (args.out.clone(), cleaned),
        (flagged_out.clone(), flagged.into_bytes()),
    ])?;

    let threshold = report
        .threshold
        .map_or_else(|| "none".to_string(), |t| format!("{t:.6}"));
    println!(
        "flagged {} of {} rows (threshold {threshold}); kept {}",
        report.flagged_rows.len(),
        dataset.n_rows(),
        filtered.n_rows()
    );
    println!(
        "cleaned data written to {}, flagged rows to {}",
        args.out.display(),
        flagged_out.display()
    );
    if args.common.verbose > 0 {
        if let Some(last) = report.epoch_losses.last() {
            eprintln!("final epoch loss {last:.6}");
        }
    }
    Ok(())
}

fn with_suffix(prefix: &Path, extension: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(extension);
    PathBuf::from(name)
}

fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let p = dataset.n_features();
    let algorithms = args
        .algorithms
        .iter()
        .map(|a| a.parse::<Algorithm>())
        .collect::<prc_forest::Result<Vec<_>>>()?;
    let mut config = BenchmarkConfig {
        algorithms,
        repetitions: args.repetitions,
        split: SplitSpec {
            test_fraction: args.test_fraction,
            seed: 0,
            stratified: !args.unstratified,
        },
        ae_config: ae_config(&args.autoencoder, p, 0)?,
        forest_params: forest_params(&args.forest, p, 0)?,
    };
    config.reseed(args.run.seed);

    let report = pipeline::run_benchmark(&dataset, &config)?;
    let table = report.to_table();
    let txt = with_suffix(&args.out, ".txt");
    let csv = with_suffix(&args.out, ".csv");
    write_all(&[
        (txt.clone(), table.clone().into_bytes()),
        (csv.clone(), report.to_csv().into_bytes()),
    ])?;
    println!("{table}");
    println!("report written to {} and {}", txt.display(), csv.display());
    if args.common.verbose > 0 {
        for failure in &report.failures {
            eprintln!(
                "repetition {} failed: {}",
                failure.repetition, failure.message
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_paths() {
        assert_eq!(
            with_suffix(Path::new("out/bench"), ".csv"),
            PathBuf::from("out/bench.csv")
        );
        assert_eq!(
            flagged_path(Path::new("dir/clean.csv")),
            PathBuf::from("dir/clean.flagged.txt")
        );
        assert_eq!(
            temp_path(Path::new("a/m.json")).parent(),
            Some(Path::new("a"))
        );
    }

    #[test]
    fn delimiter_must_be_ascii() {
        assert_eq!(delimiter_byte(';').unwrap(), b';');
        assert!(delimiter_byte('é').is_err());
    }

    #[test]
    fn default_features_per_split() {
        let args = ForestArgs {
            n_trees: 1,
            max_depth: 3,
            min_leaf: 1,
            n_features: None,
        };
        assert_eq!(
            forest_params(&args, 30, 0)
                .unwrap()
                .tree_params
                .n_features_per_split,
            5
        );
        assert_eq!(
            forest_params(&args, 83, 0)
                .unwrap()
                .tree_params
                .n_features_per_split,
            9
        );
    }
}
