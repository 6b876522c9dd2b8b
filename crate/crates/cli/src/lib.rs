//! Command-line front end. Every subcommand reads an experiment config,
//! writes its artifacts under `--out` and records them in `manifest.json`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use trajuq::dataset::write_scene_dir;
use trajuq::ensemble::write_prediction_dump;
use trajuq::experiment::{
    add_analysis, add_retention, build_datasets, emit_report, evaluate_windows, prepare_dataset, read_eval_csv,
    retention_from_eval, run_cross_dataset, train_members, write_eval_csv, write_matrix_csv, heatmap_svg,
    ExperimentConfig, Manifest, PreparedDataset, Predictor,
};
use trajuq::features::{feature_table, write_feature_csv};
use trajuq::predictor::{read_checkpoint, train, write_checkpoint, ModelParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

const MODELS_FILE: &str = "models.json";

#[derive(Debug, Parser)]
#[command(name = "trajuq", version, about = "Trajectory prediction uncertainty workbench")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the config's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Run on a single worker thread.
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Debug, Args)]
struct DatasetArg {
    /// Dataset name; defaults to the first configured dataset.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the configured datasets as scene directories.
    Synth,
    /// Feature table of every window of every dataset.
    Features,
    /// Train one model, or an ensemble with --ensemble K.
    Train {
        #[arg(long, value_name = "K")]
        ensemble: Option<usize>,
        #[command(flatten)]
        data: DatasetArg,
    },
    /// Predict the test windows of a dataset with saved models.
    Predict {
        #[arg(long, value_name = "DIR")]
        models: PathBuf,
        #[command(flatten)]
        data: DatasetArg,
    },
    /// Per-window ADE/FDE and entropies, plus the prediction dump.
    Eval {
        #[arg(long, value_name = "DIR")]
        models: PathBuf,
        #[command(flatten)]
        data: DatasetArg,
    },
    /// Retention curves, AUC and scores from an eval.csv.
    Retention {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
    },
    /// Correlation and importance of features against an eval.csv.
    Analyze {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        #[command(flatten)]
        data: DatasetArg,
    },
    /// Train on each dataset, test on every dataset.
    Cross,
    /// Cross-dataset run plus retention and feature analyses.
    Report,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let Some(config) = cli.global.config.clone() else {
        eprintln!("error: --config <FILE> is required\n\nUsage: trajuq --config <FILE> [--out <DIR>] <COMMAND>");
        return EXIT_USAGE;
    };
    let result = if cli.global.serial {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| execute(&cli, &config)))
    } else {
        execute(&cli, &config)
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn select_dataset(cfg: &ExperimentConfig, name: Option<&str>) -> Result<PreparedDataset> {
    let datasets = build_datasets(cfg)?;
    let (n, scene) = match name {
        Some(n) => datasets
            .iter()
            .find(|(d, _)| d == n)
            .ok_or_else(|| anyhow!("no dataset named {n:?}"))?,
        None => datasets.first().ok_or_else(|| anyhow!("no datasets configured"))?,
    };
    Ok(prepare_dataset(n, scene, cfg)?)
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut b = Vec::new();
    f(&mut b)?;
    Ok(b)
}

fn load_predictor(dir: &Path, cfg: &ExperimentConfig) -> Result<Predictor> {
    let listing: serde_json::Value = serde_json::from_reader(BufReader::new(
        File::open(dir.join(MODELS_FILE)).with_context(|| format!("reading {}", dir.join(MODELS_FILE).display()))?,
    ))?;
    let files = listing["members"].as_array().ok_or_else(|| anyhow!("{MODELS_FILE}: missing members"))?;
    let mut members: Vec<ModelParams> = Vec::new();
    for f in files {
        let name = f.as_str().ok_or_else(|| anyhow!("{MODELS_FILE}: bad member entry"))?;
        let mut r = BufReader::new(File::open(dir.join(name))?);
        members.push(read_checkpoint(&mut r).with_context(|| format!("reading {name}"))?);
    }
    match members.len() {
        0 => bail!("no models in {}", dir.display()),
        1 if members[0].dropout_rate > 0.0 => Ok(Predictor::McDropout {
            params: members.pop().unwrap(),
            passes: cfg.ensemble_k,
            seed: cfg.seed,
        }),
        1 => bail!("a single model needs dropout for uncertainty; train with --ensemble K"),
        _ => Ok(Predictor::Ensemble(members)),
    }
}

fn execute(cli: &Cli, config: &Path) -> Result<()> {
    let cfg = load_config(config, cli.global.seed)?;
    let out = &cli.global.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = Manifest::new(&cfg);
    match &cli.command {
        Command::Synth => {
            for (name, scene) in build_datasets(&cfg)? {
                let dir = out.join(&name);
                write_scene_dir(&dir, &scene)?;
                for f in ["tracks.csv", "map.json", "signals.json"] {
                    let p = dir.join(f);
                    if p.exists() {
                        let bytes = std::fs::read(&p)?;
                        manifest.add(out, &format!("{name}/{f}"), &bytes)?;
                    }
                }
            }
        }
        Command::Features => {
            let mut rows = Vec::new();
            for (name, scene) in build_datasets(&cfg)? {
                let p = prepare_dataset(&name, &scene, &cfg)?;
                let windows: Vec<_> = p.split.train.iter().chain(&p.split.test).cloned().collect();
                rows.extend(feature_table(&p.scene, &windows, &cfg.features)?);
            }
            let radii = &cfg.features.interaction.radii_m;
            manifest.add(out, "features.csv", &csv_bytes(|b| Ok(write_feature_csv(b, &rows, radii)?))?)?;
        }
        Command::Train { ensemble, data } => {
            let p = select_dataset(&cfg, data.dataset.as_deref())?;
            let members = match ensemble {
                Some(k) => train_members(&p.split.train, &ExperimentConfig { ensemble_k: *k, ..cfg.clone() }, 0)?,
                None => vec![train(&p.split.train, &cfg.model, &cfg.training_config())?.0],
            };
            let mut names = Vec::new();
            for (k, m) in members.iter().enumerate() {
                let name = format!("member_{k:02}.ckpt");
                let mut bytes = Vec::new();
                write_checkpoint(&mut bytes, m)?;
                manifest.add(out, &name, &bytes)?;
                names.push(name);
            }
            let listing = serde_json::json!({ "dataset": p.name, "members": names });
            manifest.add(out, MODELS_FILE, serde_json::to_string_pretty(&listing)?.as_bytes())?;
        }
        Command::Predict { models, data } | Command::Eval { models, data } => {
            let predictor = load_predictor(models, &cfg)?;
            let p = select_dataset(&cfg, data.dataset.as_deref())?;
            let evals = evaluate_windows(&predictor, &p.split.test, cfg.variance_floor)?;
            let dump: Vec<_> = evals.iter().map(|e| (e.row.window_id.clone(), e.prediction.clone())).collect();
            manifest.add(out, "predictions.csv", &csv_bytes(|b| Ok(write_prediction_dump(b, &dump)?))?)?;
            if matches!(cli.command, Command::Eval { .. }) {
                let rows: Vec<_> = evals.into_iter().map(|e| e.row).collect();
                manifest.add(out, "eval.csv", &csv_bytes(|b| Ok(write_eval_csv(b, &rows)?))?)?;
            }
        }
        Command::Retention { input } => {
            let rows = read_eval_csv(File::open(input).with_context(|| format!("opening {}", input.display()))?)?;
            add_retention(&mut manifest, out, &retention_from_eval(&rows, cfg.uncertainty)?)?;
        }
        Command::Analyze { input, data } => {
            let rows = read_eval_csv(File::open(input).with_context(|| format!("opening {}", input.display()))?)?;
            let p = select_dataset(&cfg, data.dataset.as_deref())?;
            let by_id: std::collections::HashMap<String, &_> = p.split.test.iter().map(|w| (w.id(), w)).collect();
            let windows = rows
                .iter()
                .map(|r| by_id.get(&r.window_id).map(|w| (*w).clone()).ok_or_else(|| anyhow!("unknown window {}", r.window_id)))
                .collect::<Result<Vec<_>>>()?;
            let features = feature_table(&p.scene, &windows, &cfg.features)?;
            add_analysis(&mut manifest, out, &cfg, &features, &rows)?;
        }
        Command::Cross => {
            let run = run_cross_dataset(&build_datasets(&cfg)?, &cfg)?;
            let m = &run.matrix;
            for (name, mat) in m.named() {
                manifest.add(out, &format!("cross_{name}.csv"), &csv_bytes(|b| Ok(write_matrix_csv(b, &m.names, mat)?))?)?;
                manifest.add(out, &format!("heatmap_{name}.svg"), heatmap_svg(name, &m.names, mat).as_bytes())?;
            }
        }
        Command::Report => {
            let run = run_cross_dataset(&build_datasets(&cfg)?, &cfg)?;
            emit_report(&run, &cfg, out)?;
            return Ok(());
        }
    }
    manifest.write(out)?;
    Ok(())
}
