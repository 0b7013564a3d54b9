use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use viewcast::eval;
use viewcast::events::{assemble_corpus, read_events, Corpus};
use viewcast::features::{FeatureExtractor, FeatureMatrix, FeatureSpec};
use viewcast::harness::{run_experiment, ExperimentConfig};
use viewcast::learn::{fit_baseline_avg, fit_gbdt, fit_linear, GbdtParams, Model, ModelKind};
use viewcast::lim::{read_influence_sets, write_influence_sets, LimBank, LimConfig};
use viewcast::synth::{generate_corpus, SynthConfig};
use viewcast::{Target, TimeGrid};

/// Video popularity prediction toolkit.
#[derive(Parser)]
#[command(name = "viewcast", version)]
struct Cli {
    /// Overrides the seed of generator and split configs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EventsArgs {
    /// Event log (NDJSON); repeat for several files.
    #[arg(long = "events", required = true)]
    events: Vec<PathBuf>,
    #[arg(long, default_value_t = TimeGrid::DEFAULT_HORIZON)]
    horizon: u32,
}

impl EventsArgs {
    fn corpus(&self) -> Result<Corpus> {
        let events = read_events(&self.events)?;
        Ok(assemble_corpus(events, TimeGrid::new(self.horizon)?)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic corpus and write its event log.
    Generate {
        /// Generator config (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_videos: Option<usize>,
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Validate event logs and summarise the corpus.
    Ingest {
        #[command(flatten)]
        events: EventsArgs,
    },
    /// Extract a feature matrix as CSV.
    Features {
        #[command(flatten)]
        events: EventsArgs,
        #[arg(long = "set", default_value = "API")]
        feature_set: String,
        #[arg(long)]
        t_c: u32,
        /// Influence sets written by `train-lim`.
        #[arg(long)]
        lim: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit LIM influence functions.
    TrainLim {
        #[command(flatten)]
        events: EventsArgs,
        /// JSON config or list of configs; the default twelve-model bank otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model on a feature matrix.
    Train {
        #[arg(long, default_value = "gbdt")]
        model: String,
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        events: EventsArgs,
        #[arg(long)]
        target: String,
        #[arg(long)]
        target_day: u32,
        /// GBDT parameters (JSON).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model on a feature matrix.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        events: EventsArgs,
        #[arg(long)]
        target: String,
        #[arg(long)]
        target_day: u32,
    },
    /// Run an experiment config and write its report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Report directory; the config's output or --out-dir otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn targets_for(matrix: &FeatureMatrix, corpus: &Corpus, target: Target, day: u32) -> Result<Vec<f64>> {
    matrix
        .videos()
        .iter()
        .map(|id| {
            let v = corpus.get(id).with_context(|| format!("video {id} not in the event log"))?;
            Ok(viewcast::timeline::target_value(&v.timeline, target, day)?)
        })
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let out = |given: Option<PathBuf>, name: &str| given.unwrap_or_else(|| cli.out_dir.join(name));

    match cli.command {
        Command::Generate { config, n_videos, horizon } => {
            let mut cfg: SynthConfig = match config {
                Some(p) => read_json(&p)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(n) = n_videos {
                cfg.n_videos = n;
            }
            if let Some(h) = horizon {
                cfg.horizon_days = h;
            }
            let (corpus, truth) = generate_corpus(&cfg)?;
            corpus.write_events(cli.out_dir.join("events.ndjson"))?;
            std::fs::write(cli.out_dir.join("ground_truth.json"), serde_json::to_string(&truth)?)?;
            std::fs::write(cli.out_dir.join("synth_config.json"), serde_json::to_string_pretty(&cfg)?)?;
            println!("{}", json!({"videos": corpus.len(), "events": cli.out_dir.join("events.ndjson")}));
        }
        Command::Ingest { events } => {
            let corpus = events.corpus()?;
            let embedded = corpus.videos().iter().filter(|v| !v.embeds.is_empty()).count();
            let linked = corpus.videos().iter().filter(|v| !v.links.is_empty()).count();
            println!(
                "{}",
                json!({
                    "videos": corpus.len(),
                    "horizon_days": corpus.grid().horizon_days(),
                    "hosts": corpus.host_index().len(),
                    "categories": corpus.categories(),
                    "videos_with_embeds": embedded,
                    "videos_with_links": linked,
                })
            );
        }
        Command::Features { events, feature_set, t_c, lim, out: path } => {
            let corpus = events.corpus()?;
            let bank = lim.map(|p| -> Result<LimBank> { Ok(LimBank::new(read_influence_sets(p)?)?) }).transpose()?;
            let spec = FeatureSpec::parse(&feature_set)?;
            let matrix = FeatureExtractor::for_corpus(&corpus, bank.as_ref()).build(&corpus, &spec, t_c)?;
            let path = out(path, "features.csv");
            matrix.write_csv(&path)?;
            println!("{}", json!({"rows": matrix.n_rows(), "columns": matrix.n_cols(), "schema": matrix.schema_digest(), "path": path}));
        }
        Command::TrainLim { events, config, out: path } => {
            let corpus = events.corpus()?;
            let configs: Vec<LimConfig> = match config {
                None => LimConfig::default_bank([28, 56]),
                Some(p) => {
                    let value: serde_json::Value = read_json(&p)?;
                    if value.is_array() {
                        serde_json::from_value(value)?
                    } else {
                        vec![serde_json::from_value(value)?]
                    }
                }
            };
            let sets = configs
                .iter()
                .map(|c| Ok(viewcast::lim::train_lim(&corpus, c)?))
                .collect::<Result<Vec<_>>>()?;
            let path = out(path, "influence.ndjson");
            write_influence_sets(&path, &sets)?;
            let summary: Vec<_> = sets
                .iter()
                .map(|s| json!({"model": s.name(), "converged": s.converged, "iterations": s.iterations}))
                .collect();
            println!("{}", json!({"models": summary, "path": path}));
        }
        Command::Train { model, matrix, events, target, target_day, params, out: path } => {
            let corpus = events.corpus()?;
            let x = FeatureMatrix::read_csv(&matrix)?;
            let target: Target = target.parse()?;
            let y = targets_for(&x, &corpus, target, target_day)?;
            let kind: ModelKind = model.parse()?;
            let fitted = match kind {
                ModelKind::Gbdt => {
                    let mut p: GbdtParams = match params {
                        Some(p) => read_json(&p)?,
                        None => GbdtParams::default(),
                    };
                    if let Some(s) = cli.seed {
                        p.seed = s;
                    }
                    fit_gbdt(&x, &y, &p)?
                }
                ModelKind::Linear => fit_linear(&x, &y)?,
                ModelKind::BaselineAvg => fit_baseline_avg(&y)?,
            };
            let path = out(path, "model.json");
            fitted.save(&path)?;
            println!("{}", json!({"model": kind.as_str(), "rows": x.n_rows(), "path": path}));
        }
        Command::Evaluate { model, matrix, events, target, target_day } => {
            let corpus = events.corpus()?;
            let x = FeatureMatrix::read_csv(&matrix)?;
            let target: Target = target.parse()?;
            let y = targets_for(&x, &corpus, target, target_day)?;
            let m = Model::load(&model)?;
            let pred = m.predict(&x)?;
            let rmse = eval::rmse(&pred, &y)?;
            let ndcg = eval::ndcg100(x.videos(), &pred, &y)?;
            let mut report = BTreeMap::new();
            report.insert("rmse", rmse);
            report.insert("ndcg100", ndcg);
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Experiment { config, out: dir } => {
            let mut cfg = ExperimentConfig::from_json_file(&config)?;
            if let Some(s) = cli.seed {
                cfg.split.seed = s;
                if let viewcast::harness::CorpusSource::Synthetic(c) = &mut cfg.corpus {
                    c.seed = s;
                }
            }
            let dir = dir.or_else(|| cfg.output.clone()).unwrap_or_else(|| cli.out_dir.clone());
            let output = run_experiment(&cfg)?;
            let path = output.write(&dir)?;
            if output.report.results.is_empty() {
                bail!("experiment produced no results");
            }
            println!("{}", json!({"report": path, "rows": output.report.results.len()}));
        }
    }
    Ok(())
}
