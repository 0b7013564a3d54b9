//! Experiment runner: repeated splits × days × feature sets × targets, and
//! the report tables built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::eval::{self, Gain, MetricResult, SplitPlan};
use crate::events::{assemble_corpus, read_events, Corpus};
use crate::features::{FeatureExtractor, FeatureMatrix, FeatureSpec};
use crate::learn::{self, fit_gbdt_columns, GbdtParams, Model, ModelKind, Presorted};
use crate::lim::{read_influence_sets, train_bank, LimBank, LimConfig};
use crate::synth::{generate_corpus, SynthConfig};
use crate::timeline::{target_value, Target, TargetKind, TimeGrid, TARGET_DAYS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Baselines,
    FeatureSets,
    GroupAblation,
    DelaySweep,
    PerDayCurves,
    NdcgStudy,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Baselines => "baselines",
            ExperimentKind::FeatureSets => "feature_sets",
            ExperimentKind::GroupAblation => "group_ablation",
            ExperimentKind::DelaySweep => "delay_sweep",
            ExperimentKind::PerDayCurves => "per_day_curves",
            ExperimentKind::NdcgStudy => "ndcg_study",
        }
    }

    /// Rows reported when the config lists none; the first is the reference.
    pub fn default_rows(self) -> Vec<&'static str> {
        match self {
            ExperimentKind::Baselines => vec![
                "API", "BASE.lit", "API_Sv", "API_Sa", "API_D", "API_Sv∪API_Sa", "API_Sv∪API_D",
                "API_Sa∪API_D",
            ],
            ExperimentKind::FeatureSets => vec![
                "API", "API∪LOG", "API∪WEB", "ALL", "ALL∖WEB_nag", "API∪WEB_ag", "LOG", "WEB",
                "WEB∪LOG", "WEB_ag∪LOG", "WEB_nag", "WEB_ag",
            ],
            ExperimentKind::GroupAblation => vec![
                "API", "API∖tc", "ALL∖tc", "API∖sv", "ALL∖sv", "API∖uf", "ALL∖uf", "API∖ar",
                "ALL∖ar", "API∖se", "ALL∖se",
            ],
            ExperimentKind::DelaySweep => vec!["ALL"],
            ExperimentKind::PerDayCurves => vec!["API", "API∪LOG", "API∪WEB", "ALL"],
            ExperimentKind::NdcgStudy => {
                vec!["API", "ALL∖WEB_nag", "ALL", "LOG", "WEB_ag", "WEB", "WEB∪LOG"]
            }
        }
    }

    pub fn default_targets(self) -> Vec<Target> {
        match self {
            ExperimentKind::GroupAblation => vec![
                Target::new(TargetKind::ViewsCumulative, true),
                Target::new(TargetKind::ViewsCumulative, false),
            ],
            _ => Target::ALL.to_vec(),
        }
    }
}

/// A report row: a feature set, or the naive average.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSpec {
    BaseAvg,
    Features(FeatureSpec),
}

impl RowSpec {
    pub const BASE_AVG: &'static str = "BASE.avg";
}

impl fmt::Display for RowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowSpec::BaseAvg => f.write_str(Self::BASE_AVG),
            RowSpec::Features(s) => s.fmt(f),
        }
    }
}

impl FromStr for RowSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == Self::BASE_AVG {
            Ok(RowSpec::BaseAvg)
        } else {
            FeatureSpec::parse(s).map(RowSpec::Features)
        }
    }
}

impl Serialize for RowSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RowSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn default_horizon() -> u32 {
    TimeGrid::DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    Synthetic(SynthConfig),
    Events {
        paths: Vec<PathBuf>,
        #[serde(default = "default_horizon")]
        horizon_days: u32,
    },
}

/// Where the LIM bank comes from. The synthetic variant draws a fresh video
/// population from the same world with a longer horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LimTraining {
    Synthetic {
        #[serde(default = "LimTraining::default_horizon")]
        horizon_days: u32,
        #[serde(default = "LimTraining::default_stream")]
        video_stream: u64,
        #[serde(default)]
        n_videos: Option<usize>,
    },
    Events {
        paths: Vec<PathBuf>,
        horizon_days: u32,
    },
    SameCorpus,
    File {
        path: PathBuf,
    },
}

impl LimTraining {
    fn default_horizon() -> u32 {
        56
    }

    fn default_stream() -> u64 {
        1
    }
}

impl Default for LimTraining {
    fn default() -> Self {
        LimTraining::Synthetic {
            horizon_days: Self::default_horizon(),
            video_stream: Self::default_stream(),
            n_videos: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimSetup {
    /// Defaults to the twelve-model bank with 28 and 56 day windows.
    pub configs: Option<Vec<LimConfig>>,
    pub training: LimTraining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub corpus: CorpusSource,
    #[serde(default, alias = "rows")]
    pub feature_sets: Option<Vec<RowSpec>>,
    #[serde(default)]
    pub targets: Option<Vec<Target>>,
    /// Target days of the delay sweep.
    #[serde(default)]
    pub target_days: Option<Vec<u32>>,
    /// Delays of the delay sweep; all of `0..t_t` when absent.
    #[serde(default)]
    pub delays: Option<Vec<u32>>,
    #[serde(default)]
    pub split: SplitPlan,
    #[serde(default = "ExperimentConfig::default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub gbdt: GbdtParams,
    /// Tuned on the validation part of repeat 0 when non-empty.
    #[serde(default)]
    pub gbdt_candidates: Vec<GbdtParams>,
    #[serde(default = "ExperimentConfig::default_selection_day")]
    pub selection_day: u32,
    #[serde(default)]
    pub lim: LimSetup,
    #[serde(default)]
    pub ndcg_gain: Gain,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    fn default_model() -> ModelKind {
        ModelKind::Gbdt
    }

    fn default_selection_day() -> u32 {
        7
    }

    pub fn new(experiment: ExperimentKind, corpus: CorpusSource) -> Self {
        Self {
            experiment,
            corpus,
            feature_sets: None,
            targets: None,
            target_days: None,
            delays: None,
            split: SplitPlan::default(),
            model: Self::default_model(),
            gbdt: GbdtParams::default(),
            gbdt_candidates: Vec::new(),
            selection_day: Self::default_selection_day(),
            lim: LimSetup::default(),
            ndcg_gain: Gain::default(),
            output: None,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn rows(&self) -> Result<Vec<RowSpec>> {
        match &self.feature_sets {
            Some(rows) if rows.is_empty() => Err(Error::Config("empty feature set list".into())),
            Some(rows) => Ok(rows.clone()),
            None => self.experiment.default_rows().iter().map(|r| r.parse()).collect(),
        }
    }

    pub fn target_list(&self) -> Result<Vec<Target>> {
        match &self.targets {
            Some(t) if t.is_empty() => Err(Error::Config("empty target list".into())),
            Some(t) => Ok(t.clone()),
            None => Ok(self.experiment.default_targets()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gbdt.validate()?;
        for c in &self.gbdt_candidates {
            c.validate()?;
        }
        if self.split.repeats < 1 {
            return Err(Error::Config("split.repeats must be at least 1".into()));
        }
        if !TARGET_DAYS.contains(&self.selection_day) {
            return Err(Error::Config(format!("selection_day {} outside 1..=14", self.selection_day)));
        }
        self.rows()?;
        self.target_list()?;
        if let CorpusSource::Synthetic(s) = &self.corpus {
            s.validate()?;
        }
        for &t_t in self.target_days.iter().flatten() {
            if !TARGET_DAYS.contains(&t_t) {
                return Err(Error::Config(format!("target day {t_t} outside 1..=14")));
            }
            for &delta in self.delays.iter().flatten() {
                if delta >= t_t {
                    return Err(Error::Contract(format!("delay {delta} must be below t_t={t_t}")));
                }
            }
        }
        Ok(())
    }
}

/// Report rows in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub experiment: ExperimentKind,
    pub caption: String,
    pub results: Vec<MetricResult>,
}

pub const REPORT_HEADER: [&str; 10] = [
    "experiment", "row", "target", "t_c", "t_t", "metric", "mean", "rel_pct", "p_value",
    "repeat_values",
];

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ReportTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER)?;
        for r in &self.results {
            let values: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
            w.write_record([
                r.experiment.clone(),
                r.row.clone(),
                r.target.name().to_string(),
                r.t_c.map_or_else(|| "cur".to_string(), |d| d.to_string()),
                r.t_t.map_or_else(|| "avg".to_string(), |d| d.to_string()),
                r.metric.clone(),
                r.mean.to_string(),
                opt_num(r.rel_pct),
                opt_num(r.p_value),
                values.join(";"),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// One curve of nRMSE against the target day.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub row: String,
    pub target: Target,
    pub points: Vec<(u32, f64)>,
}

impl Curve {
    pub fn file_name(&self) -> String {
        let slug = |text: &str| -> String {
            text.chars()
                .filter_map(|c| match c {
                    '∪' | '+' | '|' => Some('U'),
                    '∖' | '\\' | '-' => Some('M'),
                    '[' | '(' => Some('_'),
                    ']' | ')' | ' ' => None,
                    c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => Some(c),
                    _ => Some('_'),
                })
                .collect()
        };
        format!("curve_{}_{}.csv", slug(&self.row), slug(self.target.name()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_t,nrmse\n");
        for (d, v) in &self.points {
            out.push_str(&format!("{d},{v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ReportTable,
    pub curves: Vec<Curve>,
}

impl ExperimentOutput {
    /// Writes `report.csv` and any curves into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let path = dir.join("report.csv");
        self.report.write_csv(&path)?;
        for c in &self.curves {
            std::fs::write(dir.join(c.file_name()), c.to_csv())?;
        }
        Ok(path)
    }
}

pub fn load_corpus(source: &CorpusSource) -> Result<Corpus> {
    match source {
        CorpusSource::Synthetic(cfg) => Ok(generate_corpus(cfg)?.0),
        CorpusSource::Events { paths, horizon_days } => {
            assemble_corpus(read_events(paths)?, TimeGrid::new(*horizon_days)?)
        }
    }
}

fn needs_bank(rows: &[RowSpec], corpus: &Corpus) -> bool {
    let bare = FeatureExtractor::for_corpus(corpus, None);
    rows.iter().any(|r| match r {
        RowSpec::Features(spec) => bare.resolve(spec).is_err(),
        RowSpec::BaseAvg => false,
    })
}

pub fn load_bank(config: &ExperimentConfig, corpus: &Corpus) -> Result<LimBank> {
    let configs = config
        .lim
        .configs
        .clone()
        .unwrap_or_else(|| LimConfig::default_bank([28, 56]));
    match &config.lim.training {
        LimTraining::File { path } => LimBank::new(read_influence_sets(path)?),
        LimTraining::SameCorpus => train_bank(corpus, &configs),
        LimTraining::Events { paths, horizon_days } => {
            let train = assemble_corpus(read_events(paths)?, TimeGrid::new(*horizon_days)?)?;
            train_bank(&train, &configs)
        }
        LimTraining::Synthetic {
            horizon_days,
            video_stream,
            n_videos,
        } => {
            let CorpusSource::Synthetic(base) = &config.corpus else {
                return Err(Error::Config(
                    "synthetic LIM training needs a synthetic corpus".into(),
                ));
            };
            let cfg = SynthConfig {
                horizon_days: *horizon_days,
                video_stream: *video_stream,
                n_videos: n_videos.unwrap_or(base.n_videos),
                ..base.clone()
            };
            let (train, _) = generate_corpus(&cfg)?;
            train_bank(&train, &configs)
        }
    }
}

/// Per-repeat scores of one (row, target, t_c, t_t) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    nrmse: f64,
    ndcg: f64,
}

type CellKey = (usize, usize, u32, u32);

struct Grid<'a> {
    corpus: &'a Corpus,
    extractor: FeatureExtractor<'a>,
    rows: Vec<RowSpec>,
    /// Column names per row, empty for the naive average.
    row_columns: Vec<Vec<String>>,
    targets: Vec<Target>,
    config: &'a ExperimentConfig,
}

impl<'a> Grid<'a> {
    fn new(config: &'a ExperimentConfig, corpus: &'a Corpus, bank: Option<&'a LimBank>) -> Result<Self> {
        let extractor = FeatureExtractor::for_corpus(corpus, bank);
        let rows = config.rows()?;
        let row_columns = rows
            .iter()
            .map(|r| match r {
                RowSpec::BaseAvg => Ok(Vec::new()),
                RowSpec::Features(spec) => extractor.resolve(spec),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            corpus,
            extractor,
            rows,
            row_columns,
            targets: config.target_list()?,
            config,
        })
    }

    fn targets_at(&self, t_t: u32, idx: &[usize], target: Target) -> Result<Vec<f64>> {
        let videos = self.corpus.videos();
        idx.iter()
            .map(|&i| target_value(&videos[i].timeline, target, t_t))
            .collect()
    }

    /// Fits `row` on `train` rows and predicts `eval_rows`.
    #[allow(clippy::too_many_arguments)]
    fn fit_predict(
        &self,
        x: &FeatureMatrix,
        presorted: &Presorted,
        row: usize,
        y_train: &[f64],
        eval_rows: &[usize],
        train: &[usize],
        params: &GbdtParams,
    ) -> Result<Vec<f64>> {
        let names = &self.row_columns[row];
        let kind = if names.is_empty() { ModelKind::BaselineAvg } else { self.config.model };
        let eval_x = || -> Result<FeatureMatrix> { Ok(x.select(names)?.select_rows(eval_rows)) };
        match kind {
            ModelKind::BaselineAvg => learn::fit_baseline_avg(y_train)?.predict(&eval_x()?),
            ModelKind::Linear => {
                let train_x = x.select(names)?.select_rows(train);
                learn::fit_linear(&train_x, y_train)?.predict(&eval_x()?)
            }
            ModelKind::Gbdt => {
                let cols: Vec<usize> = names
                    .iter()
                    .map(|n| x.column_index(n).expect("resolved column"))
                    .collect();
                let state = fit_gbdt_columns(presorted, &cols, y_train, params)?;
                Model::from_gbdt(names.clone(), state).predict(&eval_x()?)
            }
        }
    }

    /// Picks GBDT parameters per (row, target) on the validation part of
    /// repeat 0 at the selection day.
    fn select_params(&self) -> Result<BTreeMap<(usize, usize), GbdtParams>> {
        let mut out = BTreeMap::new();
        let candidates = &self.config.gbdt_candidates;
        if candidates.is_empty() || self.config.model != ModelKind::Gbdt {
            return Ok(out);
        }
        let day = self.config.selection_day;
        let x = self.extractor.extract_all(self.corpus, day)?;
        let s = eval::split(self.corpus.len(), &self.config.split, 0)?;
        let presorted = Presorted::new(s.train.len(), x.n_cols(), |i, j| x.get(s.train[i], j));
        for row in 0..self.rows.len() {
            if self.row_columns[row].is_empty() {
                continue;
            }
            for (ti, &target) in self.targets.iter().enumerate() {
                let y_train = self.targets_at(day, &s.train, target)?;
                let y_val = self.targets_at(day, &s.validation, target)?;
                let mut best: Option<(f64, &GbdtParams)> = None;
                for c in candidates {
                    let pred = self.fit_predict(&x, &presorted, row, &y_train, &s.validation, &s.train, c)?;
                    let err = eval::rmse(&pred, &y_val)?;
                    if best.is_none_or(|(b, _)| err < b) {
                        best = Some((err, c));
                    }
                }
                out.insert((row, ti), best.expect("candidates non-empty").1.clone());
            }
        }
        Ok(out)
    }

    /// Scores every (row, target, t_c, t_t) cell for each (t_c, t_t) pair.
    fn run(&self, pairs: &[(u32, u32)]) -> Result<BTreeMap<CellKey, Vec<Score>>> {
        let params = self.select_params()?;
        let mut by_tc: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for &(t_c, t_t) in pairs {
            by_tc.entry(t_c).or_default().push(t_t);
        }
        let plan = &self.config.split;
        let mut out: BTreeMap<CellKey, Vec<Score>> = BTreeMap::new();
        for (&t_c, t_ts) in &by_tc {
            let x = self.extractor.extract_all(self.corpus, t_c)?;
            let sorted = self
                .needs_trees()
                .then(|| Presorted::new(x.n_rows(), x.n_cols(), |i, j| x.get(i, j)));
            let per_repeat: Vec<Vec<(CellKey, Score)>> = (0..plan.repeats)
                .into_par_iter()
                .map(|rep| self.run_repeat(&x, sorted.as_ref(), rep, t_c, t_ts, &params))
                .collect::<Result<_>>()?;
            for cells in per_repeat {
                for (key, score) in cells {
                    out.entry(key).or_default().push(score);
                }
            }
        }
        Ok(out)
    }

    fn needs_trees(&self) -> bool {
        self.config.model == ModelKind::Gbdt && self.row_columns.iter().any(|c| !c.is_empty())
    }

    fn run_repeat(
        &self,
        x: &FeatureMatrix,
        sorted: Option<&Presorted>,
        rep: usize,
        t_c: u32,
        t_ts: &[u32],
        params: &BTreeMap<(usize, usize), GbdtParams>,
    ) -> Result<Vec<(CellKey, Score)>> {
        let s = eval::split(self.corpus.len(), &self.config.split, rep)?;
        let presorted = match sorted {
            Some(full) => full.restrict(&s.train),
            None => Presorted::new(0, 0, |_, _| 0.0),
        };
        let test_ids: Vec<_> = s.test.iter().map(|&i| self.corpus.videos()[i].id().clone()).collect();
        let mut cells = Vec::new();
        for row in 0..self.rows.len() {
            for (ti, &target) in self.targets.iter().enumerate() {
                let p = params.get(&(row, ti)).unwrap_or(&self.config.gbdt);
                for &t_t in t_ts {
                    let y_train = self.targets_at(t_t, &s.train, target)?;
                    let y_test = self.targets_at(t_t, &s.test, target)?;
                    let mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
                    let base = eval::rmse(&vec![mean; y_test.len()], &y_test)?;
                    let pred = self.fit_predict(x, &presorted, row, &y_train, &s.test, &s.train, p)?;
                    let nrmse = eval::nrmse(eval::rmse(&pred, &y_test)?, base)?;
                    let ndcg = eval::ndcg_at(&test_ids, &pred, &y_test, eval::NDCG_DEPTH, self.config.ndcg_gain)?;
                    cells.push(((row, ti, t_c, t_t), Score { nrmse, ndcg }));
                }
            }
        }
        Ok(cells)
    }
}

/// Per-repeat mean over target days 1..=14 of a current-prediction score.
fn average_over_days(
    cells: &BTreeMap<CellKey, Vec<Score>>,
    row: usize,
    target: usize,
    repeats: usize,
    pick: impl Fn(&Score) -> f64,
) -> Result<Vec<f64>> {
    (0..repeats)
        .map(|rep| {
            let by_day: BTreeMap<u32, f64> = TARGET_DAYS
                .filter_map(|d| cells.get(&(row, target, d, d)).map(|v| (d, pick(&v[rep]))))
                .collect();
            eval::anrmse(&by_day)
        })
        .collect()
}

fn compare_rows(results: &mut [MetricResult], per_target: usize) -> Result<()> {
    // Results are laid out row-major with `per_target` cells per row; the
    // first row is the reference.
    let reference: Vec<MetricResult> = results[..per_target].to_vec();
    for (i, r) in results.iter_mut().enumerate() {
        r.compare_to(&reference[i % per_target])?;
    }
    Ok(())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let corpus = load_corpus(&config.corpus)?;
    run_experiment_on(config, &corpus)
}

pub fn run_experiment_on(config: &ExperimentConfig, corpus: &Corpus) -> Result<ExperimentOutput> {
    config.validate()?;
    let rows = config.rows()?;
    let bank = if needs_bank(&rows, corpus) {
        Some(load_bank(config, corpus)?)
    } else {
        None
    };
    let grid = Grid::new(config, corpus, bank.as_ref())?;
    let kind = config.experiment;
    let name = kind.as_str();
    let repeats = config.split.repeats;
    let labels: Vec<String> = grid.rows.iter().map(|r| r.to_string()).collect();
    let current: Vec<(u32, u32)> = TARGET_DAYS.map(|d| (d, d)).collect();
    let mut curves = Vec::new();

    let (caption, results) = match kind {
        ExperimentKind::Baselines | ExperimentKind::FeatureSets | ExperimentKind::GroupAblation | ExperimentKind::NdcgStudy => {
            let cells = grid.run(&current)?;
            let ndcg = kind == ExperimentKind::NdcgStudy;
            let metric = if ndcg { "ndcg100" } else { "anrmse" };
            let mut results = Vec::new();
            for (row, label) in labels.iter().enumerate() {
                for (ti, &target) in grid.targets.iter().enumerate() {
                    let values = if ndcg {
                        average_over_days(&cells, row, ti, repeats, |s| s.ndcg)?
                    } else {
                        average_over_days(&cells, row, ti, repeats, |s| s.nrmse)?
                    };
                    results.push(MetricResult::new(name, label, target, None, None, metric, values));
                }
            }
            compare_rows(&mut results, grid.targets.len())?;
            (format!("{metric} over target days 1-14 relative to {}", labels[0]), results)
        }
        ExperimentKind::PerDayCurves => {
            let cells = grid.run(&current)?;
            let mut results = Vec::new();
            for (row, label) in labels.iter().enumerate() {
                for (ti, &target) in grid.targets.iter().enumerate() {
                    let mut points = Vec::new();
                    for d in TARGET_DAYS {
                        let values: Vec<f64> = cells[&(row, ti, d, d)].iter().map(|s| s.nrmse).collect();
                        let r = MetricResult::new(name, label, target, None, Some(d), "nrmse", values);
                        points.push((d, r.mean));
                        results.push(r);
                    }
                    let values = average_over_days(&cells, row, ti, repeats, |s| s.nrmse)?;
                    let summary = MetricResult::new(name, label, target, None, None, "anrmse", values);
                    let curve_mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
                    if (curve_mean - summary.mean).abs() > 1e-12 * summary.mean.abs().max(1.0) {
                        return Err(Error::Contract(format!(
                            "curve mean {curve_mean} disagrees with AnRMSE {}",
                            summary.mean
                        )));
                    }
                    results.push(summary);
                    curves.push(Curve {
                        row: label.clone(),
                        target,
                        points,
                    });
                }
            }
            ("per-day nRMSE with its AnRMSE".to_string(), results)
        }
        ExperimentKind::DelaySweep => {
            let days = config.target_days.clone().unwrap_or_else(|| vec![7, 14]);
            let mut pairs = Vec::new();
            let mut plan: Vec<(u32, Vec<u32>)> = Vec::new();
            for &t_t in &days {
                let delays: Vec<u32> = config.delays.clone().unwrap_or_else(|| (0..t_t).collect());
                for &delta in &delays {
                    pairs.push((t_t - delta, t_t));
                }
                // The reference point observes day 1 only.
                if !delays.contains(&(t_t - 1)) {
                    pairs.push((1, t_t));
                }
                plan.push((t_t, delays));
            }
            let cells = grid.run(&pairs)?;
            let mut results = Vec::new();
            for (row, label) in labels.iter().enumerate() {
                for (ti, &target) in grid.targets.iter().enumerate() {
                    for (t_t, delays) in &plan {
                        let values = |t_c: u32| -> Vec<f64> {
                            cells[&(row, ti, t_c, *t_t)].iter().map(|s| s.nrmse).collect()
                        };
                        let reference = MetricResult::new(name, label, target, Some(1), Some(*t_t), "nrmse", values(1));
                        for &delta in delays {
                            let t_c = t_t - delta;
                            let mut r = MetricResult::new(name, label, target, Some(t_c), Some(*t_t), "nrmse", values(t_c));
                            r.compare_to(&reference)?;
                            results.push(r);
                        }
                    }
                }
            }
            ("nRMSE by crawl delay relative to t_c = 1".to_string(), results)
        }
    };
    Ok(ExperimentOutput {
        report: ReportTable {
            experiment: kind,
            caption,
            results,
        },
        curves,
    })
}

/// Runs `config` on a pool of `threads` workers, or rayon's default.
pub fn run_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutput> {
    match threads {
        None => run_experiment(config),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_experiment(config)),
    }
}
