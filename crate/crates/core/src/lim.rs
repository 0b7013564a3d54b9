//! Linear influence model.
//!
//! Every host has an influence function over `L` lags; a video's daily views
//! are modelled as the sum of the influence functions of the hosts that
//! embedded (or linked) it, shifted to the infection day.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{top_hosts, Corpus, VideoData, WebObservation, WebSource};
use crate::sparse::{cgls, SolveOptions, SparseMatrix};
use crate::timeline::{signed_log, VideoId};

pub const OTHER_HOST: &str = "OTHER";
pub const BANK_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Pages of one host on one day add up.
    Multiplicity,
    /// Each host contributes at most once per day.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimConfig {
    pub source: WebSource,
    #[serde(rename = "L", alias = "l")]
    pub l: usize,
    pub training_window_days: u32,
    pub host_count: usize,
    pub include_other_host: bool,
    pub weighting: Weighting,
    pub ridge: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Column-scaled CGLS; much faster on skewed host popularity.
    pub precondition: bool,
}

impl Default for LimConfig {
    fn default() -> Self {
        Self {
            source: WebSource::Embed,
            l: 10,
            training_window_days: 28,
            host_count: 1280,
            include_other_host: true,
            weighting: Weighting::Multiplicity,
            ridge: 0.0,
            tol: 1e-8,
            max_iter: 5000,
            precondition: true,
        }
    }
}

impl LimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l < 1 || self.host_count < 1 {
            return Err(Error::Config("L and host_count must be at least 1".into()));
        }
        if (self.training_window_days as usize) < self.l {
            return Err(Error::Config(format!(
                "training window {} shorter than L={}",
                self.training_window_days, self.l
            )));
        }
        if !(self.ridge >= 0.0 && self.tol > 0.0 && self.max_iter >= 1) {
            return Err(Error::Config("ridge >= 0, tol > 0 and max_iter >= 1 required".into()));
        }
        Ok(())
    }

    /// Column stem, e.g. `EmbedHost_L10_T28`.
    pub fn name(&self) -> String {
        let stem = match self.source {
            WebSource::Embed => "EmbedHost",
            WebSource::Link => "LinkHost",
        };
        format!("{stem}_L{}_T{}", self.l, self.training_window_days)
    }

    pub fn digest(&self) -> String {
        crate::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// The twelve models of the default bank: {embed, link} × L∈{1,10,20} ×
    /// the two training windows.
    pub fn default_bank(windows: [u32; 2]) -> Vec<LimConfig> {
        let mut out = Vec::with_capacity(BANK_SIZE);
        for source in WebSource::ALL {
            for l in [1, 10, 20] {
                for training_window_days in windows {
                    out.push(LimConfig {
                        source,
                        l,
                        training_window_days,
                        ..LimConfig::default()
                    });
                }
            }
        }
        out
    }
}

/// The least-squares system `A x ≈ y` with one row per (video, day) and one
/// column per (host, lag).
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub hosts: Vec<String>,
    pub l: usize,
    pub rows: Vec<(VideoId, u32)>,
    pub matrix: SparseMatrix,
    pub y: Vec<f64>,
}

impl SparseSystem {
    pub fn column(&self, host: usize, lag: usize) -> usize {
        host * self.l + lag
    }
}

fn host_lookup(hosts: &[String]) -> HashMap<&str, usize> {
    hosts.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect()
}

fn weight(weighting: Weighting, count: u32) -> f64 {
    match weighting {
        Weighting::Multiplicity => f64::from(count),
        Weighting::Binary => 1.0,
    }
}

/// `(host index, day, weight)` for each infection that maps onto the host list.
fn mapped_infections(
    obs: &[WebObservation],
    lookup: &HashMap<&str, usize>,
    other: Option<usize>,
    weighting: Weighting,
) -> Vec<(usize, u32, f64)> {
    let mut out: Vec<(usize, u32, f64)> = Vec::new();
    for o in obs {
        let Some(h) = lookup.get(o.host.as_str()).copied().or(other) else {
            continue;
        };
        match weighting {
            Weighting::Multiplicity => out.push((h, o.day, weight(weighting, o.count))),
            Weighting::Binary => {
                if !out.iter().any(|&(h2, d2, _)| h2 == h && d2 == o.day) {
                    out.push((h, o.day, 1.0));
                }
            }
        }
    }
    out
}

fn model_hosts(corpus: &Corpus, config: &LimConfig) -> Vec<String> {
    let mut hosts = top_hosts(corpus, config.host_count);
    if config.include_other_host {
        hosts.push(OTHER_HOST.to_string());
    }
    hosts
}

pub fn build_design(corpus: &Corpus, config: &LimConfig) -> Result<SparseSystem> {
    config.validate()?;
    let hosts = model_hosts(corpus, config);
    build_design_with_hosts(corpus, config, hosts)
}

fn build_design_with_hosts(corpus: &Corpus, config: &LimConfig, hosts: Vec<String>) -> Result<SparseSystem> {
    let l = config.l;
    let lookup = host_lookup(&hosts);
    let other = config.include_other_host.then(|| hosts.len() - 1);
    let days = config.training_window_days.min(corpus.grid().horizon_days());

    // Per-video blocks are built in parallel and concatenated in corpus order.
    type Block = (Vec<(VideoId, u32)>, Vec<f64>, Vec<(usize, usize, f64)>);
    let blocks: Vec<Block> = corpus
        .videos()
        .par_iter()
        .map(|v| {
            let inf = mapped_infections(v.web(config.source), &lookup, other, config.weighting);
            if inf.is_empty() {
                return (Vec::new(), Vec::new(), Vec::new());
            }
            let mut rows = Vec::with_capacity(days as usize);
            let mut y = Vec::with_capacity(days as usize);
            let mut entries = Vec::new();
            for t in 0..days {
                let local = rows.len();
                rows.push((v.id().clone(), t));
                y.push(v.timeline.daily_views()[t as usize] as f64);
                for &(h, th, w) in &inf {
                    if th <= t && ((t - th) as usize) < l {
                        entries.push((local, h * l + (t - th) as usize, w));
                    }
                }
            }
            (rows, y, entries)
        })
        .collect();

    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut triplets = Vec::new();
    for (r, yy, e) in blocks {
        let offset = rows.len();
        triplets.extend(e.into_iter().map(|(i, c, w)| (i + offset, c, w)));
        rows.extend(r);
        y.extend(yy);
    }
    let matrix = SparseMatrix::from_triplets(rows.len(), hosts.len() * l, triplets);
    Ok(SparseSystem {
        hosts,
        l,
        rows,
        matrix,
        y,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceFunction {
    pub host: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceSet {
    pub config: LimConfig,
    pub functions: Vec<InfluenceFunction>,
    pub residual_norm: f64,
    pub gradient_norm: f64,
    pub rhs_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    index: HashMap<String, usize>,
}

impl InfluenceSet {
    fn new(config: LimConfig, functions: Vec<InfluenceFunction>) -> Self {
        let index = functions
            .iter()
            .enumerate()
            .map(|(i, f)| (f.host.clone(), i))
            .collect();
        Self {
            config,
            functions,
            residual_norm: 0.0,
            gradient_norm: 0.0,
            rhs_norm: 0.0,
            iterations: 0,
            converged: true,
            index,
        }
    }

    pub fn get(&self, host: &str) -> Option<&[f64]> {
        self.index.get(host).map(|&i| self.functions[i].values.as_slice())
    }

    fn resolve(&self, host: &str) -> Option<&[f64]> {
        self.get(host).or_else(|| {
            if self.config.include_other_host {
                self.get(OTHER_HOST)
            } else {
                None
            }
        })
    }

    pub fn name(&self) -> String {
        self.config.name()
    }
}

pub fn solve_lim(system: &SparseSystem, config: &LimConfig) -> InfluenceSet {
    let sol = cgls(
        &system.matrix,
        &system.y,
        SolveOptions {
            tol: config.tol,
            max_iter: config.max_iter,
            ridge: config.ridge,
            precondition: config.precondition,
        },
    );
    let functions = system
        .hosts
        .iter()
        .enumerate()
        .map(|(h, host)| InfluenceFunction {
            host: host.clone(),
            values: sol.x[h * system.l..(h + 1) * system.l].to_vec(),
        })
        .collect();
    let mut set = InfluenceSet::new(config.clone(), functions);
    set.residual_norm = sol.residual_norm;
    set.gradient_norm = sol.gradient_norm;
    set.rhs_norm = sol.rhs_norm;
    set.iterations = sol.iterations;
    set.converged = sol.converged;
    set
}

/// Builds the design for `config` on `corpus` and solves it.
pub fn train_lim(corpus: &Corpus, config: &LimConfig) -> Result<InfluenceSet> {
    let system = build_design(corpus, config)?;
    Ok(solve_lim(&system, config))
}

/// Predicted views over `[t−1, t)` from the given infections.
pub fn predict_lim(set: &InfluenceSet, infections: &[WebObservation], t: u32) -> f64 {
    if t < 1 {
        return 0.0;
    }
    let d = t - 1;
    let l = set.config.l as u32;
    let mut seen: Vec<(&str, u32)> = Vec::new();
    let mut total = 0.0;
    for o in infections {
        if o.day > d || d - o.day >= l {
            continue;
        }
        let Some(f) = set.resolve(&o.host) else {
            continue;
        };
        let w = match set.config.weighting {
            Weighting::Multiplicity => f64::from(o.count),
            Weighting::Binary => {
                let key = (
                    if set.get(&o.host).is_some() { o.host.as_str() } else { OTHER_HOST },
                    o.day,
                );
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                1.0
            }
        };
        total += w * f[(d - o.day) as usize];
    }
    total
}

/// A validated collection of twelve influence models.
#[derive(Debug, Clone, PartialEq)]
pub struct LimBank {
    models: Vec<InfluenceSet>,
}

impl LimBank {
    pub fn new(models: Vec<InfluenceSet>) -> Result<Self> {
        if models.len() != BANK_SIZE {
            return Err(Error::Config(format!(
                "a LIM bank needs exactly {BANK_SIZE} models, got {}",
                models.len()
            )));
        }
        let mut names: Vec<String> = models.iter().map(InfluenceSet::name).collect();
        names.sort();
        names.dedup();
        if names.len() != BANK_SIZE {
            return Err(Error::Config("LIM bank models must have distinct names".into()));
        }
        Ok(Self { models })
    }

    pub fn models(&self) -> &[InfluenceSet] {
        &self.models
    }

    /// Column names in the order produced by [`LimBank::video_features`].
    pub fn column_names(&self) -> Vec<String> {
        self.models
            .iter()
            .flat_map(|m| {
                let n = m.name();
                [
                    format!("{n}[c]"),
                    format!("{n}[d]"),
                    format!("log({n}[c])"),
                    format!("log({n}[d])"),
                ]
            })
            .collect()
    }

    /// The quadruple {cumulative, daily} × {raw, log} for every model.
    pub fn video_features(&self, video: &VideoData, t_c: u32) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.models.len());
        for m in &self.models {
            let obs = video.web(m.config.source);
            let daily = predict_lim(m, obs, t_c);
            let cumulative: f64 = (1..=t_c).map(|s| predict_lim(m, obs, s)).sum();
            out.extend([cumulative, daily, signed_log(cumulative), signed_log(daily)]);
        }
        out
    }
}

/// Trains every config on `corpus`; the result must form a valid bank.
pub fn train_bank(corpus: &Corpus, configs: &[LimConfig]) -> Result<LimBank> {
    if configs.len() != BANK_SIZE {
        return Err(Error::Config(format!(
            "a LIM bank needs exactly {BANK_SIZE} configs, got {}",
            configs.len()
        )));
    }
    let models = configs
        .iter()
        .map(|c| train_lim(corpus, c))
        .collect::<Result<Vec<_>>>()?;
    LimBank::new(models)
}

/// Named LIM columns for every video of `corpus` at `t_c`.
pub fn lim_feature_block(corpus: &Corpus, bank: &LimBank, t_c: u32) -> Result<Vec<(String, Vec<f64>)>> {
    if t_c < 1 {
        return Err(Error::Range("t_c must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = corpus
        .videos()
        .par_iter()
        .map(|v| bank.video_features(v, t_c))
        .collect();
    Ok(bank
        .column_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| (name, rows.iter().map(|r| r[j]).collect()))
        .collect())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Model {
        config: LimConfig,
        digest: String,
        hosts: usize,
        residual_norm: f64,
        gradient_norm: f64,
        rhs_norm: f64,
        iterations: usize,
        converged: bool,
    },
    Host {
        host: String,
        values: Vec<f64>,
        digest: String,
    },
}

/// Writes models as newline-delimited records: a model header followed by
/// one record per host.
pub fn write_influence_sets(path: impl AsRef<Path>, sets: &[InfluenceSet]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in sets {
        let digest = s.config.digest();
        let header = Record::Model {
            config: s.config.clone(),
            digest: digest.clone(),
            hosts: s.functions.len(),
            residual_norm: s.residual_norm,
            gradient_norm: s.gradient_norm,
            rhs_norm: s.rhs_norm,
            iterations: s.iterations,
            converged: s.converged,
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for f in &s.functions {
            let rec = Record::Host {
                host: f.host.clone(),
                values: f.values.clone(),
                digest: digest.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_influence_sets(path: impl AsRef<Path>) -> Result<Vec<InfluenceSet>> {
    let reader = BufReader::new(File::open(path)?);
    let mut sets: Vec<(InfluenceSet, usize, String)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        match rec {
            Record::Model {
                config,
                digest,
                hosts,
                residual_norm,
                gradient_norm,
                rhs_norm,
                iterations,
                converged,
            } => {
                if config.digest() != digest {
                    return Err(Error::Schema {
                        line: i + 1,
                        message: "model digest does not match its config".into(),
                    });
                }
                let mut set = InfluenceSet::new(config, Vec::with_capacity(hosts));
                set.residual_norm = residual_norm;
                set.gradient_norm = gradient_norm;
                set.rhs_norm = rhs_norm;
                set.iterations = iterations;
                set.converged = converged;
                sets.push((set, hosts, digest));
            }
            Record::Host {
                host,
                values,
                digest,
            } => {
                let Some((set, _, model_digest)) = sets.last_mut() else {
                    return Err(Error::Schema {
                        line: i + 1,
                        message: "host record before any model header".into(),
                    });
                };
                if *model_digest != digest || values.len() != set.config.l {
                    return Err(Error::Schema {
                        line: i + 1,
                        message: "host record does not belong to the preceding model".into(),
                    });
                }
                set.functions.push(InfluenceFunction { host, values });
            }
        }
    }
    sets.into_iter()
        .map(|(set, hosts, _)| {
            if set.functions.len() != hosts {
                return Err(Error::Schema {
                    line: 0,
                    message: format!("model {} lists {hosts} hosts but has {}", set.name(), set.functions.len()),
                });
            }
            let functions = set.functions.clone();
            let mut rebuilt = InfluenceSet::new(set.config.clone(), functions);
            rebuilt.residual_norm = set.residual_norm;
            rebuilt.gradient_norm = set.gradient_norm;
            rebuilt.rhs_norm = set.rhs_norm;
            rebuilt.iterations = set.iterations;
            rebuilt.converged = set.converged;
            Ok(rebuilt)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{assemble_corpus, AuthorMeta, Event, Payload, VideoMeta, WebEvent};
    use crate::synth::{generate_corpus, BaseInterest, SynthConfig};
    use crate::timeline::TimeGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vid(s: &str) -> VideoId {
        VideoId::new(s).unwrap()
    }

    fn one_video(horizon: u32, views: &[u64], web: &[(u32, &str, &str, u32)]) -> Corpus {
        let v = vid("v1");
        let mut events = vec![
            Event::new(
                v.clone(),
                0,
                Payload::VideoMeta(VideoMeta {
                    duration_s: 60,
                    category: 0,
                    title_len: 5,
                    desc_len: 0,
                    upload_dow: 0,
                    upload_hour: 0.0,
                    author: "a".into(),
                }),
            ),
            Event::new(
                v.clone(),
                0,
                Payload::AuthorMeta(AuthorMeta {
                    author_age_days: 0,
                    upload_count: 1,
                    view_sum_s: 0,
                    friend_count: 0,
                    subscriber_count: 0,
                }),
            ),
        ];
        for (d, &x) in views.iter().enumerate() {
            events.push(Event::new(v.clone(), d as u32, Payload::ViewsDay { views: x }));
        }
        for &(day, host, page, count_on_page) in web {
            events.push(Event::new(
                v.clone(),
                day,
                Payload::Embed(WebEvent {
                    host: host.into(),
                    page: page.into(),
                    count_on_page,
                }),
            ));
        }
        assemble_corpus(events, TimeGrid::new(horizon).unwrap()).unwrap()
    }

    fn config(l: usize, window: u32) -> LimConfig {
        LimConfig {
            l,
            training_window_days: window,
            include_other_host: false,
            ..LimConfig::default()
        }
    }

    fn set_with(l: usize, functions: &[(&str, &[f64])]) -> InfluenceSet {
        InfluenceSet::new(
            config(l, 28),
            functions
                .iter()
                .map(|(h, v)| InfluenceFunction {
                    host: h.to_string(),
                    values: v.to_vec(),
                })
                .collect(),
        )
    }

    fn obs(day: u32, host: &str, count: u32) -> WebObservation {
        WebObservation {
            day,
            host: host.into(),
            page: format!("p{day}{host}"),
            count,
        }
    }

    #[test]
    fn design_direct_construction() {
        let corpus = one_video(3, &[5, 2, 1], &[(0, "h", "p", 1)]);
        let sys = build_design(&corpus, &config(2, 3)).unwrap();
        assert_eq!(sys.rows, vec![(vid("v1"), 0), (vid("v1"), 1), (vid("v1"), 2)]);
        assert_eq!(sys.matrix.cols(), 2);
        assert_eq!(sys.matrix.row(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(sys.matrix.row(1).collect::<Vec<_>>(), vec![(1, 1.0)]);
        assert_eq!(sys.matrix.row(2).count(), 0);
        assert_eq!(sys.y, vec![5.0, 2.0, 1.0]);
    }

    #[test]
    fn design_multiplicity_and_binary() {
        let corpus = one_video(2, &[4, 0], &[(0, "h", "p1", 1), (0, "h", "p2", 1)]);
        let sys = build_design(&corpus, &config(1, 2)).unwrap();
        assert_eq!(sys.matrix.row(0).collect::<Vec<_>>(), vec![(0, 2.0)]);
        let binary = LimConfig {
            weighting: Weighting::Binary,
            ..config(1, 2)
        };
        let sys = build_design(&corpus, &binary).unwrap();
        assert_eq!(sys.matrix.row(0).collect::<Vec<_>>(), vec![(0, 1.0)]);
        // Multiplicity is the one consistent with the generator.
        assert_relative_eq!(solve_lim(&build_design(&corpus, &config(1, 2)).unwrap(), &config(1, 2)).functions[0].values[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn design_of_empty_corpus_is_empty() {
        let corpus = assemble_corpus(Vec::new(), TimeGrid::default()).unwrap();
        let sys = build_design(&corpus, &LimConfig::default()).unwrap();
        assert_eq!(sys.matrix.rows(), 0);
        assert_eq!(sys.matrix.nnz(), 0);
        let set = solve_lim(&sys, &LimConfig::default());
        assert!(set.functions.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn other_host_absorbs_unlisted_hosts() {
        let corpus = one_video(2, &[3, 0], &[(0, "a", "p", 2), (0, "b", "p", 1)]);
        let cfg = LimConfig {
            host_count: 1,
            ..config(1, 2)
        };
        let sys = build_design(&corpus, &cfg).unwrap();
        assert_eq!(sys.hosts, vec!["a".to_string()]);
        assert_eq!(sys.matrix.row(0).collect::<Vec<_>>(), vec![(0, 2.0)]);
        let with_other = LimConfig {
            include_other_host: true,
            ..cfg
        };
        let sys = build_design(&corpus, &with_other).unwrap();
        assert_eq!(sys.hosts, vec!["a".to_string(), OTHER_HOST.to_string()]);
        assert_eq!(sys.matrix.row(0).collect::<Vec<_>>(), vec![(0, 2.0), (1, 1.0)]);
    }

    #[test]
    fn zero_views_give_zero_influence() {
        let corpus = one_video(4, &[0, 0, 0, 0], &[(0, "h", "p", 1), (1, "g", "p", 1)]);
        let set = train_lim(&corpus, &config(2, 4)).unwrap();
        assert!(set.converged);
        assert!(set.functions.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn predict_examples() {
        let set = set_with(2, &[("h", &[3.0, 1.0])]);
        let inf = [obs(0, "h", 1)];
        let got: Vec<f64> = (1..=3).map(|t| predict_lim(&set, &inf, t)).collect();
        assert_eq!(got, vec![3.0, 1.0, 0.0]);

        let set = set_with(1, &[("a", &[2.0]), ("b", &[5.0])]);
        assert_eq!(predict_lim(&set, &[obs(0, "a", 1), obs(0, "b", 1)], 1), 7.0);
        assert_eq!(predict_lim(&set, &[], 1), 0.0);
        assert_eq!(predict_lim(&set, &[obs(0, "zzz", 1)], 1), 0.0);
    }

    #[test]
    fn bank_requires_twelve_models() {
        let set = set_with(1, &[("a", &[1.0])]);
        assert!(matches!(LimBank::new(vec![set; 3]), Err(Error::Config(_))));
        let corpus = one_video(2, &[1, 0], &[]);
        assert!(matches!(
            train_bank(&corpus, &LimConfig::default_bank([28, 56])[..5]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn bank_columns_for_uninfected_video() {
        let corpus = one_video(5, &[1, 2, 3, 4, 5], &[]);
        let bank = train_bank(&corpus, &LimConfig::default_bank([28, 56])).unwrap();
        let block = lim_feature_block(&corpus, &bank, 3).unwrap();
        assert_eq!(block.len(), 48);
        let mut names: Vec<&String> = block.iter().map(|(n, _)| n).collect();
        names.dedup();
        assert_eq!(names.len(), 48);
        assert!(block.iter().any(|(n, _)| n == "EmbedHost_L10_T28[c]"));
        assert!(block.iter().any(|(n, _)| n == "log(LinkHost_L20_T56[d])"));
        assert!(block.iter().all(|(_, v)| v == &vec![0.0]));
    }

    fn noiseless(n_videos: usize, n_hosts: usize) -> SynthConfig {
        SynthConfig {
            n_videos,
            n_hosts,
            base_interest: BaseInterest::Zero,
            noise_sigma: 0.0,
            embed_fraction: 1.0,
            link_fraction: 0.0,
            host_zipf_exponent: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn exact_recovery_and_forward_consistency() {
        let synth = noiseless(600, 20);
        let (corpus, truth) = generate_corpus(&synth).unwrap();
        let cfg = LimConfig {
            host_count: 20,
            tol: 1e-12,
            ..config(10, 28)
        };
        let system = build_design(&corpus, &cfg).unwrap();
        let set = solve_lim(&system, &cfg);
        assert!(set.converged, "{set:?}");
        for (host, values) in truth.influence(WebSource::Embed) {
            let got = set.get(host).unwrap();
            for (g, t) in got.iter().zip(values) {
                assert!((g - t).abs() < 1e-6, "{host}: {got:?} vs {values:?}");
            }
        }
        let fitted = system.matrix.mul(&set.functions.iter().flat_map(|f| f.values.clone()).collect::<Vec<_>>());
        let resid: f64 = fitted.iter().zip(&system.y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let ynorm: f64 = system.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(resid <= 1e-6 * ynorm);
    }

    #[test]
    fn persistence_roundtrip() {
        let set = set_with(2, &[("h", &[3.0, -1.25]), ("g", &[0.1, 1e-17])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lim.ndjson");
        write_influence_sets(&path, &[set.clone(), set.clone()]).unwrap();
        let back = read_influence_sets(&path).unwrap();
        assert_eq!(back, vec![set.clone(), set]);
    }

    fn arb_obs() -> impl Strategy<Value = Vec<WebObservation>> {
        prop::collection::vec((0u32..10, prop::sample::select(vec!["a", "b", "c"]), 1u32..4), 0..8)
            .prop_map(|v| v.into_iter().map(|(d, h, c)| obs(d, h, c)).collect())
    }

    proptest! {
        #[test]
        fn prediction_is_linear_in_infections(a in arb_obs(), b in arb_obs(), t in 1u32..15) {
            let set = set_with(3, &[("a", &[2.0, -1.0, 0.5]), ("b", &[4.0, 3.0, 1.0])]);
            let mut union = a.clone();
            union.extend(b.iter().cloned());
            let lhs = predict_lim(&set, &union, t);
            let rhs = predict_lim(&set, &a, t) + predict_lim(&set, &b, t);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
