//! Feature extraction and feature matrices.

mod extract;
mod spec;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

pub use spec::{Expr, FeatureSpec, GROUP_NAMES, SET_NAMES};

use crate::error::{Error, Result};
use crate::events::{AuthorMeta, Corpus, VideoData, VideoMeta};
use crate::lim::LimBank;
use crate::timeline::{VideoId, VideoTimeline};
use extract::{emit_video, Emit};

/// Value of undefined features.
pub const SENTINEL: f64 = -1.0;

/// The innermost named feature sets; every column belongs to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leaf {
    ApiSv,
    ApiSa,
    ApiD,
    LogS,
    LogB,
    WebAg,
    WebNag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    /// The feature the column is a mode of, e.g. `LikeCnt` for `log(LikeCnt[d])`.
    pub feature: String,
    pub leaf: Leaf,
}

fn group_features(group: &str) -> &'static [&'static str] {
    match group {
        "tc" => &["UplHour", "Update", "UplDOW"],
        "sv" => &["Cat", "Dur", "TitleLen", "DescLen"],
        "uf" => &["MinRat", "MaxRat", "AvgRat", "LikeCnt", "DislCnt", "RatCnt", "CommCnt"],
        "ar" => &["AuthAge", "AUplCnt", "AViewSum"],
        "se" => &["FrndCnt", "SubsCnt"],
        _ => &[],
    }
}

fn set_leaves(name: &str) -> &'static [Leaf] {
    use Leaf::*;
    match name {
        "API" => &[ApiSv, ApiSa, ApiD],
        "API_S" => &[ApiSv, ApiSa],
        "API_Sv" => &[ApiSv],
        "API_Sa" => &[ApiSa],
        "API_D" => &[ApiD],
        "LOG" => &[LogS, LogB],
        "LOG_S" => &[LogS],
        "LOG_B" => &[LogB],
        "WEB" => &[WebAg, WebNag],
        "WEB_ag" => &[WebAg],
        "WEB_nag" => &[WebNag],
        "ALL" => &[ApiSv, ApiSa, ApiD, LogS, LogB, WebAg, WebNag],
        _ => &[],
    }
}

fn dummy_video() -> VideoData {
    VideoData {
        timeline: VideoTimeline::new(VideoId::new("_").unwrap(), 0.0, vec![0]).unwrap(),
        meta: VideoMeta {
            duration_s: 1,
            category: 0,
            title_len: 1,
            desc_len: 0,
            upload_dow: 0,
            upload_hour: 0.0,
            author: "_".into(),
        },
        author: AuthorMeta {
            author_age_days: 0,
            upload_count: 1,
            view_sum_s: 0,
            friend_count: 0,
            subscriber_count: 0,
        },
        snapshots: Default::default(),
        shows: vec![0; 2],
        clicks: vec![0; 2],
        visits: vec![0; 2],
        embeds: Vec::new(),
        links: Vec::new(),
    }
}

/// Every column that can be extracted for a category vocabulary and an
/// optional LIM bank.
pub struct FeatureExtractor<'a> {
    categories: BTreeSet<u32>,
    bank: Option<&'a LimBank>,
    /// In extraction order.
    defs: Vec<ColumnDef>,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(categories: BTreeSet<u32>, bank: Option<&'a LimBank>) -> Self {
        let mut defs = Vec::new();
        let mut out = Vec::new();
        let mut e = Emit {
            out: &mut out,
            defs: Some(&mut defs),
        };
        emit_video(&mut e, &dummy_video(), 1, &categories, bank);
        Self {
            categories,
            bank,
            defs,
        }
    }

    pub fn for_corpus(corpus: &Corpus, bank: Option<&'a LimBank>) -> Self {
        Self::new(corpus.categories().clone(), bank)
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.defs
    }

    /// Resolves `spec` to its columns, sorted by name.
    pub fn resolve(&self, spec: &FeatureSpec) -> Result<Vec<String>> {
        let (set, needs_nag) = self.eval(spec.expr());
        if needs_nag && self.bank.is_none() {
            return Err(Error::Config(format!(
                "feature set `{spec}` includes WEB_nag but no LIM bank was supplied"
            )));
        }
        let mut names: Vec<String> = set.into_iter().map(|i| self.defs[i].name.clone()).collect();
        names.sort();
        Ok(names)
    }

    /// Column indices plus whether the WEB_nag placeholder survives.
    fn eval(&self, e: &Expr) -> (BTreeSet<usize>, bool) {
        match e {
            Expr::Empty => (BTreeSet::new(), false),
            Expr::Name(n) => {
                let pick = |f: &dyn Fn(&ColumnDef) -> bool| -> BTreeSet<usize> {
                    self.defs
                        .iter()
                        .enumerate()
                        .filter(|(_, d)| f(d))
                        .map(|(i, _)| i)
                        .collect()
                };
                match n.as_str() {
                    "API_Svb" => (
                        pick(&|d| d.leaf == Leaf::ApiSv && group_features("sv").contains(&d.feature.as_str())),
                        false,
                    ),
                    "BASE.lit" => (
                        pick(&|d| {
                            d.leaf == Leaf::ApiSa
                                || d.leaf == Leaf::ApiD
                                || (d.leaf == Leaf::ApiSv
                                    && group_features("sv").contains(&d.feature.as_str()))
                        }),
                        false,
                    ),
                    g if GROUP_NAMES.contains(&g) => {
                        let feats = group_features(g);
                        (pick(&|d| feats.contains(&d.feature.as_str())), false)
                    }
                    s => {
                        let leaves = set_leaves(s);
                        (pick(&|d| leaves.contains(&d.leaf)), leaves.contains(&Leaf::WebNag))
                    }
                }
            }
            Expr::Union(a, b) => {
                let (mut x, nx) = self.eval(a);
                let (y, ny) = self.eval(b);
                x.extend(y);
                (x, nx || ny)
            }
            Expr::Difference(a, b) => {
                let (x, nx) = self.eval(a);
                let (y, ny) = self.eval(b);
                (x.difference(&y).copied().collect(), nx && !ny)
            }
        }
    }

    /// Every extractable column for every video at `t_c`, sorted by name.
    pub fn extract_all(&self, corpus: &Corpus, t_c: u32) -> Result<FeatureMatrix> {
        let horizon = corpus.grid().horizon_days();
        if t_c < 1 || t_c > horizon {
            return Err(Error::Range(format!("t_c={t_c} outside 1..={horizon}")));
        }
        let mut order: Vec<usize> = (0..self.defs.len()).collect();
        order.sort_by(|&a, &b| self.defs[a].name.cmp(&self.defs[b].name));
        let width = self.defs.len();
        let rows: Vec<Vec<f64>> = corpus
            .videos()
            .par_iter()
            .map(|v| {
                let mut raw = Vec::with_capacity(width);
                emit_video(
                    &mut Emit {
                        out: &mut raw,
                        defs: None,
                    },
                    v,
                    t_c,
                    &self.categories,
                    self.bank,
                );
                order.iter().map(|&i| raw[i]).collect()
            })
            .collect();
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            data.extend(r);
        }
        FeatureMatrix::new(
            corpus.videos().iter().map(|v| v.id().clone()).collect(),
            order.iter().map(|&i| self.defs[i].name.clone()).collect(),
            data,
        )
    }

    pub fn build(&self, corpus: &Corpus, spec: &FeatureSpec, t_c: u32) -> Result<FeatureMatrix> {
        let names = self.resolve(spec)?;
        self.extract_all(corpus, t_c)?.select(&names)
    }
}

/// Feature matrix for `spec` on every video of `corpus` at `t_c`.
pub fn build_feature_matrix(
    corpus: &Corpus,
    spec: &FeatureSpec,
    t_c: u32,
    lim: Option<&LimBank>,
) -> Result<FeatureMatrix> {
    FeatureExtractor::for_corpus(corpus, lim).build(corpus, spec, t_c)
}

/// Dense row-major matrix of named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    videos: Vec<VideoId>,
    columns: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(videos: Vec<VideoId>, columns: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != videos.len() * columns.len() {
            return Err(Error::Contract(format!(
                "{} values for {} rows of {} columns",
                data.len(),
                videos.len(),
                columns.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "non-finite value in column {}",
                columns[i % columns.len()]
            )));
        }
        let unique: BTreeSet<&String> = columns.iter().collect();
        if unique.len() != columns.len() {
            return Err(Error::Contract("duplicate column names".into()));
        }
        Ok(Self {
            videos,
            columns,
            data,
        })
    }

    pub fn videos(&self) -> &[VideoId] {
        &self.videos
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.videos.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.columns.len() + j]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn value(&self, i: usize, name: &str) -> Option<f64> {
        self.column_index(name).map(|j| self.get(i, j))
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Contract(format!("unknown column {n}")))
            })
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(self.n_rows() * idx.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        FeatureMatrix::new(self.videos.clone(), names.to_vec(), data)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            videos: rows.iter().map(|&i| self.videos[i].clone()).collect(),
            columns: self.columns.clone(),
            data,
        }
    }

    /// Digest of the ordered column names.
    pub fn schema_digest(&self) -> String {
        schema_digest(&self.columns)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header = vec!["video_id".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (i, v) in self.videos.iter().enumerate() {
            let mut rec = vec![v.as_str().to_string()];
            rec.extend(self.row(i).iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        if header.get(0) != Some("video_id") {
            return Err(Error::Schema {
                line: 1,
                message: "first column must be video_id".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut videos = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != columns.len() + 1 {
                return Err(Error::Schema {
                    line,
                    message: format!("expected {} fields, got {}", columns.len() + 1, rec.len()),
                });
            }
            videos.push(VideoId::new(&rec[0]).map_err(|e| Error::Schema {
                line,
                message: e.to_string(),
            })?);
            for field in rec.iter().skip(1) {
                data.push(field.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("`{field}`: {e}"),
                })?);
            }
        }
        FeatureMatrix::new(videos, columns, data)
    }
}

pub fn schema_digest(columns: &[String]) -> String {
    crate::sha256_hex(columns.join("\n").as_bytes())
}
