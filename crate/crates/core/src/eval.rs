//! Error and ranking metrics, repeated random splits and paired t-tests.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::timeline::{Target, VideoId, TARGET_DAYS};

pub const NDCG_DEPTH: usize = 100;

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::Contract(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            pred.len(),
            actual.len()
        )));
    }
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn nrmse(rmse_value: f64, baseline_rmse: f64) -> Result<f64> {
    if !(baseline_rmse > 0.0) {
        return Err(Error::Degenerate(format!(
            "baseline RMSE {baseline_rmse} cannot normalise"
        )));
    }
    Ok(rmse_value / baseline_rmse)
}

/// Mean of the normalised RMSE over target days 1..=14.
pub fn anrmse(by_day: &BTreeMap<u32, f64>) -> Result<f64> {
    let missing: Vec<u32> = TARGET_DAYS.filter(|d| !by_day.contains_key(d)).collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(format!("target days {missing:?} missing")));
    }
    let n = TARGET_DAYS.count() as f64;
    Ok(TARGET_DAYS.map(|d| by_day[&d]).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    /// `1/(pos+1)` for the top ideal positions.
    #[default]
    Position,
    /// The position gain multiplied by the target value.
    TargetWeighted,
}

fn ranking(videos: &[VideoId], score: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..videos.len()).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then_with(|| videos[a].cmp(&videos[b])));
    idx
}

fn dcg(order: &[usize], gain: &[f64], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &v)| gain[v] / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG at depth `k`. Ties in either ranking are broken by video id.
pub fn ndcg_at(videos: &[VideoId], pred: &[f64], actual: &[f64], k: usize, gain: Gain) -> Result<f64> {
    if videos.len() != pred.len() || videos.len() != actual.len() || videos.is_empty() {
        return Err(Error::Contract("ndcg needs equal non-empty inputs".into()));
    }
    let ideal = ranking(videos, actual);
    let mut g = vec![0.0; videos.len()];
    for (pos, &v) in ideal.iter().enumerate().take(k) {
        g[v] = match gain {
            Gain::Position => 1.0 / (pos + 1) as f64,
            Gain::TargetWeighted => actual[v] / (pos + 1) as f64,
        };
    }
    let idcg = dcg(&ideal, &g, k);
    if idcg == 0.0 {
        return Err(Error::Degenerate("ideal DCG is zero".into()));
    }
    Ok(dcg(&ranking(videos, pred), &g, k) / idcg)
}

pub fn ndcg100(videos: &[VideoId], pred: &[f64], actual: &[f64]) -> Result<f64> {
    ndcg_at(videos, pred, actual, NDCG_DEPTH, Gain::Position)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPlan {
    pub seed: u64,
    pub repeats: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self { seed: 42, repeats: 20 }
    }
}

/// Row indices of one random three-way split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffles `n` rows and cuts them into test, train and validation thirds;
/// leftover rows go to the earlier parts.
pub fn split(n: usize, plan: &SplitPlan, repeat: usize) -> Result<Split> {
    if plan.repeats < 1 || repeat >= plan.repeats {
        return Err(Error::Range(format!(
            "repeat {repeat} outside 0..{}",
            plan.repeats
        )));
    }
    if n < 3 {
        return Err(Error::SampleSize(format!("{n} videos cannot be split in three")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(repeat as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let base = n / 3;
    let rem = n % 3;
    let a = base + usize::from(rem > 0);
    let b = a + base + usize::from(rem > 1);
    let mut parts = [idx[..a].to_vec(), idx[a..b].to_vec(), idx[b..].to_vec()];
    for p in &mut parts {
        p.sort_unstable();
    }
    let [test, train, validation] = parts;
    Ok(Split { test, train, validation })
}

/// Two-sided paired t-test. Identical samples give 1; a constant non-zero
/// difference gives 0.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Contract(format!(
            "paired t-test needs equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().all(|&x| x == 0.0) {
        return Ok(1.0);
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(0.0);
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// One reported cell with its per-repeat values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub experiment: String,
    pub row: String,
    pub target: Target,
    /// `None` when the current day equals each target day.
    pub t_c: Option<u32>,
    /// `None` when averaged over all target days.
    pub t_t: Option<u32>,
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub rel_pct: Option<f64>,
    pub p_value: Option<f64>,
}

impl MetricResult {
    pub fn new(experiment: &str, row: &str, target: Target, t_c: Option<u32>, t_t: Option<u32>, metric: &str, values: Vec<f64>) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            experiment: experiment.to_string(),
            row: row.to_string(),
            target,
            t_c,
            t_t,
            metric: metric.to_string(),
            values,
            mean,
            rel_pct: None,
            p_value: None,
        }
    }

    /// Fills `rel_pct` and `p_value` against a reference cell.
    pub fn compare_to(&mut self, reference: &MetricResult) -> Result<()> {
        self.rel_pct = Some(100.0 * (self.mean - reference.mean) / reference.mean);
        self.p_value = Some(paired_ttest(&self.values, &reference.values)?);
        Ok(())
    }
}
