//! Seeded synthetic corpora with known latent influence functions.
//!
//! Each video has an intrinsic interest curve `A·r^d`. Embeds and links add
//! the integer-valued influence function of their host, shifted to the day of
//! the infection, so with no noise and no intrinsic interest the daily views
//! are exactly the linear influence forward model.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Geometric, LogNormal, Normal, Poisson, Zeta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use crate::error::{Error, Result};
use crate::events::{
    ApiSnapshot, AuthorMeta, Corpus, VideoData, VideoMeta, WebObservation, WebSource,
};
use crate::timeline::{TimeGrid, VideoId, VideoTimeline};

/// Per-video intrinsic interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseInterest {
    Zero,
    /// Day-0 amplitude is log-normal; the curve decays geometrically with a
    /// per-video rate drawn uniformly from `[decay_min, decay_max]`.
    LogNormal {
        log_mean: f64,
        log_sd: f64,
        decay_min: f64,
        decay_max: f64,
    },
}

impl Default for BaseInterest {
    fn default() -> Self {
        BaseInterest::LogNormal {
            log_mean: 3.5,
            log_sd: 1.2,
            decay_min: 0.55,
            decay_max: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_videos: usize,
    pub n_hosts: usize,
    pub power_law_alpha: f64,
    #[serde(alias = "L_true")]
    pub l_true: usize,
    pub base_interest: BaseInterest,
    pub noise_sigma: f64,
    pub missing_history_fraction: f64,
    pub horizon_days: u32,
    pub embed_fraction: f64,
    pub link_fraction: f64,
    /// Zipf exponent of host popularity; 0 picks hosts uniformly.
    pub host_zipf_exponent: f64,
    pub n_categories: u32,
    pub max_infections: u64,
    /// Distinguishes independent video populations drawn from the same world.
    pub video_stream: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_videos: 50_000,
            n_hosts: 2_000,
            power_law_alpha: 2.2,
            l_true: 10,
            base_interest: BaseInterest::default(),
            noise_sigma: 2.0,
            missing_history_fraction: 0.0,
            horizon_days: TimeGrid::DEFAULT_HORIZON,
            embed_fraction: 0.10,
            link_fraction: 0.15,
            host_zipf_exponent: 1.0,
            n_categories: 12,
            max_infections: 5_000,
            video_stream: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_videos < 1 || self.n_hosts < 1 || self.l_true < 1 || self.n_categories < 1 {
            return bad("n_videos, n_hosts, l_true and n_categories must be at least 1");
        }
        if self.horizon_days < 1 || self.max_infections < 1 {
            return bad("horizon_days and max_infections must be at least 1");
        }
        if !(self.power_law_alpha > 1.0 && self.power_law_alpha.is_finite()) {
            return bad("power_law_alpha must be a finite real above 1");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.missing_history_fraction) {
            return bad("missing_history_fraction must lie in [0, 1]");
        }
        if !(self.embed_fraction > 0.0 && self.embed_fraction <= 1.0) {
            return bad("embed_fraction must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.link_fraction) {
            return bad("link_fraction must lie in [0, 1]");
        }
        if !(self.host_zipf_exponent >= 0.0 && self.host_zipf_exponent.is_finite()) {
            return bad("host_zipf_exponent must be finite and non-negative");
        }
        if let BaseInterest::LogNormal {
            log_mean,
            log_sd,
            decay_min,
            decay_max,
        } = self.base_interest
        {
            if !(log_mean.is_finite() && log_sd >= 0.0 && log_sd.is_finite()) {
                return bad("base_interest log-normal parameters must be finite with log_sd >= 0");
            }
            if !(0.0 <= decay_min && decay_min <= decay_max && decay_max <= 1.0) {
                return bad("base_interest decays must satisfy 0 <= decay_min <= decay_max <= 1");
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon_days).expect("validated horizon")
    }
}

/// The latent parameters a synthetic corpus was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub hosts: Vec<String>,
    /// Indexed like `hosts`; each vector has length `l_true`.
    pub embed_influence: Vec<Vec<f64>>,
    pub link_influence: Vec<Vec<f64>>,
    /// Intrinsic daily interest per video, aligned with `Corpus::videos()`.
    pub intrinsic: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn influence(&self, source: WebSource) -> BTreeMap<&str, &[f64]> {
        let table = match source {
            WebSource::Embed => &self.embed_influence,
            WebSource::Link => &self.link_influence,
        };
        self.hosts
            .iter()
            .map(String::as_str)
            .zip(table.iter().map(Vec::as_slice))
            .collect()
    }
}

const WORLD_TAG: u64 = 0x574f_524c_44;
const AUTHOR_TAG: u64 = 0x4155_5448;
const VIDEO_TAG: u64 = 0x5649_4445;
const PAGES_PER_HOST: u32 = 20;

fn substream(seed: u64, tag: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let key = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag)
        .rotate_left(17)
        ^ stream.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

struct World {
    hosts: Vec<String>,
    embed: Vec<Vec<f64>>,
    link: Vec<Vec<f64>>,
    host_picker: WeightedIndex<f64>,
    category_picker: WeightedIndex<f64>,
    category_effect: Vec<f64>,
}

fn integer_influence(rng: &mut ChaCha8Rng, median: f64, l: usize) -> Vec<f64> {
    let scale = LogNormal::new(median.ln(), 0.7).unwrap().sample(rng);
    let decay = rng.random_range(0.5..0.85);
    (0..l).map(|lag| (scale * f64::powi(decay, lag as i32)).round()).collect()
}

impl World {
    fn new(cfg: &SynthConfig) -> Self {
        let mut rng = substream(cfg.seed, WORLD_TAG, 0, 0);
        let width = cfg.n_hosts.to_string().len();
        let hosts: Vec<String> = (0..cfg.n_hosts).map(|i| format!("h{i:0width$}")).collect();
        let mut embed = Vec::with_capacity(cfg.n_hosts);
        let mut link = Vec::with_capacity(cfg.n_hosts);
        for _ in 0..cfg.n_hosts {
            embed.push(integer_influence(&mut rng, 12.0, cfg.l_true));
            link.push(integer_influence(&mut rng, 6.0, cfg.l_true));
        }
        let host_weights = (0..cfg.n_hosts).map(|i| ((i + 1) as f64).powf(-cfg.host_zipf_exponent));
        let category_weights = (0..cfg.n_categories).map(|c| 1.0 / f64::from(c + 1));
        let category_effect = (0..cfg.n_categories)
            .map(|_| rng.random_range(-0.4..0.4))
            .collect();
        Self {
            hosts,
            embed,
            link,
            host_picker: WeightedIndex::new(host_weights).unwrap(),
            category_picker: WeightedIndex::new(category_weights).unwrap(),
            category_effect,
        }
    }
}

struct Author {
    id: String,
    quality: f64,
    meta: AuthorMeta,
}

fn author(cfg: &SynthConfig, index: u64) -> Author {
    let mut rng = substream(cfg.seed, AUTHOR_TAG, cfg.video_stream, index);
    let quality: f64 = rng.sample(rand_distr::StandardNormal);
    let jitter = |rng: &mut ChaCha8Rng, sd: f64| LogNormal::new(0.0, sd).unwrap().sample(rng);
    let subscriber_count = (f64::exp(3.0 + 1.5 * quality) * jitter(&mut rng, 0.5)).round() as u64;
    let upload_count = 1 + (f64::exp(2.0 + 0.5 * quality) * jitter(&mut rng, 0.8)).round() as u64;
    let meta = AuthorMeta {
        author_age_days: rng.random_range(0..3_000),
        upload_count,
        view_sum_s: (subscriber_count as f64 * 40.0 * jitter(&mut rng, 1.0)).round() as u64,
        friend_count: (f64::exp(1.5 + 0.5 * quality) * jitter(&mut rng, 1.0)).round() as u64,
        subscriber_count,
    };
    Author {
        id: format!("a{}-{index}", cfg.video_stream),
        quality,
        meta,
    }
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        0
    } else {
        Poisson::new(rate).unwrap().sample(rng) as u64
    }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0)).unwrap().sample(rng)
}

/// Decides membership with probability `fraction` while correlating it with
/// `quality` through a Gaussian copula.
fn copula_draw(rng: &mut ChaCha8Rng, quality: f64, fraction: f64) -> bool {
    let rho: f64 = 0.5;
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    let latent = rho * quality + (1.0 - rho * rho).sqrt() * z;
    NormalDist::standard().cdf(latent) < fraction
}

fn infections(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    world: &World,
    day_p: f64,
) -> Vec<WebObservation> {
    let zeta = Zeta::new(cfg.power_law_alpha).unwrap();
    let count = (zeta.sample(rng).min(cfg.max_infections as f64)) as u64;
    let days = Geometric::new(day_p).unwrap();
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let day = loop {
            let d = days.sample(rng);
            if d < u64::from(cfg.horizon_days) {
                break d as u32;
            }
        };
        let host = world.host_picker.sample(rng);
        let page = rng.random_range(0..PAGES_PER_HOST);
        let multiplicity = if rng.random_bool(0.85) {
            1
        } else {
            rng.random_range(2..=3)
        };
        out.push(WebObservation {
            day,
            host: world.hosts[host].clone(),
            page: format!("p{page}"),
            count: multiplicity,
        });
    }
    out
}

/// Adds the influence of every infection onto `signal`, indexed by day.
fn add_infections(signal: &mut [f64], world: &World, embeds: &[WebObservation], links: &[WebObservation]) {
    let host_index = |h: &str| world.hosts.binary_search_by(|x| x.as_str().cmp(h)).unwrap();
    for (obs, table) in embeds
        .iter()
        .map(|o| (o, &world.embed))
        .chain(links.iter().map(|o| (o, &world.link)))
    {
        let f = &table[host_index(&obs.host)];
        for (lag, &v) in f.iter().enumerate() {
            match signal.get_mut(obs.day as usize + lag) {
                Some(slot) => *slot += f64::from(obs.count) * v,
                None => break,
            }
        }
    }
}

fn simulate_video(cfg: &SynthConfig, world: &World, n_authors: u64, index: u64) -> (VideoData, Vec<f64>) {
    let mut rng = substream(cfg.seed, VIDEO_TAG, cfg.video_stream, index);
    let m = cfg.horizon_days as usize;
    let width = cfg.n_videos.to_string().len();
    let id = VideoId::new(format!("v{}-{index:0width$}", cfg.video_stream)).unwrap();

    let author = author(cfg, rng.random_range(0..n_authors));
    let quality: f64 = rng.sample(rand_distr::StandardNormal);
    let category = world.category_picker.sample(&mut rng) as u32;
    let duration_s = LogNormal::new(240f64.ln(), 0.8).unwrap().sample(&mut rng).round().max(1.0) as u32;
    let upload_minute: u32 = rng.random_range(0..24 * 60);
    let meta = VideoMeta {
        duration_s,
        category,
        title_len: rng.random_range(5..100),
        desc_len: if rng.random_bool(0.1) {
            0
        } else {
            LogNormal::new(200f64.ln(), 1.0).unwrap().sample(&mut rng).round() as u32
        },
        upload_dow: rng.random_range(0..7),
        upload_hour: f64::from(upload_minute) / 60.0,
        author: author.id.clone(),
    };

    // One extra day so that day M-1 search shows can see next-day views.
    let mut intrinsic = vec![0.0; m + 1];
    if let BaseInterest::LogNormal {
        log_mean,
        log_sd,
        decay_min,
        decay_max,
    } = cfg.base_interest
    {
        let dur_dev = (f64::from(duration_s) / 240.0).ln();
        let mix = 0.6 * quality + 0.4 * author.quality;
        let log_amp = log_mean + log_sd * mix + world.category_effect[category as usize]
            - 0.3 * dur_dev * dur_dev;
        let amplitude = log_amp.exp();
        let decay = if decay_max > decay_min {
            rng.random_range(decay_min..decay_max)
        } else {
            decay_min
        };
        for (d, v) in intrinsic.iter_mut().enumerate() {
            *v = amplitude * decay.powi(d as i32);
        }
    }

    let embeds = if copula_draw(&mut rng, quality, cfg.embed_fraction) {
        infections(&mut rng, cfg, world, 0.25)
    } else {
        Vec::new()
    };
    let links = if cfg.link_fraction > 0.0 && copula_draw(&mut rng, quality, cfg.link_fraction) {
        infections(&mut rng, cfg, world, 0.2)
    } else {
        Vec::new()
    };

    let mut signal = intrinsic.clone();
    add_infections(&mut signal, world, &embeds, &links);
    let noise = Normal::new(0.0, cfg.noise_sigma).unwrap();
    let views: Vec<u64> = signal
        .iter()
        .map(|&s| {
            let x = if cfg.noise_sigma > 0.0 {
                s + noise.sample(&mut rng)
            } else {
                s
            };
            x.max(0.0).round() as u64
        })
        .collect();

    let feedback = |rng: &mut ChaCha8Rng, base: f64| {
        base * LogNormal::new(0.0, 0.5).unwrap().sample(rng)
    };
    let p_like = feedback(&mut rng, 0.02);
    let p_dislike = feedback(&mut rng, 0.003);
    let p_comment = feedback(&mut rng, 0.005);
    let update_day = Geometric::new(0.15).unwrap().sample(&mut rng) as u32;
    let has_history = !rng.random_bool(cfg.missing_history_fraction);
    let mut snapshots = BTreeMap::new();
    let (mut likes, mut dislikes, mut comments) = (0u64, 0u64, 0u64);
    for d in 0..m {
        likes += binomial(&mut rng, views[d], p_like);
        dislikes += binomial(&mut rng, views[d], p_dislike);
        comments += binomial(&mut rng, views[d], p_comment);
        let moment = d as u32 + 1;
        let rating_count = likes + dislikes;
        let (min_rating, max_rating, avg_rating) = if rating_count == 0 {
            (1, 5, 3.0)
        } else {
            (
                if dislikes > 0 { 1 } else { 5 },
                if likes > 0 { 5 } else { 1 },
                1.0 + 4.0 * likes as f64 / rating_count as f64,
            )
        };
        snapshots.insert(
            moment,
            ApiSnapshot {
                comment_count: comments,
                like_count: likes,
                dislike_count: dislikes,
                rating_count,
                min_rating,
                max_rating,
                avg_rating,
                days_since_update: if moment > update_day {
                    moment - update_day
                } else {
                    moment
                },
            },
        );
    }
    if !has_history {
        snapshots.clear();
    }

    let kappa_show = 0.3 * LogNormal::new(0.0, 0.3).unwrap().sample(&mut rng);
    let ctr = rng.random_range(0.05..0.4);
    let kappa_browse = 0.05 * LogNormal::new(0.0, 0.3).unwrap().sample(&mut rng);
    let mut shows = vec![0u64; m + 1];
    let mut clicks = vec![0u64; m + 1];
    let mut visits = vec![0u64; m + 1];
    for d in 0..m {
        shows[d] = poisson(&mut rng, kappa_show * views[d + 1] as f64);
        clicks[d] = binomial(&mut rng, shows[d], ctr) + poisson(&mut rng, 0.02);
        visits[d] = poisson(&mut rng, kappa_browse * views[d] as f64);
    }

    let timeline = VideoTimeline::new(id, meta.upload_hour / 24.0, views[..m].to_vec()).unwrap();
    intrinsic.truncate(m);
    let mut data = VideoData {
        timeline,
        meta,
        author: author.meta,
        snapshots,
        shows,
        clicks,
        visits,
        embeds,
        links,
    };
    data.embeds.sort();
    data.links.sort();
    (data, intrinsic)
}

/// Draws a corpus and the latent truth behind it.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<(Corpus, GroundTruth)> {
    cfg.validate()?;
    let world = World::new(cfg);
    let n_authors = (cfg.n_videos as u64 / 4).max(1);
    let mut drawn: Vec<(VideoData, Vec<f64>)> = (0..cfg.n_videos as u64)
        .into_par_iter()
        .map(|i| simulate_video(cfg, &world, n_authors, i))
        .collect();
    drawn.sort_by(|a, b| a.0.id().cmp(b.0.id()));
    let (videos, intrinsic): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    let corpus = Corpus::from_videos(cfg.grid(), videos)?;
    let truth = GroundTruth {
        hosts: world.hosts,
        embed_influence: world.embed,
        link_influence: world.link,
        intrinsic,
    };
    Ok((corpus, truth))
}

const BERNOULLI_2J: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `Σ_{k≥0} (q+k)^{-s}` for `s > 1`, `q > 0`, by Euler–Maclaurin.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const N: usize = 24;
    let mut sum: f64 = (0..N).map(|k| (q + k as f64).powf(-s)).sum();
    let a = q + N as f64;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    let mut rising = s;
    let mut power = a.powf(-s - 1.0);
    let mut factorial = 2.0;
    for (j, b) in BERNOULLI_2J.iter().enumerate() {
        sum += b / factorial * rising * power;
        let k = 2.0 * (j as f64 + 1.0);
        rising *= (s + k - 1.0) * (s + k);
        power /= a * a;
        factorial *= (k + 1.0) * (k + 2.0);
    }
    sum
}

/// Discrete power-law maximum-likelihood exponent over the counts `>= x_min`.
pub fn fit_power_law_exponent(counts: &[u64], x_min: u64) -> Result<f64> {
    if x_min < 1 {
        return Err(Error::Domain("x_min must be at least 1".into()));
    }
    let tail: Vec<f64> = counts
        .iter()
        .filter(|&&c| c >= x_min)
        .map(|&c| c as f64)
        .collect();
    if tail.len() < 100 {
        return Err(Error::SampleSize(format!(
            "{} counts at or above x_min={x_min}, need at least 100",
            tail.len()
        )));
    }
    if tail.iter().all(|&c| c == tail[0]) {
        return Err(Error::Degenerate("all counts are equal, the estimate diverges".into()));
    }
    let n = tail.len() as f64;
    let log_sum: f64 = tail.iter().map(|c| c.ln()).sum();
    let q = x_min as f64;
    let nll = |alpha: f64| alpha * log_sum + n * hurwitz_zeta(alpha, q).ln();

    // The negative log-likelihood is convex in alpha.
    let (mut lo, mut hi) = (1.0 + 1e-9, 50.0);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (nll(x1), nll(x2));
    while hi - lo > 1e-10 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = nll(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = nll(x2);
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn small(n: usize) -> SynthConfig {
        SynthConfig {
            n_videos: n,
            n_hosts: 50,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn hurwitz_zeta_known_values() {
        assert_relative_eq!(hurwitz_zeta(2.0, 1.0), PI * PI / 6.0, max_relative = 1e-13);
        assert_relative_eq!(hurwitz_zeta(2.0, 2.0), PI * PI / 6.0 - 1.0, max_relative = 1e-13);
        assert_relative_eq!(hurwitz_zeta(3.0, 1.0), 1.202_056_903_159_594_2, max_relative = 1e-13);
        assert_relative_eq!(hurwitz_zeta(4.0, 1.0), PI.powi(4) / 90.0, max_relative = 1e-13);
        // Brute force with a tail integral.
        let s = 2.5;
        let q = 3.0;
        let direct: f64 = (0..200_000).map(|k| (q + k as f64).powf(-s)).sum::<f64>()
            + (q + 200_000.0 - 0.5).powf(1.0 - s) / (s - 1.0);
        assert_relative_eq!(hurwitz_zeta(s, q), direct, max_relative = 1e-9);
    }

    #[test]
    fn power_law_fit_errors() {
        assert!(matches!(fit_power_law_exponent(&[1, 2], 1), Err(Error::SampleSize(_))));
        assert!(matches!(fit_power_law_exponent(&[3; 500], 1), Err(Error::Degenerate(_))));
        assert!(matches!(fit_power_law_exponent(&[1, 2, 3], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn power_law_fit_recovers_zeta_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = Zeta::new(2.5).unwrap();
        let counts: Vec<u64> = (0..100_000).map(|_| z.sample(&mut rng) as u64).collect();
        let alpha = fit_power_law_exponent(&counts, 1).unwrap();
        assert!((2.3..=2.7).contains(&alpha), "alpha = {alpha}");
    }

    #[test]
    fn rejects_invalid_config() {
        let bad = [
            SynthConfig { n_videos: 0, ..SynthConfig::default() },
            SynthConfig { power_law_alpha: 1.0, ..SynthConfig::default() },
            SynthConfig { embed_fraction: 0.0, ..SynthConfig::default() },
            SynthConfig { noise_sigma: -1.0, ..SynthConfig::default() },
            SynthConfig { missing_history_fraction: 1.5, ..SynthConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(generate_corpus(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small(300);
        let (a, ta) = generate_corpus(&cfg).unwrap();
        let (b, tb) = generate_corpus(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let (c, _) = pool.install(|| generate_corpus(&cfg).unwrap());
        assert_eq!(a.to_events(), c.to_events());
    }

    #[test]
    fn single_host_direct_sum() {
        let cfg = SynthConfig {
            n_hosts: 1,
            l_true: 2,
            ..SynthConfig::default()
        };
        let mut world = World::new(&cfg);
        world.embed = vec![vec![3.0, 1.0]];
        let embed = WebObservation {
            day: 0,
            host: world.hosts[0].clone(),
            page: "p0".into(),
            count: 1,
        };
        let mut signal = vec![0.0; 5];
        add_infections(&mut signal, &world, &[embed], &[]);
        assert_eq!(signal, vec![3.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn noiseless_views_match_forward_model() {
        let cfg = SynthConfig {
            n_videos: 400,
            n_hosts: 30,
            base_interest: BaseInterest::Zero,
            noise_sigma: 0.0,
            embed_fraction: 0.5,
            ..SynthConfig::default()
        };
        let (corpus, truth) = generate_corpus(&cfg).unwrap();
        let embed = truth.influence(WebSource::Embed);
        let link = truth.influence(WebSource::Link);
        for v in corpus.videos() {
            let mut expected = vec![0.0; cfg.horizon_days as usize];
            for (obs, table) in v
                .embeds
                .iter()
                .map(|o| (o, &embed))
                .chain(v.links.iter().map(|o| (o, &link)))
            {
                for (lag, &x) in table[obs.host.as_str()].iter().enumerate() {
                    if let Some(slot) = expected.get_mut(obs.day as usize + lag) {
                        *slot += f64::from(obs.count) * x;
                    }
                }
            }
            let got: Vec<f64> = v.timeline.daily_views().iter().map(|&x| x as f64).collect();
            assert_eq!(got, expected, "video {}", v.id());
        }
    }

    #[test]
    fn structural_invariants() {
        let cfg = SynthConfig {
            missing_history_fraction: 0.3,
            ..small(2_000)
        };
        let (corpus, truth) = generate_corpus(&cfg).unwrap();
        assert_eq!(corpus.len(), 2_000);
        assert_eq!(truth.intrinsic.len(), 2_000);
        assert!(truth.embed_influence.iter().all(|f| f.len() == cfg.l_true));
        let without = corpus.videos().iter().filter(|v| v.snapshots.is_empty()).count();
        assert!((450..750).contains(&without), "{without}");
        for v in corpus.videos() {
            for (a, b) in v.snapshots.values().zip(v.snapshots.values().skip(1)) {
                assert!(a.like_count <= b.like_count && a.comment_count <= b.comment_count);
            }
            assert!(v.embeds.iter().all(|e| e.day < cfg.horizon_days));
        }
    }

    #[test]
    fn events_roundtrip_through_ingestion() {
        let (corpus, _) = generate_corpus(&small(200)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.ndjson");
        corpus.write_events(&path).unwrap();
        let events = crate::events::read_events(&[&path]).unwrap();
        let back = crate::events::assemble_corpus(events, corpus.grid()).unwrap();
        assert_eq!(back, corpus);
    }
}
