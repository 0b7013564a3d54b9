//! Object-centric day grid, popularity targets and prediction tasks.
//!
//! Every video lives on its own time scale: day 0 is the calendar day (UTC)
//! of its upload, so the creation moment falls in `[0, 1)` days. Features and
//! targets are only evaluated at integer grid points `0..=M`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Target days of the first two weeks, `1..=14`.
pub const TARGET_DAYS: std::ops::RangeInclusive<u32> = 1..=14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    tau_seconds: i64,
    horizon_days: u32,
}

impl TimeGrid {
    pub const DEFAULT_HORIZON: u32 = 27;

    pub fn new(horizon_days: u32) -> Result<Self> {
        if horizon_days < 1 {
            return Err(Error::Range("grid horizon must be at least one day".into()));
        }
        Ok(Self {
            tau_seconds: SECONDS_PER_DAY,
            horizon_days,
        })
    }

    pub fn tau_seconds(&self) -> i64 {
        self.tau_seconds
    }

    /// `M`: the last grid point.
    pub fn horizon_days(&self) -> u32 {
        self.horizon_days
    }

    pub fn contains(&self, day: u32) -> bool {
        day <= self.horizon_days
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_HORIZON).expect("default horizon is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VideoId(String);

impl VideoId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Domain("video id must be non-empty".into()));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Daily view history of one video on its own grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTimeline {
    video: VideoId,
    creation_offset: f64,
    daily_views: Vec<u64>,
}

impl VideoTimeline {
    pub fn new(video: VideoId, creation_offset: f64, daily_views: Vec<u64>) -> Result<Self> {
        if !(0.0..1.0).contains(&creation_offset) {
            return Err(Error::Domain(format!(
                "creation offset {creation_offset} outside [0, 1)"
            )));
        }
        Ok(Self {
            video,
            creation_offset,
            daily_views,
        })
    }

    pub fn video(&self) -> &VideoId {
        &self.video
    }

    pub fn creation_offset(&self) -> f64 {
        self.creation_offset
    }

    /// Views received during `[d, d+1)` at index `d`.
    pub fn daily_views(&self) -> &[u64] {
        &self.daily_views
    }

    pub fn len_days(&self) -> u32 {
        self.daily_views.len() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetKind {
    ViewsCumulative,
    ViewsDaily,
}

/// One of the four popularity targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Target {
    pub kind: TargetKind,
    pub log_transformed: bool,
}

impl Target {
    pub const ALL: [Target; 4] = [
        Target::new(TargetKind::ViewsCumulative, true),
        Target::new(TargetKind::ViewsDaily, true),
        Target::new(TargetKind::ViewsCumulative, false),
        Target::new(TargetKind::ViewsDaily, false),
    ];

    pub const fn new(kind: TargetKind, log_transformed: bool) -> Self {
        Self {
            kind,
            log_transformed,
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.kind, self.log_transformed) {
            (TargetKind::ViewsCumulative, false) => "Views[c]",
            (TargetKind::ViewsDaily, false) => "Views[d]",
            (TargetKind::ViewsCumulative, true) => "log(Views[c])",
            (TargetKind::ViewsDaily, true) => "log(Views[d])",
        }
    }

    /// The same target with the log flag flipped.
    pub fn counterpart(&self) -> Target {
        Target::new(self.kind, !self.log_transformed)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown target `{s}`")))
    }
}

impl Serialize for Target {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Predict `target` at day `target_day` from data observed up to `current_day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PredictionTask {
    target: Target,
    current_day: u32,
    target_day: u32,
}

impl PredictionTask {
    pub fn new(target: Target, current_day: u32, target_day: u32) -> Result<Self> {
        if !TARGET_DAYS.contains(&target_day) {
            return Err(Error::Range(format!("target day {target_day} outside 1..=14")));
        }
        if current_day < 1 || current_day > target_day {
            return Err(Error::Range(format!(
                "current day {current_day} must lie in 1..={target_day}"
            )));
        }
        Ok(Self {
            target,
            current_day,
            target_day,
        })
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn current_day(&self) -> u32 {
        self.current_day
    }

    pub fn target_day(&self) -> u32 {
        self.target_day
    }

    /// Crawl delay `t_t - t_c`.
    pub fn delay(&self) -> u32 {
        self.target_day - self.current_day
    }

    pub fn is_current(&self) -> bool {
        self.current_day == self.target_day
    }
}

/// `log2(x + 1)`.
pub fn log_transform(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("log transform of negative value {x}")));
    }
    Ok((x + 1.0).log2())
}

/// Infallible variant for feature columns: negative inputs map to `-log2(1 - x)`.
pub(crate) fn signed_log(x: f64) -> f64 {
    if x >= 0.0 {
        (x + 1.0).log2()
    } else {
        -(1.0 - x).log2()
    }
}

pub fn target_value(timeline: &VideoTimeline, target: Target, t: u32) -> Result<f64> {
    let views = timeline.daily_views();
    if t < 1 || t as usize > views.len() {
        return Err(Error::Range(format!(
            "day {t} outside 1..={} for video {}",
            views.len(),
            timeline.video()
        )));
    }
    let raw = match target.kind {
        TargetKind::ViewsCumulative => views[..t as usize].iter().sum::<u64>(),
        TargetKind::ViewsDaily => views[t as usize - 1],
    } as f64;
    if target.log_transformed {
        log_transform(raw)
    } else {
        Ok(raw)
    }
}

/// Start of the UTC calendar day containing `timestamp` (seconds).
pub fn day_zero(timestamp: i64) -> i64 {
    timestamp - timestamp.rem_euclid(SECONDS_PER_DAY)
}

/// Fraction of the creation day elapsed at upload time.
pub fn creation_offset(upload_timestamp: i64) -> f64 {
    upload_timestamp.rem_euclid(SECONDS_PER_DAY) as f64 / SECONDS_PER_DAY as f64
}

/// Object-centric day index of an absolute timestamp.
pub fn event_day(event_timestamp: i64, video_day_zero: i64) -> Result<u32> {
    if event_timestamp < video_day_zero {
        return Err(Error::Ordering(format!(
            "event at {event_timestamp} precedes day zero {video_day_zero}"
        )));
    }
    let day = (event_timestamp - video_day_zero) / SECONDS_PER_DAY;
    u32::try_from(day).map_err(|_| Error::Range(format!("event day {day} overflows")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn timeline(views: &[u64]) -> VideoTimeline {
        VideoTimeline::new(VideoId::new("v").unwrap(), 0.0, views.to_vec()).unwrap()
    }

    #[test]
    fn log_transform_examples() {
        assert_eq!(log_transform(0.0).unwrap(), 0.0);
        assert_eq!(log_transform(1.0).unwrap(), 1.0);
        assert_eq!(log_transform(7.0).unwrap(), 3.0);
        assert!(matches!(log_transform(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn target_examples() {
        let tl = timeline(&[5, 3, 2]);
        let cum = Target::new(TargetKind::ViewsCumulative, false);
        let daily = Target::new(TargetKind::ViewsDaily, false);
        assert_eq!(target_value(&tl, cum, 3).unwrap(), 10.0);
        assert_eq!(target_value(&tl, daily, 2).unwrap(), 3.0);
        let tl = timeline(&[7, 0]);
        let log_cum = Target::new(TargetKind::ViewsCumulative, true);
        assert_eq!(target_value(&tl, log_cum, 1).unwrap(), 3.0);
        assert!(matches!(target_value(&tl, cum, 0), Err(Error::Range(_))));
        assert!(matches!(target_value(&tl, cum, 3), Err(Error::Range(_))));
    }

    #[test]
    fn event_day_examples() {
        let zero = 1_700_006_400; // a UTC midnight
        assert_eq!(day_zero(zero), zero);
        assert_eq!(event_day(zero + 6 * 3600, zero).unwrap(), 0);
        assert_eq!(event_day(zero + 36 * 3600, zero).unwrap(), 1);
        assert!(matches!(event_day(zero - 1, zero), Err(Error::Ordering(_))));
        assert_eq!(creation_offset(zero + 18 * 3600), 0.75);
    }

    #[test]
    fn targets_are_four_and_parse() {
        let names: std::collections::BTreeSet<_> = Target::ALL.iter().map(|t| t.name()).collect();
        assert_eq!(names.len(), 4);
        for t in Target::ALL {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
        }
    }

    #[test]
    fn prediction_task_bounds() {
        let t = Target::ALL[0];
        assert!(PredictionTask::new(t, 3, 3).unwrap().is_current());
        assert_eq!(PredictionTask::new(t, 2, 5).unwrap().delay(), 3);
        assert!(PredictionTask::new(t, 0, 5).is_err());
        assert!(PredictionTask::new(t, 6, 5).is_err());
        assert!(PredictionTask::new(t, 1, 15).is_err());
    }

    proptest! {
        #[test]
        fn cumulative_is_prefix_sum_of_daily(views in prop::collection::vec(0u64..10_000, 1..30)) {
            let tl = timeline(&views);
            let cum = Target::new(TargetKind::ViewsCumulative, false);
            let daily = Target::new(TargetKind::ViewsDaily, false);
            let mut running = 0.0;
            let mut prev = 0.0;
            for t in 1..=views.len() as u32 {
                running += target_value(&tl, daily, t).unwrap();
                let c = target_value(&tl, cum, t).unwrap();
                prop_assert_eq!(c, running);
                prop_assert!(c >= prev);
                prev = c;
            }
        }

        #[test]
        fn log_transform_is_strictly_monotone(a in 0u32..1_000_000_000, b in 0u32..1_000_000_000) {
            prop_assume!(a < b);
            prop_assert!(log_transform(a as f64).unwrap() < log_transform(b as f64).unwrap());
        }
    }
}
