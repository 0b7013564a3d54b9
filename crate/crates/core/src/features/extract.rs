//! Per-video feature extraction at a current day `t_c`.
//!
//! Cumulative features cover `[0, t_c)`, daily ones `[t_c − 1, t_c)`. API
//! snapshots taken at moment `s` summarise `[0, s)`, so the latest snapshot
//! at or before `t_c` is the cumulative value.

use std::collections::{BTreeSet, HashMap};

use super::{ColumnDef, Leaf, SENTINEL};
use crate::events::{ApiSnapshot, VideoData, WebObservation};
use crate::lim::LimBank;

/// Appends values, and in naming mode also the column definitions, in one
/// fixed order shared by every video.
pub(crate) struct Emit<'a> {
    pub out: &'a mut Vec<f64>,
    pub defs: Option<&'a mut Vec<ColumnDef>>,
}

fn log_or_sentinel(v: f64) -> f64 {
    if v < 0.0 {
        SENTINEL
    } else {
        (v + 1.0).log2()
    }
}

impl Emit<'_> {
    fn col(&mut self, leaf: Leaf, feature: &str, name: impl FnOnce() -> String, v: f64) {
        if let Some(defs) = self.defs.as_deref_mut() {
            defs.push(ColumnDef {
                name: name(),
                feature: feature.to_string(),
                leaf,
            });
        }
        self.out.push(v);
    }

    /// `X` and `log(X)`.
    fn nl(&mut self, leaf: Leaf, feature: &str, v: f64) {
        self.col(leaf, feature, || feature.to_string(), v);
        self.col(leaf, feature, || format!("log({feature})"), log_or_sentinel(v));
    }

    /// `X[c]`, `X[d]` and, with `log`, `log(X[c])`, `log(X[d])`.
    fn cd(&mut self, leaf: Leaf, feature: &str, c: f64, d: f64, log: bool) {
        self.col(leaf, feature, || format!("{feature}[c]"), c);
        self.col(leaf, feature, || format!("{feature}[d]"), d);
        if log {
            self.col(leaf, feature, || format!("log({feature}[c])"), log_or_sentinel(c));
            self.col(leaf, feature, || format!("log({feature}[d])"), log_or_sentinel(d));
        }
    }
}

pub(crate) fn emit_video(
    e: &mut Emit<'_>,
    v: &VideoData,
    t_c: u32,
    categories: &BTreeSet<u32>,
    bank: Option<&LimBank>,
) {
    static_video(e, v, categories);
    static_author(e, v);
    api_dynamic(e, &v.snapshots, t_c);
    log_features(e, v, t_c);
    web_block(e, &v.embeds, t_c, &WEB_EMBED);
    web_block(e, &v.links, t_c, &WEB_LINK);
    if let Some(bank) = bank {
        let names = e.defs.is_some().then(|| bank.column_names());
        let values = bank.video_features(v, t_c);
        for (j, (x, m)) in values.iter().zip(bank.models().iter().flat_map(|m| [m, m, m, m])).enumerate() {
            let feature = match m.config.source {
                crate::events::WebSource::Embed => "EmbedHost",
                crate::events::WebSource::Link => "LinkHost",
            };
            e.col(Leaf::WebNag, feature, || names.as_ref().unwrap()[j].clone(), *x);
        }
    }
}

fn static_video(e: &mut Emit<'_>, v: &VideoData, categories: &BTreeSet<u32>) {
    let m = &v.meta;
    let leaf = Leaf::ApiSv;
    e.nl(leaf, "Dur", f64::from(m.duration_s));
    for &c in categories {
        e.col(leaf, "Cat", || format!("Cat={c}"), f64::from(u8::from(m.category == c)));
    }
    let other = !categories.contains(&m.category);
    e.col(leaf, "Cat", || "Cat=other".to_string(), f64::from(u8::from(other)));
    e.nl(leaf, "TitleLen", f64::from(m.title_len));
    e.nl(leaf, "DescLen", f64::from(m.desc_len));
    for k in 0..7u8 {
        e.col(leaf, "UplDOW", || format!("UplDOW={k}"), f64::from(u8::from(m.upload_dow == k)));
    }
    e.col(leaf, "UplHour", || "UplHour".to_string(), m.upload_hour);
}

fn static_author(e: &mut Emit<'_>, v: &VideoData) {
    let a = &v.author;
    let leaf = Leaf::ApiSa;
    e.nl(leaf, "AuthAge", a.author_age_days as f64);
    e.nl(leaf, "AUplCnt", a.upload_count as f64);
    e.nl(leaf, "AViewSum", a.view_sum_s as f64);
    e.nl(leaf, "FrndCnt", a.friend_count as f64);
    e.nl(leaf, "SubsCnt", a.subscriber_count as f64);
}

type Counter = fn(&ApiSnapshot) -> u64;

const API_COUNTS: [(&str, Counter); 4] = [
    ("CommCnt", |s| s.comment_count),
    ("LikeCnt", |s| s.like_count),
    ("DislCnt", |s| s.dislike_count),
    ("RatCnt", |s| s.rating_count),
];

fn api_dynamic(e: &mut Emit<'_>, snapshots: &std::collections::BTreeMap<u32, ApiSnapshot>, t_c: u32) {
    let leaf = Leaf::ApiD;
    let latest = snapshots.range(..=t_c).next_back().map(|(_, s)| s);
    let Some(latest) = latest else {
        for (name, _) in API_COUNTS {
            e.cd(leaf, name, SENTINEL, SENTINEL, true);
        }
        for name in ["MinRat", "MaxRat", "AvgRat"] {
            e.col(leaf, name, || name.to_string(), SENTINEL);
        }
        e.nl(leaf, "Update", SENTINEL);
        return;
    };
    let now = snapshots.get(&t_c);
    // Moment 0 is the upload itself, where every count is zero.
    let prev = if t_c == 1 { None } else { snapshots.get(&(t_c - 1)) };
    let prev_available = t_c == 1 || prev.is_some();
    for (name, get) in API_COUNTS {
        let cumulative = get(latest) as f64;
        let daily = match now {
            Some(now) if prev_available => get(now).saturating_sub(prev.map_or(0, get)) as f64,
            _ => 0.0,
        };
        e.cd(leaf, name, cumulative, daily, true);
    }
    let rated = latest.rating_count > 0;
    let rating = |x: f64| if rated { x } else { SENTINEL };
    e.col(leaf, "MinRat", || "MinRat".to_string(), rating(f64::from(latest.min_rating)));
    e.col(leaf, "MaxRat", || "MaxRat".to_string(), rating(f64::from(latest.max_rating)));
    e.col(leaf, "AvgRat", || "AvgRat".to_string(), rating(latest.avg_rating));
    e.nl(leaf, "Update", f64::from(latest.days_since_update));
}

fn window(series: &[u64], t_c: u32) -> (f64, f64) {
    let t = t_c as usize;
    let cumulative: u64 = series[..t.min(series.len())].iter().sum();
    let daily = series.get(t - 1).copied().unwrap_or(0);
    (cumulative as f64, daily as f64)
}

fn ctr(clicks: f64, shows: f64) -> f64 {
    if shows == 0.0 {
        0.0
    } else {
        (clicks / shows).min(1.0)
    }
}

fn log_features(e: &mut Emit<'_>, v: &VideoData, t_c: u32) {
    let (shows_c, shows_d) = window(&v.shows, t_c);
    let (clicks_c, clicks_d) = window(&v.clicks, t_c);
    let (visits_c, visits_d) = window(&v.visits, t_c);
    e.cd(Leaf::LogS, "ShowURL", shows_c, shows_d, true);
    e.cd(Leaf::LogS, "ClickURL", clicks_c, clicks_d, true);
    e.cd(Leaf::LogS, "CTR", ctr(clicks_c, shows_c), ctr(clicks_d, shows_d), false);
    e.cd(Leaf::LogB, "BrowVisit", visits_c, visits_d, true);
}

struct WebNames {
    count: &'static str,
    hosts: &'static str,
    max_per_host: &'static str,
    avg_per_host: &'static str,
    per_page: Option<(&'static str, &'static str)>,
    first: &'static str,
    last: &'static str,
    avg: &'static str,
}

const WEB_EMBED: WebNames = WebNames {
    count: "EmbCnt",
    hosts: "EmbHCnt",
    max_per_host: "MaxEPerH",
    avg_per_host: "AvgEPerH",
    per_page: Some(("MaxEPerP", "AvgEPerP")),
    first: "FirstEmb",
    last: "LastEmb",
    avg: "AvgEmb",
};

const WEB_LINK: WebNames = WebNames {
    count: "LinkCnt",
    hosts: "LinkHCnt",
    max_per_host: "MaxLPerH",
    avg_per_host: "AvgLPerH",
    per_page: None,
    first: "FirstLink",
    last: "LastLink",
    avg: "AvgLink",
};

#[derive(Default)]
struct WebStats {
    count: f64,
    hosts: f64,
    max_per_host: f64,
    avg_per_host: f64,
    max_per_page: f64,
    avg_per_page: f64,
}

fn web_stats<'a>(obs: impl Iterator<Item = &'a WebObservation>) -> WebStats {
    let mut per_host: HashMap<&str, u64> = HashMap::new();
    let mut per_page: HashMap<(&str, &str), u64> = HashMap::new();
    let mut count = 0u64;
    for o in obs {
        let c = u64::from(o.count);
        count += c;
        *per_host.entry(&o.host).or_default() += c;
        *per_page.entry((&o.host, &o.page)).or_default() += c;
    }
    if count == 0 {
        return WebStats::default();
    }
    let count = count as f64;
    WebStats {
        count,
        hosts: per_host.len() as f64,
        max_per_host: per_host.values().copied().max().unwrap_or(0) as f64,
        avg_per_host: count / per_host.len() as f64,
        max_per_page: per_page.values().copied().max().unwrap_or(0) as f64,
        avg_per_page: count / per_page.len() as f64,
    }
}

fn web_block(e: &mut Emit<'_>, obs: &[WebObservation], t_c: u32, names: &WebNames) {
    let leaf = Leaf::WebAg;
    let cumulative = web_stats(obs.iter().filter(|o| o.day < t_c));
    let daily = web_stats(obs.iter().filter(|o| o.day + 1 == t_c));
    e.cd(leaf, names.count, cumulative.count, daily.count, true);
    e.cd(leaf, names.hosts, cumulative.hosts, daily.hosts, true);
    e.cd(leaf, names.max_per_host, cumulative.max_per_host, daily.max_per_host, true);
    e.cd(leaf, names.avg_per_host, cumulative.avg_per_host, daily.avg_per_host, true);
    if let Some((max_pp, avg_pp)) = names.per_page {
        e.cd(leaf, max_pp, cumulative.max_per_page, daily.max_per_page, true);
        e.cd(leaf, avg_pp, cumulative.avg_per_page, daily.avg_per_page, true);
    }

    let mut first = None;
    let mut last = None;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for o in obs.iter().filter(|o| o.day < t_c) {
        let since = f64::from(t_c - o.day);
        first = Some(first.map_or(since, |f: f64| f.max(since)));
        last = Some(last.map_or(since, |l: f64| l.min(since)));
        weighted += f64::from(o.count) * since;
        total += f64::from(o.count);
    }
    e.nl(leaf, names.first, first.unwrap_or(SENTINEL));
    e.nl(leaf, names.last, last.unwrap_or(SENTINEL));
    e.nl(
        leaf,
        names.avg,
        if total > 0.0 { weighted / total } else { SENTINEL },
    );
}
