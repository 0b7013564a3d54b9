//! Event-log records and corpus assembly.
//!
//! An event log is UTF-8 newline-delimited JSON with one record per line.
//! Every record carries `kind`, `video` and an object-centric `day`, followed
//! by the kind-specific payload fields:
//!
//! ```text
//! {"kind":"embed","video":"v1","day":3,"host":"h7","page":"p9","count_on_page":1}
//! {"kind":"views_day","video":"v1","day":0,"views":120}
//! ```
//!
//! API snapshots are observations taken at grid moment `day` and summarise
//! activity in `[0, day)`. Every other dynamic record counts activity inside
//! `[day, day + 1)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::timeline::{TimeGrid, VideoId, VideoTimeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub duration_s: u32,
    pub category: u32,
    pub title_len: u32,
    pub desc_len: u32,
    pub upload_dow: u8,
    pub upload_hour: f64,
    pub author: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorMeta {
    pub author_age_days: u64,
    pub upload_count: u64,
    pub view_sum_s: u64,
    pub friend_count: u64,
    pub subscriber_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSnapshot {
    pub comment_count: u64,
    pub like_count: u64,
    pub dislike_count: u64,
    pub rating_count: u64,
    pub min_rating: u8,
    pub max_rating: u8,
    pub avg_rating: f64,
    pub days_since_update: u32,
}

/// An embed of the video on, or a link to it from, an external page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WebEvent {
    pub host: String,
    pub page: String,
    pub count_on_page: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    VideoMeta(VideoMeta),
    AuthorMeta(AuthorMeta),
    ApiSnapshot(ApiSnapshot),
    ViewsDay { views: u64 },
    SearchShow { count: u64 },
    SearchClick { count: u64 },
    BrowseVisit { count: u64 },
    Embed(WebEvent),
    Link(WebEvent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    VideoMeta,
    AuthorMeta,
    ApiSnapshot,
    ViewsDay,
    SearchShow,
    SearchClick,
    BrowseVisit,
    Embed,
    Link,
}

impl EventKind {
    pub const ALL: [EventKind; 9] = [
        EventKind::VideoMeta,
        EventKind::AuthorMeta,
        EventKind::ApiSnapshot,
        EventKind::ViewsDay,
        EventKind::SearchShow,
        EventKind::SearchClick,
        EventKind::BrowseVisit,
        EventKind::Embed,
        EventKind::Link,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::VideoMeta => "video_meta",
            EventKind::AuthorMeta => "author_meta",
            EventKind::ApiSnapshot => "api_snapshot",
            EventKind::ViewsDay => "views_day",
            EventKind::SearchShow => "search_show",
            EventKind::SearchClick => "search_click",
            EventKind::BrowseVisit => "browse_visit",
            EventKind::Embed => "embed",
            EventKind::Link => "link",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub video: VideoId,
    pub day: u32,
    pub payload: Payload,
}

impl Event {
    pub fn new(video: VideoId, day: u32, payload: Payload) -> Self {
        Self {
            video,
            day,
            payload,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self.payload {
            Payload::VideoMeta(_) => EventKind::VideoMeta,
            Payload::AuthorMeta(_) => EventKind::AuthorMeta,
            Payload::ApiSnapshot(_) => EventKind::ApiSnapshot,
            Payload::ViewsDay { .. } => EventKind::ViewsDay,
            Payload::SearchShow { .. } => EventKind::SearchShow,
            Payload::SearchClick { .. } => EventKind::SearchClick,
            Payload::BrowseVisit { .. } => EventKind::BrowseVisit,
            Payload::Embed(_) => EventKind::Embed,
            Payload::Link(_) => EventKind::Link,
        }
    }

    fn validate(&self, line: usize) -> Result<()> {
        let fail = |message: String| Err(Error::Validation { line, message });
        match &self.payload {
            Payload::VideoMeta(m) => {
                if m.duration_s < 1 {
                    return fail("duration_s must be at least 1".into());
                }
                if m.title_len < 1 {
                    return fail("title_len must be at least 1".into());
                }
                if m.upload_dow > 6 {
                    return fail(format!("upload_dow {} outside 0..=6", m.upload_dow));
                }
                if !(0.0..24.0).contains(&m.upload_hour) {
                    return fail(format!("upload_hour {} outside [0, 24)", m.upload_hour));
                }
                if m.author.is_empty() {
                    return fail("author must be non-empty".into());
                }
            }
            Payload::AuthorMeta(a) => {
                if a.upload_count < 1 {
                    return fail("upload_count must be at least 1".into());
                }
            }
            Payload::ApiSnapshot(s) => {
                for (name, r) in [("min_rating", s.min_rating), ("max_rating", s.max_rating)] {
                    if !(1..=5).contains(&r) {
                        return fail(format!("{name} {r} outside 1..=5"));
                    }
                }
                if !(1.0..=5.0).contains(&s.avg_rating) {
                    return fail(format!("avg_rating {} outside [1, 5]", s.avg_rating));
                }
                if s.rating_count > 0
                    && !(f64::from(s.min_rating) <= s.avg_rating
                        && s.avg_rating <= f64::from(s.max_rating))
                {
                    return fail("ratings violate min <= avg <= max".into());
                }
            }
            Payload::Embed(w) | Payload::Link(w) => {
                if w.host.is_empty() || w.page.is_empty() {
                    return fail("host and page must be non-empty".into());
                }
                if w.count_on_page < 1 {
                    return fail("count_on_page must be at least 1".into());
                }
            }
            Payload::ViewsDay { .. }
            | Payload::SearchShow { .. }
            | Payload::SearchClick { .. }
            | Payload::BrowseVisit { .. } => {}
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    VideoMeta {
        video: VideoId,
        day: u32,
        #[serde(flatten)]
        meta: VideoMeta,
    },
    AuthorMeta {
        video: VideoId,
        day: u32,
        #[serde(flatten)]
        author: AuthorMeta,
    },
    ApiSnapshot {
        video: VideoId,
        day: u32,
        #[serde(flatten)]
        snapshot: ApiSnapshot,
    },
    ViewsDay {
        video: VideoId,
        day: u32,
        views: u64,
    },
    SearchShow {
        video: VideoId,
        day: u32,
        count: u64,
    },
    SearchClick {
        video: VideoId,
        day: u32,
        count: u64,
    },
    BrowseVisit {
        video: VideoId,
        day: u32,
        count: u64,
    },
    Embed {
        video: VideoId,
        day: u32,
        #[serde(flatten)]
        web: WebEvent,
    },
    Link {
        video: VideoId,
        day: u32,
        #[serde(flatten)]
        web: WebEvent,
    },
}

impl From<Record> for Event {
    fn from(r: Record) -> Self {
        match r {
            Record::VideoMeta { video, day, meta } => Event::new(video, day, Payload::VideoMeta(meta)),
            Record::AuthorMeta { video, day, author } => {
                Event::new(video, day, Payload::AuthorMeta(author))
            }
            Record::ApiSnapshot {
                video,
                day,
                snapshot,
            } => Event::new(video, day, Payload::ApiSnapshot(snapshot)),
            Record::ViewsDay { video, day, views } => Event::new(video, day, Payload::ViewsDay { views }),
            Record::SearchShow { video, day, count } => {
                Event::new(video, day, Payload::SearchShow { count })
            }
            Record::SearchClick { video, day, count } => {
                Event::new(video, day, Payload::SearchClick { count })
            }
            Record::BrowseVisit { video, day, count } => {
                Event::new(video, day, Payload::BrowseVisit { count })
            }
            Record::Embed { video, day, web } => Event::new(video, day, Payload::Embed(web)),
            Record::Link { video, day, web } => Event::new(video, day, Payload::Link(web)),
        }
    }
}

impl From<&Event> for Record {
    fn from(e: &Event) -> Self {
        let video = e.video.clone();
        let day = e.day;
        match &e.payload {
            Payload::VideoMeta(meta) => Record::VideoMeta {
                video,
                day,
                meta: meta.clone(),
            },
            Payload::AuthorMeta(author) => Record::AuthorMeta {
                video,
                day,
                author: author.clone(),
            },
            Payload::ApiSnapshot(snapshot) => Record::ApiSnapshot {
                video,
                day,
                snapshot: snapshot.clone(),
            },
            Payload::ViewsDay { views } => Record::ViewsDay {
                video,
                day,
                views: *views,
            },
            Payload::SearchShow { count } => Record::SearchShow {
                video,
                day,
                count: *count,
            },
            Payload::SearchClick { count } => Record::SearchClick {
                video,
                day,
                count: *count,
            },
            Payload::BrowseVisit { count } => Record::BrowseVisit {
                video,
                day,
                count: *count,
            },
            Payload::Embed(web) => Record::Embed {
                video,
                day,
                web: web.clone(),
            },
            Payload::Link(web) => Record::Link {
                video,
                day,
                web: web.clone(),
            },
        }
    }
}

/// Decodes one event-log line. `line_no` is only used for error reporting.
pub fn parse_event_line(line: &str, line_no: usize) -> Result<Event> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let Value::Object(fields) = &value else {
        return Err(Error::Parse {
            line: line_no,
            message: "record is not a JSON object".into(),
        });
    };
    let kind = fields
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Schema {
            line: line_no,
            message: "missing string field `kind`".into(),
        })?;
    if !EventKind::ALL.iter().any(|k| k.as_str() == kind) {
        return Err(Error::Schema {
            line: line_no,
            message: format!("unknown event kind `{kind}`"),
        });
    }
    // Every numeric field of the schema is non-negative.
    for (name, v) in fields {
        if let Value::Number(n) = v {
            if n.as_f64().is_some_and(|x| x < 0.0) {
                return Err(Error::Validation {
                    line: line_no,
                    message: format!("field `{name}` is negative ({n})"),
                });
            }
        }
    }
    let record: Record = serde_json::from_value(value).map_err(|e| Error::Schema {
        line: line_no,
        message: e.to_string(),
    })?;
    let event = Event::from(record);
    if event.video.as_str().is_empty() {
        return Err(Error::Validation {
            line: line_no,
            message: "video id must be non-empty".into(),
        });
    }
    event.validate(line_no)?;
    Ok(event)
}

pub fn serialize_event(event: &Event) -> String {
    serde_json::to_string(&Record::from(event)).expect("event records always serialize")
}

/// Reads and parses every line of the given event logs, concatenated in order.
pub fn read_events<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for path in paths {
        let reader = BufReader::new(File::open(path)?);
        let lines: Vec<(usize, String)> = reader
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|l| (i + 1, l)))
            .collect::<std::io::Result<_>>()?;
        let parsed: Vec<Event> = lines
            .par_iter()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(no, l)| parse_event_line(l, *no))
            .collect::<Result<_>>()?;
        events.extend(parsed);
    }
    Ok(events)
}

pub fn write_events<'a, I>(path: impl AsRef<Path>, events: I) -> Result<()>
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut out = BufWriter::new(File::create(path)?);
    for e in events {
        out.write_all(serialize_event(e).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// A web event placed on the video's day grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WebObservation {
    pub day: u32,
    pub host: String,
    pub page: String,
    pub count: u32,
}

/// Everything observed about one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoData {
    pub timeline: VideoTimeline,
    pub meta: VideoMeta,
    pub author: AuthorMeta,
    pub snapshots: BTreeMap<u32, ApiSnapshot>,
    /// Search-result shows per day, indexed by day.
    pub shows: Vec<u64>,
    pub clicks: Vec<u64>,
    pub visits: Vec<u64>,
    /// Sorted by `(day, host, page, count)`.
    pub embeds: Vec<WebObservation>,
    pub links: Vec<WebObservation>,
}

impl VideoData {
    pub fn id(&self) -> &VideoId {
        self.timeline.video()
    }

    pub fn web(&self, source: WebSource) -> &[WebObservation] {
        match source {
            WebSource::Embed => &self.embeds,
            WebSource::Link => &self.links,
        }
    }
}

/// Which kind of external page activity infects a video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WebSource {
    Embed,
    Link,
}

impl WebSource {
    pub const ALL: [WebSource; 2] = [WebSource::Embed, WebSource::Link];

    pub fn as_str(&self) -> &'static str {
        match self {
            WebSource::Embed => "embed",
            WebSource::Link => "link",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    grid: TimeGrid,
    videos: Vec<VideoData>,
    index: HashMap<VideoId, usize>,
    host_embeds: BTreeMap<String, u64>,
    categories: BTreeSet<u32>,
}

impl Corpus {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Videos ordered by id.
    pub fn videos(&self) -> &[VideoData] {
        &self.videos
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn get(&self, id: &VideoId) -> Option<&VideoData> {
        self.index.get(id).map(|&i| &self.videos[i])
    }

    pub fn position(&self, id: &VideoId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Host → total number of embeds.
    pub fn host_index(&self) -> &BTreeMap<String, u64> {
        &self.host_embeds
    }

    /// Category vocabulary seen at assembly.
    pub fn categories(&self) -> &BTreeSet<u32> {
        &self.categories
    }

    /// Re-emits the corpus as events in a canonical order.
    pub fn to_events(&self) -> Vec<Event> {
        self.videos.iter().flat_map(VideoData::events).collect()
    }

    /// Writes the corpus as an event log, one video at a time.
    pub fn write_events(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for v in &self.videos {
            for e in v.events() {
                out.write_all(serialize_event(&e).as_bytes())?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

impl VideoData {
    /// The events that reassemble into this record, in canonical order.
    pub fn events(&self) -> Vec<Event> {
        let id = self.id();
        let ev = |day: u32, payload: Payload| Event::new(id.clone(), day, payload);
        let mut out = vec![
            ev(0, Payload::VideoMeta(self.meta.clone())),
            ev(0, Payload::AuthorMeta(self.author.clone())),
        ];
        for (d, &views) in self.timeline.daily_views().iter().enumerate() {
            if views > 0 {
                out.push(ev(d as u32, Payload::ViewsDay { views }));
            }
        }
        for (&d, s) in &self.snapshots {
            out.push(ev(d, Payload::ApiSnapshot(s.clone())));
        }
        let counted: [(&Vec<u64>, fn(u64) -> Payload); 3] = [
            (&self.shows, |count| Payload::SearchShow { count }),
            (&self.clicks, |count| Payload::SearchClick { count }),
            (&self.visits, |count| Payload::BrowseVisit { count }),
        ];
        for (series, make) in counted {
            for (d, &count) in series.iter().enumerate() {
                if count > 0 {
                    out.push(ev(d as u32, make(count)));
                }
            }
        }
        for o in &self.embeds {
            out.push(ev(o.day, Payload::Embed(o.to_web_event())));
        }
        for o in &self.links {
            out.push(ev(o.day, Payload::Link(o.to_web_event())));
        }
        out
    }
}

impl WebObservation {
    fn to_web_event(&self) -> WebEvent {
        WebEvent {
            host: self.host.clone(),
            page: self.page.clone(),
            count_on_page: self.count,
        }
    }
}

#[derive(Default)]
struct PartialVideo {
    meta: Option<VideoMeta>,
    author: Option<AuthorMeta>,
    views: BTreeMap<u32, u64>,
    snapshots: BTreeMap<u32, ApiSnapshot>,
    shows: BTreeMap<u32, u64>,
    clicks: BTreeMap<u32, u64>,
    visits: BTreeMap<u32, u64>,
    embeds: Vec<WebObservation>,
    links: Vec<WebObservation>,
}

/// Single-writer accumulator behind [`assemble_corpus`].
pub struct CorpusBuilder {
    grid: TimeGrid,
    partial: HashMap<VideoId, PartialVideo>,
}

impl CorpusBuilder {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            grid,
            partial: HashMap::new(),
        }
    }

    pub fn push(&mut self, event: Event) -> Result<()> {
        let horizon = self.grid.horizon_days();
        if event.day > horizon {
            return Err(Error::Range(format!(
                "{} event for {} on day {} beyond horizon {horizon}",
                event.kind().as_str(),
                event.video,
                event.day
            )));
        }
        let day = event.day;
        let video = event.video;
        let p = self.partial.entry(video.clone()).or_default();
        match event.payload {
            Payload::VideoMeta(m) => {
                if p.meta.replace(m).is_some() {
                    return Err(Error::Duplicate(format!("video_meta for {video}")));
                }
            }
            Payload::AuthorMeta(a) => {
                if p.author.replace(a).is_some() {
                    return Err(Error::Duplicate(format!("author_meta for {video}")));
                }
            }
            Payload::ApiSnapshot(s) => {
                if p.snapshots.insert(day, s).is_some() {
                    return Err(Error::Duplicate(format!("api_snapshot for {video} on day {day}")));
                }
            }
            Payload::ViewsDay { views } => {
                if day >= horizon {
                    return Err(Error::Range(format!(
                        "views_day for {video} on day {day} outside [0, {horizon})"
                    )));
                }
                if p.views.insert(day, views).is_some() {
                    return Err(Error::Duplicate(format!("views_day for {video} on day {day}")));
                }
            }
            Payload::SearchShow { count } => *p.shows.entry(day).or_default() += count,
            Payload::SearchClick { count } => *p.clicks.entry(day).or_default() += count,
            Payload::BrowseVisit { count } => *p.visits.entry(day).or_default() += count,
            Payload::Embed(w) => p.embeds.push(WebObservation {
                day,
                host: w.host,
                page: w.page,
                count: w.count_on_page,
            }),
            Payload::Link(w) => p.links.push(WebObservation {
                day,
                host: w.host,
                page: w.page,
                count: w.count_on_page,
            }),
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Corpus> {
        let horizon = self.grid.horizon_days() as usize;
        let mut entries: Vec<(VideoId, PartialVideo)> = self.partial.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));

        let dense = |m: &BTreeMap<u32, u64>| {
            let mut v = vec![0u64; horizon + 1];
            for (&d, &c) in m {
                v[d as usize] += c;
            }
            v
        };

        let mut videos = Vec::with_capacity(entries.len());
        for (id, mut p) in entries {
            let meta = p
                .meta
                .take()
                .ok_or_else(|| Error::Referential(format!("events reference unknown video {id}")))?;
            let author = p
                .author
                .take()
                .ok_or_else(|| Error::Referential(format!("video {id} has no author_meta")))?;
            let mut daily = vec![0u64; horizon];
            for (&d, &v) in &p.views {
                daily[d as usize] = v;
            }
            let offset = meta.upload_hour / 24.0;
            let timeline = VideoTimeline::new(id, offset, daily)?;
            videos.push(VideoData {
                timeline,
                shows: dense(&p.shows),
                clicks: dense(&p.clicks),
                visits: dense(&p.visits),
                meta,
                author,
                snapshots: p.snapshots,
                embeds: p.embeds,
                links: p.links,
            });
        }
        Corpus::from_videos(self.grid, videos)
    }
}

impl Corpus {
    /// Builds a corpus from fully populated per-video records.
    pub fn from_videos(grid: TimeGrid, mut videos: Vec<VideoData>) -> Result<Corpus> {
        let horizon = grid.horizon_days() as usize;
        videos.sort_by(|a, b| a.id().cmp(b.id()));
        let mut host_embeds: BTreeMap<String, u64> = BTreeMap::new();
        let mut categories = BTreeSet::new();
        let mut index = HashMap::with_capacity(videos.len());
        for (i, v) in videos.iter_mut().enumerate() {
            if index.insert(v.id().clone(), i).is_some() {
                return Err(Error::Duplicate(format!("video {}", v.id())));
            }
            if v.timeline.daily_views().len() != horizon
                || [&v.shows, &v.clicks, &v.visits].iter().any(|s| s.len() != horizon + 1)
            {
                return Err(Error::Range(format!("video {} does not span the grid", v.id())));
            }
            if v.snapshots.keys().any(|&d| d as usize > horizon)
                || v.embeds.iter().chain(&v.links).any(|o| o.day as usize > horizon)
            {
                return Err(Error::Range(format!("video {} has events beyond the horizon", v.id())));
            }
            v.embeds.sort();
            v.links.sort();
            for e in &v.embeds {
                *host_embeds.entry(e.host.clone()).or_default() += u64::from(e.count);
            }
            categories.insert(v.meta.category);
        }
        Ok(Corpus {
            grid,
            videos,
            index,
            host_embeds,
            categories,
        })
    }
}

pub fn assemble_corpus<I>(events: I, grid: TimeGrid) -> Result<Corpus>
where
    I: IntoIterator<Item = Event>,
{
    let mut builder = CorpusBuilder::new(grid);
    for e in events {
        builder.push(e)?;
    }
    builder.finish()
}

/// Hosts by descending total embed count, ties by host id.
pub fn top_hosts(corpus: &Corpus, k: usize) -> Vec<String> {
    let mut hosts: Vec<(&String, u64)> = corpus.host_index().iter().map(|(h, &c)| (h, c)).collect();
    hosts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    hosts.into_iter().take(k).map(|(h, _)| h.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vid(s: &str) -> VideoId {
        VideoId::new(s).unwrap()
    }

    pub(crate) fn meta_events(video: &str) -> Vec<Event> {
        vec![
            Event::new(
                vid(video),
                0,
                Payload::VideoMeta(VideoMeta {
                    duration_s: 120,
                    category: 3,
                    title_len: 40,
                    desc_len: 200,
                    upload_dow: 2,
                    upload_hour: 18.0,
                    author: "a1".into(),
                }),
            ),
            Event::new(
                vid(video),
                0,
                Payload::AuthorMeta(AuthorMeta {
                    author_age_days: 100,
                    upload_count: 5,
                    view_sum_s: 1000,
                    friend_count: 3,
                    subscriber_count: 10,
                }),
            ),
        ]
    }

    #[test]
    fn parses_embed_line() {
        let line = r#"{"kind":"embed","video":"v1","day":3,"host":"h7","page":"p9","count_on_page":1}"#;
        let e = parse_event_line(line, 1).unwrap();
        assert_eq!(e.video, vid("v1"));
        assert_eq!(e.day, 3);
        assert_eq!(
            e.payload,
            Payload::Embed(WebEvent {
                host: "h7".into(),
                page: "p9".into(),
                count_on_page: 1
            })
        );
        assert_eq!(serialize_event(&e), line);
    }

    #[test]
    fn parses_views_line() {
        let line = r#"{"kind":"views_day","video":"v1","day":0,"views":120}"#;
        let e = parse_event_line(line, 1).unwrap();
        assert_eq!(e.payload, Payload::ViewsDay { views: 120 });
        assert_eq!(serialize_event(&e), line);
    }

    #[test]
    fn rejects_bad_lines() {
        let neg = r#"{"kind":"embed","video":"v1","day":-1,"host":"h7","page":"p9","count_on_page":1}"#;
        assert!(matches!(parse_event_line(neg, 4), Err(Error::Validation { line: 4, .. })));
        let unknown = r#"{"kind":"tweet","video":"v1","day":1}"#;
        assert!(matches!(parse_event_line(unknown, 2), Err(Error::Schema { line: 2, .. })));
        assert!(matches!(parse_event_line("{not json", 9), Err(Error::Parse { line: 9, .. })));
        let neg_count = r#"{"kind":"search_show","video":"v1","day":1,"count":-3}"#;
        assert!(matches!(parse_event_line(neg_count, 1), Err(Error::Validation { .. })));
        let zero_page = r#"{"kind":"link","video":"v1","day":1,"host":"h","page":"p","count_on_page":0}"#;
        assert!(matches!(parse_event_line(zero_page, 1), Err(Error::Validation { .. })));
        let missing = r#"{"kind":"views_day","video":"v1","day":1}"#;
        assert!(matches!(parse_event_line(missing, 1), Err(Error::Schema { .. })));
    }

    #[test]
    fn assembles_views_with_gaps() {
        let mut events = meta_events("v1");
        events.push(Event::new(vid("v1"), 0, Payload::ViewsDay { views: 120 }));
        events.push(Event::new(vid("v1"), 1, Payload::ViewsDay { views: 30 }));
        let corpus = assemble_corpus(events, TimeGrid::new(2).unwrap()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.videos()[0].timeline.daily_views(), &[120, 30]);
        assert_eq!(corpus.videos()[0].timeline.creation_offset(), 0.75);

        let mut events = meta_events("v1");
        events.push(Event::new(vid("v1"), 2, Payload::ViewsDay { views: 7 }));
        let corpus = assemble_corpus(events, TimeGrid::new(4).unwrap()).unwrap();
        assert_eq!(corpus.videos()[0].timeline.daily_views(), &[0, 0, 7, 0]);
    }

    #[test]
    fn empty_stream_gives_empty_corpus() {
        let corpus = assemble_corpus(Vec::new(), TimeGrid::default()).unwrap();
        assert!(corpus.is_empty());
        assert!(corpus.host_index().is_empty());
    }

    #[test]
    fn dangling_and_duplicate_references() {
        let mut events = meta_events("v1");
        events.push(Event::new(
            vid("ghost"),
            1,
            Payload::Embed(WebEvent {
                host: "h".into(),
                page: "p".into(),
                count_on_page: 1,
            }),
        ));
        assert!(matches!(
            assemble_corpus(events, TimeGrid::default()),
            Err(Error::Referential(_))
        ));

        let mut events = meta_events("v1");
        events.extend(meta_events("v1").into_iter().take(1));
        assert!(matches!(
            assemble_corpus(events, TimeGrid::default()),
            Err(Error::Duplicate(_))
        ));
    }

    #[test]
    fn duplicate_snapshot_is_rejected() {
        let snap = ApiSnapshot {
            comment_count: 0,
            like_count: 1,
            dislike_count: 0,
            rating_count: 1,
            min_rating: 5,
            max_rating: 5,
            avg_rating: 5.0,
            days_since_update: 0,
        };
        let mut events = meta_events("v1");
        events.push(Event::new(vid("v1"), 1, Payload::ApiSnapshot(snap.clone())));
        events.push(Event::new(vid("v1"), 1, Payload::ApiSnapshot(snap)));
        assert!(matches!(
            assemble_corpus(events, TimeGrid::default()),
            Err(Error::Duplicate(_))
        ));
    }

    fn corpus_with_hosts(hosts: &[(&str, u32)]) -> Corpus {
        let mut events = meta_events("v1");
        for (i, (h, n)) in hosts.iter().enumerate() {
            events.push(Event::new(
                vid("v1"),
                1,
                Payload::Embed(WebEvent {
                    host: h.to_string(),
                    page: format!("p{i}"),
                    count_on_page: *n,
                }),
            ));
        }
        assemble_corpus(events, TimeGrid::default()).unwrap()
    }

    #[test]
    fn top_hosts_examples() {
        let c = corpus_with_hosts(&[("A", 5), ("B", 9)]);
        assert_eq!(top_hosts(&c, 1), vec!["B".to_string()]);
        let c = corpus_with_hosts(&[("B", 5), ("A", 5)]);
        assert_eq!(top_hosts(&c, 2), vec!["A".to_string(), "B".to_string()]);
        assert_eq!(top_hosts(&c, 10).len(), 2);
    }

    fn arb_event() -> impl Strategy<Value = Event> {
        let id = "[a-z][a-z0-9]{0,6}";
        let payload = prop_oneof![
            (1u32..10_000, 0u32..20, 1u32..200, 0u32..5000, 0u8..7, 0u32..24, 0u32..4, "[a-z]{1,5}").prop_map(
                |(duration_s, category, title_len, desc_len, upload_dow, h, q, author)| {
                    Payload::VideoMeta(VideoMeta {
                        duration_s,
                        category,
                        title_len,
                        desc_len,
                        upload_dow,
                        upload_hour: f64::from(h) + f64::from(q) * 0.25,
                        author,
                    })
                }
            ),
            (0u64..1000, 1u64..100, 0u64..10_000, 0u64..100, 0u64..10_000).prop_map(
                |(author_age_days, upload_count, view_sum_s, friend_count, subscriber_count)| {
                    Payload::AuthorMeta(AuthorMeta {
                        author_age_days,
                        upload_count,
                        view_sum_s,
                        friend_count,
                        subscriber_count,
                    })
                }
            ),
            (0u64..100, 0u64..100, 0u64..100, 0u32..30, 0.0f64..1.0).prop_map(|(c, l, d, u, frac)| {
                let rating_count = l + d;
                Payload::ApiSnapshot(ApiSnapshot {
                    comment_count: c,
                    like_count: l,
                    dislike_count: d,
                    rating_count,
                    min_rating: 1,
                    max_rating: 5,
                    avg_rating: 1.0 + 4.0 * frac,
                    days_since_update: u,
                })
            }),
            (0u64..u64::MAX / 2).prop_map(|views| Payload::ViewsDay { views }),
            (0u64..1000).prop_map(|count| Payload::SearchShow { count }),
            (0u64..1000).prop_map(|count| Payload::SearchClick { count }),
            (0u64..1000).prop_map(|count| Payload::BrowseVisit { count }),
            ("[a-z0-9.]{1,8}", "[a-z0-9/]{1,8}", 1u32..5).prop_map(|(host, page, count_on_page)| {
                Payload::Embed(WebEvent { host, page, count_on_page })
            }),
            ("[a-z0-9.]{1,8}", "[a-z0-9/]{1,8}", 1u32..5).prop_map(|(host, page, count_on_page)| {
                Payload::Link(WebEvent { host, page, count_on_page })
            }),
        ];
        (id, 0u32..100, payload).prop_map(|(v, day, payload)| Event::new(vid(&v), day, payload))
    }

    proptest! {
        #[test]
        fn serialize_parse_roundtrip(e in arb_event()) {
            let line = serialize_event(&e);
            let back = parse_event_line(&line, 1).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(serialize_event(&back), line);
        }

        #[test]
        fn assembly_is_order_insensitive(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut events = meta_events("v1");
            events.extend(meta_events("v2"));
            for d in 0..5u32 {
                events.push(Event::new(vid("v1"), d, Payload::ViewsDay { views: u64::from(d) * 3 }));
                events.push(Event::new(vid("v2"), d, Payload::SearchShow { count: 2 }));
                events.push(Event::new(vid("v2"), d, Payload::SearchShow { count: 1 }));
                events.push(Event::new(vid("v1"), d, Payload::Embed(WebEvent {
                    host: format!("h{}", d % 2), page: format!("p{d}"), count_on_page: 1,
                })));
            }
            let reference = assemble_corpus(events.clone(), TimeGrid::default()).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            events.shuffle(&mut rng);
            let shuffled = assemble_corpus(events, TimeGrid::default()).unwrap();
            prop_assert_eq!(reference, shuffled);
        }
    }
}
