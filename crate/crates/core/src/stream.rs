//! Reading, labelling and replaying event streams.
//!
//! CSV input has the header `timestamp,activity[,lifecycle][,resource][,case_id]`
//! (optional columns in any order). JSON-lines input has one object per line
//! with the same keys.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::correlator::{Lifecycle, UncorrelatedEvent};
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: bad timestamp {value:?}")]
    Timestamp { line: u64, value: String },
    #[error("line {line}: {message}")]
    Lifecycle { line: u64, message: String },
    #[error("missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error("line {line}: missing case_id")]
    MissingCaseId { line: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl`/`.ndjson`/`.json` select JSON lines; anything else CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson" | "json") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" | "ndjson" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// An event together with its true case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEvent {
    #[serde(flatten)]
    pub event: UncorrelatedEvent,
    pub case_id: String,
}

/// Parsed input plus any non-fatal warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Read<T> {
    pub events: Vec<T>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    timestamp: String,
    activity: String,
    #[serde(default)]
    lifecycle: Option<String>,
    #[serde(default, deserialize_with = "lenient_string")]
    resource: Option<String>,
    #[serde(default, deserialize_with = "lenient_string")]
    case_id: Option<String>,
}

/// JSON values may be strings or numbers; blank strings become `None`.
fn lenient_string<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        S(String),
        N(serde_json::Number),
    }
    Ok(match Option::<Either>::deserialize(d)? {
        Some(Either::S(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Some(Either::N(n)) => Some(n.to_string()),
        _ => None,
    })
}

impl RawRow {
    fn into_labeled(self, line: u64) -> Result<(UncorrelatedEvent, Option<String>), StreamError> {
        let timestamp = Timestamp::parse(&self.timestamp).map_err(|_| StreamError::Timestamp {
            line,
            value: self.timestamp.clone(),
        })?;
        let activity = self.activity.trim();
        if activity.is_empty() {
            return Err(StreamError::Malformed {
                line,
                message: "empty activity".into(),
            });
        }
        let lifecycle = match self.lifecycle.as_deref() {
            Some(l) => l.parse().map_err(|message| StreamError::Lifecycle { line, message })?,
            None => Lifecycle::Completed,
        };
        let event = UncorrelatedEvent {
            timestamp,
            activity: activity.to_string(),
            lifecycle,
            resource: self.resource,
        };
        Ok((event, self.case_id))
    }
}

fn read_rows<R: io::Read>(
    reader: R,
    format: Format,
) -> Result<Vec<(UncorrelatedEvent, Option<String>, u64)>, StreamError> {
    let mut rows = Vec::new();
    match format {
        Format::Csv => {
            let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
            let headers = csv
                .headers()
                .map_err(|e| StreamError::Malformed {
                    line: 1,
                    message: e.to_string(),
                })?
                .clone();
            if headers.is_empty() {
                return Ok(rows);
            }
            let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
            let timestamp = column("timestamp").ok_or(StreamError::MissingColumn("timestamp"))?;
            let activity = column("activity").ok_or(StreamError::MissingColumn("activity"))?;
            let (lifecycle, resource, case_id) = (column("lifecycle"), column("resource"), column("case_id"));
            for record in csv.records() {
                let record = record.map_err(|e| StreamError::Malformed {
                    line: e.position().map_or(0, |p| p.line()),
                    message: e.to_string(),
                })?;
                let line = record.position().map_or(0, |p| p.line());
                let field = |i: Option<usize>| {
                    i.and_then(|i| record.get(i))
                        .filter(|v| !v.is_empty())
                        .map(str::to_string)
                };
                let raw = RawRow {
                    timestamp: field(Some(timestamp)).unwrap_or_default(),
                    activity: field(Some(activity)).unwrap_or_default(),
                    lifecycle: field(lifecycle),
                    resource: field(resource),
                    case_id: field(case_id),
                };
                let (event, case) = raw.into_labeled(line)?;
                rows.push((event, case, line));
            }
        }
        Format::Jsonl => {
            for (i, text) in io::BufReader::new(reader).lines().enumerate() {
                let text = text?;
                let line = i as u64 + 1;
                if text.trim().is_empty() {
                    continue;
                }
                let raw: RawRow = serde_json::from_str(&text).map_err(|e| StreamError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
                let (event, case) = raw.into_labeled(line)?;
                rows.push((event, case, line));
            }
        }
    }
    Ok(rows)
}

fn sort_with_warning<T>(events: &mut [T], ts: impl Fn(&T) -> Timestamp, warnings: &mut Vec<String>) {
    let inversions = events.windows(2).filter(|w| ts(&w[1]) < ts(&w[0])).count();
    if inversions > 0 {
        events.sort_by_key(|e| ts(e));
        let message = format!("input not in timestamp order ({inversions} inversions); sorted stably");
        log::warn!("{message}");
        warnings.push(message);
    }
}

/// Reads an unlabeled stream. Any `case_id` column is ignored.
pub fn read_events<R: io::Read>(reader: R, format: Format) -> Result<Read<UncorrelatedEvent>, StreamError> {
    let mut events: Vec<UncorrelatedEvent> = read_rows(reader, format)?.into_iter().map(|(e, _, _)| e).collect();
    let mut warnings = Vec::new();
    sort_with_warning(&mut events, |e| e.timestamp, &mut warnings);
    Ok(Read { events, warnings })
}

/// Reads a log in which every row carries a `case_id`.
pub fn read_labeled<R: io::Read>(reader: R, format: Format) -> Result<Read<LabeledEvent>, StreamError> {
    let mut events = read_rows(reader, format)?
        .into_iter()
        .map(|(event, case, line)| match case {
            Some(case_id) => Ok(LabeledEvent { event, case_id }),
            None => Err(StreamError::MissingCaseId { line }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut warnings = Vec::new();
    sort_with_warning(&mut events, |e| e.event.timestamp, &mut warnings);
    Ok(Read { events, warnings })
}

/// Writes events one row at a time, flushing after each, so that a paced
/// replay shows up downstream as it happens.
pub struct EventWriter<W: io::Write> {
    out: csv::Writer<W>,
    labeled: bool,
}

impl<W: io::Write> EventWriter<W> {
    pub fn new(writer: W, labeled: bool) -> csv::Result<Self> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp", "activity", "lifecycle", "resource"];
        if labeled {
            header.push("case_id");
        }
        out.write_record(&header)?;
        out.flush()?;
        Ok(EventWriter { out, labeled })
    }

    pub fn write(&mut self, e: &UncorrelatedEvent, case: Option<&str>) -> csv::Result<()> {
        let ts = e.timestamp.to_string();
        let mut record = vec![
            ts.as_str(),
            e.activity.as_str(),
            e.lifecycle.as_str(),
            e.resource.as_deref().unwrap_or(""),
        ];
        if self.labeled {
            record.push(case.unwrap_or(""));
        }
        self.out.write_record(&record)?;
        self.out.flush()?;
        Ok(())
    }
}

fn write_rows<'a, W: io::Write>(
    writer: W,
    rows: impl Iterator<Item = (&'a UncorrelatedEvent, Option<&'a str>)>,
    labeled: bool,
) -> csv::Result<()> {
    let mut out = EventWriter::new(writer, labeled)?;
    for (e, case) in rows {
        out.write(e, case)?;
    }
    Ok(())
}

pub fn write_events<W: io::Write>(writer: W, events: &[UncorrelatedEvent]) -> csv::Result<()> {
    write_rows(writer, events.iter().map(|e| (e, None)), false)
}

pub fn write_labeled<W: io::Write>(writer: W, events: &[LabeledEvent]) -> csv::Result<()> {
    write_rows(
        writer,
        events.iter().map(|e| (&e.event, Some(e.case_id.as_str()))),
        true,
    )
}

/// Identifies an event within a stream. `ordinal` counts earlier events with
/// the same timestamp and activity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventKey {
    pub timestamp: Timestamp,
    pub activity: String,
    pub ordinal: u32,
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, #{})", self.timestamp, self.activity, self.ordinal)
    }
}

/// Keys for `events` in order.
pub fn event_keys<'a>(events: impl IntoIterator<Item = &'a UncorrelatedEvent>) -> Vec<EventKey> {
    let mut seen: HashMap<(Timestamp, &str), u32> = HashMap::new();
    events
        .into_iter()
        .map(|e| {
            let n = seen.entry((e.timestamp, e.activity.as_str())).or_insert(0);
            let key = EventKey {
                timestamp: e.timestamp,
                activity: e.activity.clone(),
                ordinal: *n,
            };
            *n += 1;
            key
        })
        .collect()
}

/// True case of every event of a stripped stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth(BTreeMap<EventKey, String>);

impl GroundTruth {
    pub fn get(&self, key: &EventKey) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EventKey, &str)> {
        self.0.iter().map(|(k, v)| (k, v.as_str()))
    }

    /// Restores case ids; `None` if some event is not covered.
    pub fn relabel(&self, events: &[UncorrelatedEvent]) -> Option<Vec<LabeledEvent>> {
        event_keys(events)
            .into_iter()
            .zip(events)
            .map(|(k, e)| {
                self.get(&k).map(|c| LabeledEvent {
                    event: e.clone(),
                    case_id: c.to_string(),
                })
            })
            .collect()
    }
}

impl FromIterator<(EventKey, String)> for GroundTruth {
    fn from_iter<I: IntoIterator<Item = (EventKey, String)>>(iter: I) -> Self {
        GroundTruth(iter.into_iter().collect())
    }
}

pub fn strip_case_ids(labeled: &[LabeledEvent]) -> (Vec<UncorrelatedEvent>, GroundTruth) {
    let events: Vec<UncorrelatedEvent> = labeled.iter().map(|l| l.event.clone()).collect();
    let truth = event_keys(&events)
        .into_iter()
        .zip(labeled)
        .map(|(k, l)| (k, l.case_id.clone()))
        .collect();
    (events, truth)
}

/// Time source for [`replay`].
pub trait Clock {
    fn now(&self) -> Duration;
    fn sleep(&mut self, d: Duration);
}

/// Advances only when asked to sleep.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    elapsed: Duration,
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        self.elapsed
    }

    fn sleep(&mut self, d: Duration) {
        self.elapsed += d;
    }
}

#[derive(Debug, Clone)]
pub struct WallClock {
    origin: Instant,
}

impl Default for WallClock {
    fn default() -> Self {
        WallClock { origin: Instant::now() }
    }
}

impl Clock for WallClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    pub delivered: usize,
    /// Time spent inside the sink, per event.
    pub latencies: Vec<Duration>,
    /// Clock reading when the last event was delivered.
    pub elapsed: Duration,
}

#[derive(Debug, Error)]
pub enum ReplayError<E> {
    #[error("speedup must be positive, got {0}")]
    InvalidSpeedup(f64),
    #[error("sink failed at event {position}: {source}")]
    Sink { position: usize, source: E },
}

/// Feeds `events` to `sink` in order, waiting `Δtimestamp / speedup` between
/// them on `clock`. An infinite speedup never waits.
pub fn replay<C, F, E>(
    events: &[UncorrelatedEvent],
    speedup: f64,
    clock: &mut C,
    mut sink: F,
) -> Result<ReplayReport, ReplayError<E>>
where
    C: Clock,
    F: FnMut(&UncorrelatedEvent) -> Result<(), E>,
{
    if speedup.is_nan() || speedup <= 0.0 {
        return Err(ReplayError::InvalidSpeedup(speedup));
    }
    let mut report = ReplayReport {
        latencies: Vec::with_capacity(events.len()),
        ..Default::default()
    };
    let Some(first) = events.first() else {
        return Ok(report);
    };
    let start = clock.now();
    for (position, event) in events.iter().enumerate() {
        if speedup.is_finite() {
            let offset = event.timestamp.since(first.timestamp).max(0) as f64 / speedup;
            let due = start + Duration::from_secs_f64(offset);
            let now = clock.now();
            if due > now {
                clock.sleep(due - now);
            }
        }
        let t0 = Instant::now();
        sink(event).map_err(|source| ReplayError::Sink { position, source })?;
        report.latencies.push(t0.elapsed());
        report.delivered += 1;
    }
    report.elapsed = clock.now() - start;
    Ok(report)
}
