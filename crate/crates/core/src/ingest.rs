//! Tweet and follower-edge ingestion.
//!
//! Tweets arrive as line-delimited JSON objects or TSV rows; edges as
//! `follower,followee` CSV or an adjacency list. Relevance filtering keeps
//! tweets whose text contains the keyword after NFC normalisation and case
//! folding, and the activity table counts surviving tweets per user.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::par;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("format error: {malformed} of {total} non-blank lines are malformed")]
    Format { malformed: usize, total: usize },
    #[error("invalid filter: {0}")]
    Filter(String),
    #[error("line {line}: {msg}")]
    Activity { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TweetFormat {
    /// One JSON object per line: `user_id`, `text`, optional `lang`, optional `timestamp`.
    Json,
    /// Tab-separated `user_id, text[, lang[, timestamp]]`.
    Tsv,
}

impl FromStr for TweetFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" | "jsonl" | "ndjson" => Ok(TweetFormat::Json),
            "tsv" => Ok(TweetFormat::Tsv),
            other => Err(format!(
                "unknown tweet format `{other}` (expected json or tsv)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFormat {
    /// `follower_id,followee_id` per line.
    Csv,
    /// `user_id: followee1 followee2 ...` per line.
    Adjacency,
}

impl FromStr for EdgeFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EdgeFormat::Csv),
            "adjacency" | "adj" => Ok(EdgeFormat::Adjacency),
            other => Err(format!(
                "unknown edge format `{other}` (expected csv or adjacency)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetRecord {
    pub user_id: String,
    pub text: String,
    pub lang: Option<String>,
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeRecord {
    pub follower: String,
    pub followee: String,
}

impl EdgeRecord {
    pub fn is_self_edge(&self) -> bool {
        self.follower == self.followee
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

#[derive(Deserialize)]
struct JsonTweet {
    #[serde(deserialize_with = "id_string")]
    user_id: String,
    text: String,
    #[serde(default)]
    lang: Option<String>,
    #[serde(default)]
    timestamp: Option<i64>,
}

fn id_string<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(u64),
    }
    Ok(match Id::deserialize(d)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

/// Parses a single line; `None` means the line is malformed.
pub fn parse_tweet_line(line: &str, format: TweetFormat) -> Option<TweetRecord> {
    let rec = match format {
        TweetFormat::Json => {
            let t: JsonTweet = serde_json::from_str(line).ok()?;
            TweetRecord {
                user_id: t.user_id,
                text: t.text,
                lang: t.lang.filter(|l| !l.is_empty()),
                timestamp: t.timestamp,
            }
        }
        TweetFormat::Tsv => {
            let mut cols = line.split('\t');
            let user_id = cols.next()?.to_string();
            let text = cols.next()?.to_string();
            let lang = cols.next().filter(|l| !l.is_empty()).map(str::to_string);
            let timestamp = match cols.next().filter(|t| !t.is_empty()) {
                Some(t) => Some(t.parse().ok()?),
                None => None,
            };
            if cols.next().is_some() {
                return None;
            }
            TweetRecord {
                user_id,
                text,
                lang,
                timestamp,
            }
        }
    };
    if rec.user_id.trim().is_empty() || rec.text.is_empty() {
        return None;
    }
    Some(rec)
}

fn trim_eol(line: &str) -> &str {
    let line = line.strip_suffix('\n').unwrap_or(line);
    line.strip_suffix('\r').unwrap_or(line)
}

const LINE_BATCH: usize = 1 << 16;

/// Streams line batches through `handle`, returning `(non_blank_lines, malformed)`.
fn scan_lines<R, T, P, H>(
    mut source: R,
    parse: P,
    mut handle: H,
) -> Result<(usize, usize), IngestError>
where
    R: BufRead,
    T: Send,
    P: Fn(&str) -> Option<T> + Sync + Send,
    H: FnMut(Vec<T>),
{
    let mut total = 0usize;
    let mut malformed = 0usize;
    let mut batch: Vec<String> = Vec::with_capacity(LINE_BATCH);
    let mut buf = String::new();
    loop {
        buf.clear();
        let read = source.read_line(&mut buf)?;
        if read > 0 {
            let line = trim_eol(&buf);
            if !line.trim().is_empty() {
                batch.push(line.to_string());
            }
        }
        if batch.len() == LINE_BATCH || (read == 0 && !batch.is_empty()) {
            total += batch.len();
            let parsed = par::map_slice(&batch, |l| parse(l));
            let mut good = Vec::with_capacity(parsed.len());
            for p in parsed {
                match p {
                    Some(r) => good.push(r),
                    None => malformed += 1,
                }
            }
            handle(good);
            batch.clear();
        }
        if read == 0 {
            break;
        }
    }
    if total > 0 && malformed * 2 > total {
        return Err(IngestError::Format { malformed, total });
    }
    Ok((total, malformed))
}

/// Parses every tweet line. Malformed lines are skipped and counted; blank
/// lines are ignored. More than half malformed is a format error.
pub fn parse_tweets<R: BufRead>(
    source: R,
    format: TweetFormat,
) -> Result<Parsed<TweetRecord>, IngestError> {
    let mut records = Vec::new();
    let (_, skipped) = scan_lines(
        source,
        |l| parse_tweet_line(l, format),
        |b| records.extend(b),
    )?;
    Ok(Parsed { records, skipped })
}

/// Relevance filter: language plus case-insensitive keyword substring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterSpec {
    keyword: String,
    language: String,
    /// When set, tweets without a `lang` field are dropped.
    pub strict_lang: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            keyword: "sandy".into(),
            language: "en".into(),
            strict_lang: false,
        }
    }
}

fn fold_text(s: &str) -> String {
    s.nfc().collect::<String>().to_lowercase()
}

impl FilterSpec {
    pub fn new(keyword: &str, language: &str, strict_lang: bool) -> Result<Self, IngestError> {
        let keyword = fold_text(keyword);
        if keyword.is_empty() {
            return Err(IngestError::Filter("keyword must be non-empty".into()));
        }
        Ok(FilterSpec {
            keyword,
            language: language.to_ascii_lowercase(),
            strict_lang,
        })
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn accepts(&self, rec: &TweetRecord) -> bool {
        let lang_ok = match &rec.lang {
            Some(l) => l.eq_ignore_ascii_case(&self.language),
            None => !self.strict_lang,
        };
        lang_ok && fold_text(&rec.text).contains(&self.keyword)
    }
}

pub fn filter_relevant(
    records: impl IntoIterator<Item = TweetRecord>,
    spec: &FilterSpec,
) -> Vec<TweetRecord> {
    records.into_iter().filter(|r| spec.accepts(r)).collect()
}

/// Activity frequency (AF) per user: the number of relevant tweets.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ActivityTable {
    counts: HashMap<String, u64>,
}

impl ActivityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, user: &str, n: u64) {
        if n == 0 {
            return;
        }
        match self.counts.get_mut(user) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(user.to_string(), n);
            }
        }
    }

    pub fn get(&self, user: &str) -> u64 {
        self.counts.get(user).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Sum of AF over all users.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn merge(&mut self, other: &ActivityTable) {
        for (u, n) in other.iter() {
            self.record(u, n);
        }
    }

    /// Entries by descending AF, ties by ascending user id.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn values(&self) -> Vec<u64> {
        self.sorted().into_iter().map(|(_, v)| v).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "user_id,af")?;
        for (u, n) in self.sorted() {
            writeln!(out, "{u},{n}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(source: R) -> Result<Self, IngestError> {
        let mut table = ActivityTable::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || (i == 0 && line.starts_with("user_id")) {
                continue;
            }
            let (user, af) = line.rsplit_once(',').ok_or_else(|| IngestError::Activity {
                line: i + 1,
                msg: "expected `user_id,af`".into(),
            })?;
            let af: u64 = af.trim().parse().map_err(|_| IngestError::Activity {
                line: i + 1,
                msg: format!("bad af `{af}`"),
            })?;
            if user.is_empty() {
                return Err(IngestError::Activity {
                    line: i + 1,
                    msg: "empty user id".into(),
                });
            }
            table.record(user, af);
        }
        Ok(table)
    }
}

pub fn compute_activity<'a>(records: impl IntoIterator<Item = &'a TweetRecord>) -> ActivityTable {
    let mut table = ActivityTable::new();
    for r in records {
        table.record(&r.user_id, 1);
    }
    table
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct IngestStats {
    /// Non-blank lines seen.
    pub rows_read: usize,
    pub malformed: usize,
    /// Well-formed rows rejected by the relevance filter.
    pub filtered: usize,
    pub kept: usize,
}

/// Streaming parse, filter and count without holding the corpus in memory.
pub fn ingest_tweets<R: BufRead>(
    source: R,
    format: TweetFormat,
    spec: &FilterSpec,
) -> Result<(ActivityTable, IngestStats), IngestError> {
    let mut table = ActivityTable::new();
    let mut kept = 0usize;
    let parse =
        |l: &str| parse_tweet_line(l, format).map(|r| spec.accepts(&r).then_some(r.user_id));
    let (total, malformed) = scan_lines(source, parse, |batch| {
        for user in batch.into_iter().flatten() {
            kept += 1;
            table.record(&user, 1);
        }
    })?;
    let stats = IngestStats {
        rows_read: total,
        malformed,
        filtered: total - malformed - kept,
        kept,
    };
    Ok((table, stats))
}

fn parse_edge_line(line: &str, format: EdgeFormat) -> Option<Vec<EdgeRecord>> {
    match format {
        EdgeFormat::Csv => {
            let (a, b) = line.split_once(',')?;
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() || b.contains(',') {
                return None;
            }
            if a == "follower_id" && b == "followee_id" {
                return Some(Vec::new());
            }
            Some(vec![EdgeRecord {
                follower: a.into(),
                followee: b.into(),
            }])
        }
        EdgeFormat::Adjacency => {
            let (user, rest) = line.split_once(':')?;
            let user = user.trim();
            if user.is_empty() {
                return None;
            }
            Some(
                rest.split_whitespace()
                    .map(|f| EdgeRecord {
                        follower: user.into(),
                        followee: f.into(),
                    })
                    .collect(),
            )
        }
    }
}

/// Parses follow edges. Duplicates and self-edges pass through; the graph
/// builder drops them.
pub fn parse_edges<R: BufRead>(
    source: R,
    format: EdgeFormat,
) -> Result<Parsed<EdgeRecord>, IngestError> {
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for line in source.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match parse_edge_line(line, format) {
            Some(es) => records.extend(es),
            None => skipped += 1,
        }
    }
    Ok(Parsed { records, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(u: &str, text: &str, lang: Option<&str>) -> TweetRecord {
        TweetRecord {
            user_id: u.into(),
            text: text.into(),
            lang: lang.map(Into::into),
            timestamp: None,
        }
    }

    #[test]
    fn empty_file_parses_to_nothing() {
        let p = parse_tweets(&b""[..], TweetFormat::Json).unwrap();
        assert!(p.records.is_empty());
        assert_eq!(p.skipped, 0);
    }

    #[test]
    fn truncated_line_is_skipped() {
        let src = concat!(
            "{\"user_id\":\"u1\",\"text\":\"sandy a\"}\n",
            "{\"user_id\":\"u2\",\"text\":\"sandy b\",\"lang\":\"en\"}\n",
            "{\"user_id\":3,\"text\":\"c\",\"timestamp\":1351000000}\n",
            "{\"user_id\":\"u4\",\"te"
        );
        let p = parse_tweets(src.as_bytes(), TweetFormat::Json).unwrap();
        assert_eq!(p.records.len(), 3);
        assert_eq!(p.skipped, 1);
        assert_eq!(p.records[2].user_id, "3");
        assert_eq!(p.records[2].timestamp, Some(1_351_000_000));
    }

    #[test]
    fn crlf_matches_lf() {
        let lf = "u1\tSandy hits\ten\t10\nu2\tno storm\t\t\nu3\tsandy\n";
        let crlf = lf.replace('\n', "\r\n");
        let a = parse_tweets(lf.as_bytes(), TweetFormat::Tsv).unwrap();
        let b = parse_tweets(crlf.as_bytes(), TweetFormat::Tsv).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 3);
        assert_eq!(a.records[1].lang, None);
    }

    #[test]
    fn mostly_garbage_is_a_format_error() {
        let src = "u1\tsandy\nnot a row\nalso bad\n";
        assert!(matches!(
            parse_tweets(src.as_bytes(), TweetFormat::Tsv),
            Err(IngestError::Format { .. })
        ));
    }

    #[test]
    fn filter_examples() {
        let spec = FilterSpec::default();
        assert!(spec.accepts(&tweet("a", "SANDY is coming", Some("en"))));
        assert!(!spec.accepts(&tweet("a", "storm surge", Some("en"))));
        assert!(!spec.accepts(&tweet("a", "sandy beaches", Some("es"))));
        assert!(spec.accepts(&tweet("a", "#Sandy", None)));
        let strict = FilterSpec::new("sandy", "en", true).unwrap();
        assert!(!strict.accepts(&tweet("a", "#Sandy", None)));
        assert!(FilterSpec::new("", "en", false).is_err());
    }

    #[test]
    fn filter_normalises_composed_forms() {
        // e + combining acute composes to é under NFC.
        let spec = FilterSpec::new("caf\u{e9}", "en", false).unwrap();
        assert!(spec.accepts(&tweet("a", "CAFE\u{301} near sandy", Some("en"))));
    }

    #[test]
    fn filter_is_idempotent() {
        let spec = FilterSpec::default();
        let recs = vec![
            tweet("a", "sandy", Some("en")),
            tweet("b", "x", Some("en")),
            tweet("c", "Sandy", None),
        ];
        let once = filter_relevant(recs, &spec);
        let twice = filter_relevant(once.clone(), &spec);
        assert_eq!(once, twice);
    }

    #[test]
    fn activity_counts() {
        assert!(compute_activity(&[]).is_empty());
        let recs = vec![
            tweet("u1", "s", None),
            tweet("u2", "s", None),
            tweet("u1", "s", None),
            tweet("u1", "s", None),
        ];
        let t = compute_activity(&recs);
        assert_eq!(t.get("u1"), 3);
        assert_eq!(t.get("u2"), 1);
        assert_eq!(t.total(), 4);
    }

    #[test]
    fn activity_csv_order_and_roundtrip() {
        let mut t = ActivityTable::new();
        t.record("b", 2);
        t.record("a", 2);
        t.record("c", 5);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out.clone()).unwrap(),
            "user_id,af\nc,5\na,2\nb,2\n"
        );
        assert_eq!(ActivityTable::read_csv(&out[..]).unwrap(), t);
    }

    #[test]
    fn streaming_ingest_matches_batch_pipeline() {
        let src = "u1\tSandy\ten\nu2\tsandy\tes\nu1\tnope\ten\nu3\tSANDY!\t\n";
        let spec = FilterSpec::default();
        let (table, stats) = ingest_tweets(src.as_bytes(), TweetFormat::Tsv, &spec).unwrap();
        let batch = compute_activity(&filter_relevant(
            parse_tweets(src.as_bytes(), TweetFormat::Tsv)
                .unwrap()
                .records,
            &spec,
        ));
        assert_eq!(table, batch);
        assert_eq!(
            stats,
            IngestStats {
                rows_read: 4,
                malformed: 0,
                filtered: 2,
                kept: 2
            }
        );
    }

    #[test]
    fn edge_formats() {
        let p = parse_edges(
            "follower_id,followee_id\na,b\na,a\n".as_bytes(),
            EdgeFormat::Csv,
        )
        .unwrap();
        assert_eq!(
            p.records[0],
            EdgeRecord {
                follower: "a".into(),
                followee: "b".into()
            }
        );
        assert!(p.records[1].is_self_edge());
        let p = parse_edges("a: b c\nd:\n".as_bytes(), EdgeFormat::Adjacency).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(
            p.records[1],
            EdgeRecord {
                follower: "a".into(),
                followee: "c".into()
            }
        );
    }
}
