//! Canonical CSV measurement logs and score report files.
//!
//! A log is a block of `#` metadata lines followed by a long-format CSV table:
//!
//! ```text
//! # qers-log schema=1
//! # run_id=sim-close-5145525
//! # scenario=close
//! # config_hash=0123456789abcdef
//! # clock_resolution_us=1
//! timestamp_ms,protocol,scenario,metric,value
//! 0,MQTT,close,latency,18.52
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{QersResult, ReadinessBand};
use crate::error::{Error, Result};
use crate::metric::{
    validate_sample, MetricKind, MetricSample, MetricSeries, ProtocolId, ScenarioLabel, SeriesKey,
};
use crate::stats::Summary;

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_COLUMNS: [&str; 5] = ["timestamp_ms", "protocol", "scenario", "metric", "value"];
const MAGIC: &str = "# qers-log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema_version: u32,
    pub run_id: String,
    pub scenario: String,
    pub config_hash: String,
    pub clock_resolution_us: u32,
}

impl RunHeader {
    pub fn new(
        run_id: impl Into<String>,
        scenario: impl Into<String>,
        config_hash: impl Into<String>,
    ) -> Self {
        RunHeader {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.into(),
            scenario: scenario.into(),
            config_hash: config_hash.into(),
            clock_resolution_us: 1,
        }
    }
}

/// A rejected row and its 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowViolation {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    /// Sorted by scenario, protocol, metric.
    pub series: Vec<MetricSeries>,
    pub violations: Vec<RowViolation>,
}

/// Rows of `series` in canonical order: timestamp, then scenario, protocol, metric.
fn canonical_rows(series: &[MetricSeries]) -> Vec<(&ScenarioLabel, &MetricSample)> {
    let mut rows: Vec<_> = series
        .iter()
        .flat_map(|s| s.samples.iter().map(move |sample| (&s.scenario, sample)))
        .collect();
    rows.sort_by(|a, b| {
        a.1.timestamp_ms
            .total_cmp(&b.1.timestamp_ms)
            .then_with(|| a.0.cmp(b.0))
            .then_with(|| a.1.protocol.cmp(&b.1.protocol))
            .then_with(|| a.1.kind.cmp(&b.1.kind))
    });
    rows
}

pub fn log_to_string(header: &RunHeader, series: &[MetricSeries]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} schema={}", header.schema_version);
    let _ = writeln!(out, "# run_id={}", header.run_id);
    let _ = writeln!(out, "# scenario={}", header.scenario);
    let _ = writeln!(out, "# config_hash={}", header.config_hash);
    let _ = writeln!(out, "# clock_resolution_us={}", header.clock_resolution_us);
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for (scenario, s) in canonical_rows(series) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.timestamp_ms, s.protocol, scenario, s.kind, s.value
        );
    }
    out
}

pub fn write_log(path: &Path, header: &RunHeader, series: &[MetricSeries]) -> Result<()> {
    write_file(path, log_to_string(header, series).as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::WriteFailure {
        path: path.to_path_buf(),
        source,
    })
}

pub fn ingest_csv(path: &Path) -> Result<RunLog> {
    let text = fs::read_to_string(path).map_err(|source| Error::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    parse_log(&text)
}

fn parse_header(lines: &[&str]) -> Result<RunHeader> {
    let first = lines
        .first()
        .ok_or_else(|| Error::MalformedLog("missing `# qers-log` header".into()))?;
    let version = first
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("schema="))
        .ok_or_else(|| Error::MalformedLog(format!("first line is not a log header: `{first}`")))?;
    if version != SCHEMA_VERSION.to_string() {
        return Err(Error::UnknownSchemaVersion(version.to_string()));
    }

    let mut fields = BTreeMap::new();
    for line in &lines[1..] {
        let body = line.trim_start_matches('#').trim();
        if let Some((k, v)) = body.split_once('=') {
            fields.insert(k.trim(), v.trim().to_string());
        }
    }
    let field = |k: &str| fields.get(k).cloned().unwrap_or_default();
    let clock_resolution_us = match fields.get("clock_resolution_us") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::MalformedLog(format!("bad clock_resolution_us `{v}`")))?,
        None => 1,
    };
    Ok(RunHeader {
        schema_version: SCHEMA_VERSION,
        run_id: field("run_id"),
        scenario: field("scenario"),
        config_hash: field("config_hash"),
        clock_resolution_us,
    })
}

fn parse_row(
    record: &csv::StringRecord,
) -> std::result::Result<(ScenarioLabel, MetricSample), String> {
    if record.len() != CSV_COLUMNS.len() {
        return Err(format!(
            "expected {} fields, found {}",
            CSV_COLUMNS.len(),
            record.len()
        ));
    }
    let timestamp_ms: f64 = record[0]
        .parse()
        .map_err(|_| format!("bad timestamp `{}`", &record[0]))?;
    let protocol: ProtocolId = record[1].parse().map_err(|e: Error| e.to_string())?;
    let scenario = ScenarioLabel::new(&record[2]);
    if scenario.as_str().is_empty() {
        return Err("empty scenario".into());
    }
    let kind: MetricKind = record[3].parse().map_err(|e: Error| e.to_string())?;
    let value: f64 = record[4]
        .parse()
        .map_err(|_| format!("bad value `{}`", &record[4]))?;
    let sample = MetricSample {
        timestamp_ms,
        protocol,
        kind,
        value,
    };
    let violations = validate_sample(&sample);
    if !violations.is_empty() {
        let joined: Vec<_> = violations.iter().map(|v| v.to_string()).collect();
        return Err(joined.join("; "));
    }
    Ok((scenario, sample))
}

/// Parses a whole log. Bad rows are skipped and reported; they never abort the load.
pub fn parse_log(text: &str) -> Result<RunLog> {
    let meta: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    let header = parse_header(&meta)?;
    let body_offset = meta.len() as u64;
    let body: String = text
        .lines()
        .skip(meta.len())
        .map(|l| format!("{l}\n"))
        .collect();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(body.as_bytes());
    let columns = reader
        .headers()
        .map_err(|e| Error::MalformedLog(e.to_string()))?
        .clone();
    if columns.is_empty() && body.trim().is_empty() {
        return Err(Error::MalformedLog("missing column header row".into()));
    }
    if columns.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(Error::MalformedLog(format!(
            "expected columns `{}`",
            CSV_COLUMNS.join(",")
        )));
    }

    let mut grouped: BTreeMap<SeriesKey, MetricSeries> = BTreeMap::new();
    let mut violations = Vec::new();
    for record in reader.records() {
        let (line, parsed) = match record {
            Ok(r) => {
                let line = r.position().map_or(0, |p| p.line()) + body_offset;
                (line, parse_row(&r))
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line()) + body_offset;
                (line, Err(e.to_string()))
            }
        };
        match parsed {
            Ok((scenario, sample)) => {
                let key = SeriesKey {
                    scenario: scenario.clone(),
                    protocol: sample.protocol,
                    kind: sample.kind,
                };
                let series = grouped
                    .entry(key)
                    .or_insert_with(|| MetricSeries::new(sample.protocol, scenario, sample.kind));
                if series
                    .samples
                    .last()
                    .is_some_and(|last| last.timestamp_ms >= sample.timestamp_ms)
                {
                    violations.push(RowViolation {
                        line,
                        message: "timestamp does not increase within its series".into(),
                    });
                    continue;
                }
                series.samples.push(sample);
            }
            Err(message) => violations.push(RowViolation { line, message }),
        }
    }

    Ok(RunLog {
        header,
        series: grouped.into_values().collect(),
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub run_id: String,
    pub config_hash: String,
    pub results: Vec<QersResult>,
}

impl ScoreReport {
    pub fn new(
        run_id: impl Into<String>,
        config_hash: impl Into<String>,
        mut results: Vec<QersResult>,
    ) -> Self {
        results.sort_by(|a, b| (&a.scenario, a.protocol).cmp(&(&b.scenario, b.protocol)));
        ScoreReport {
            run_id: run_id.into(),
            config_hash: config_hash.into(),
            results,
        }
    }

    pub fn result(&self, scenario: &str, protocol: ProtocolId) -> Option<&QersResult> {
        self.results
            .iter()
            .find(|r| r.scenario.as_str() == scenario && r.protocol == protocol)
    }
}

pub fn scores_csv(report: &ScoreReport) -> String {
    let mut out =
        String::from("scenario,protocol,basic,tuned,fusion,basic_band,tuned_band,fusion_band\n");
    for r in &report.results {
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{},{},{}",
            r.scenario,
            r.protocol,
            r.basic,
            r.tuned,
            r.fusion,
            r.basic_band,
            r.tuned_band,
            r.fusion_band
        );
    }
    out
}

pub fn heatmap_csv(report: &ScoreReport) -> String {
    let mut out = String::from("scenario,protocol");
    for k in MetricKind::ALL {
        let _ = write!(out, ",{k}");
    }
    out.push('\n');
    for r in &report.results {
        let _ = write!(out, "{},{}", r.scenario, r.protocol);
        for k in MetricKind::ALL {
            let _ = write!(out, ",{}", r.normalized_means[&k]);
        }
        out.push('\n');
    }
    out
}

fn distribution_rows(r: &QersResult) -> [(&'static str, &Summary); 3] {
    [
        ("basic", &r.distributions.basic),
        ("tuned", &r.distributions.tuned),
        ("fusion", &r.distributions.fusion),
    ]
}

pub fn distributions_csv(report: &ScoreReport) -> String {
    let mut out = String::from("scenario,protocol,score,count,mean,min,q1,median,q3,max\n");
    for r in &report.results {
        for (name, s) in distribution_rows(r) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario, r.protocol, name, s.count, s.mean, s.min, s.q1, s.median, s.q3, s.max
            );
        }
    }
    out
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    scenario: &'a ScenarioLabel,
    protocol: ProtocolId,
    basic: f64,
    tuned: f64,
    fusion: f64,
    basic_band: ReadinessBand,
    tuned_band: ReadinessBand,
    fusion_band: ReadinessBand,
}

#[derive(Serialize)]
struct Document<'a, T> {
    run_id: &'a str,
    config_hash: &'a str,
    rows: Vec<T>,
}

fn document<T: Serialize>(report: &ScoreReport, rows: Vec<T>) -> String {
    let doc = Document {
        run_id: &report.run_id,
        config_hash: &report.config_hash,
        rows,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn scores_json(report: &ScoreReport) -> String {
    document(
        report,
        report
            .results
            .iter()
            .map(|r| ScoreRow {
                scenario: &r.scenario,
                protocol: r.protocol,
                basic: r.basic,
                tuned: r.tuned,
                fusion: r.fusion,
                basic_band: r.basic_band,
                tuned_band: r.tuned_band,
                fusion_band: r.fusion_band,
            })
            .collect(),
    )
}

#[derive(Serialize)]
struct HeatmapRow<'a> {
    scenario: &'a ScenarioLabel,
    protocol: ProtocolId,
    normalized_means: &'a BTreeMap<MetricKind, f64>,
}

pub fn heatmap_json(report: &ScoreReport) -> String {
    document(
        report,
        report
            .results
            .iter()
            .map(|r| HeatmapRow {
                scenario: &r.scenario,
                protocol: r.protocol,
                normalized_means: &r.normalized_means,
            })
            .collect(),
    )
}

#[derive(Serialize)]
struct DistributionRow<'a> {
    scenario: &'a ScenarioLabel,
    protocol: ProtocolId,
    score: &'static str,
    #[serde(flatten)]
    summary: &'a Summary,
}

pub fn distributions_json(report: &ScoreReport) -> String {
    document(
        report,
        report
            .results
            .iter()
            .flat_map(|r| {
                distribution_rows(r).map(|(score, summary)| DistributionRow {
                    scenario: &r.scenario,
                    protocol: r.protocol,
                    score,
                    summary,
                })
            })
            .collect(),
    )
}

/// Writes `scores.*`, `heatmap.*` and `distributions.*` for each format into `dir`.
pub fn emit_report(
    report: &ScoreReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::WriteFailure {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for format in formats {
        let files: [(&str, String); 3] = match format {
            ReportFormat::Csv => [
                ("scores.csv", scores_csv(report)),
                ("heatmap.csv", heatmap_csv(report)),
                ("distributions.csv", distributions_csv(report)),
            ],
            ReportFormat::Json => [
                ("scores.json", scores_json(report)),
                ("heatmap.json", heatmap_json(report)),
                ("distributions.json", distributions_json(report)),
            ],
        };
        for (name, body) in files {
            let path = dir.join(name);
            write_file(&path, body.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Fixed-width table of mean scores with two decimals.
pub fn render_table(report: &ScoreReport) -> String {
    let mut out = format!(
        "{:<10} {:<8} {:>8} {:>8} {:>8}  {}\n",
        "scenario", "protocol", "basic", "tuned", "fusion", "bands (basic/tuned/fusion)"
    );
    for r in &report.results {
        let _ = writeln!(
            out,
            "{:<10} {:<8} {:>8.2} {:>8.2} {:>8.2}  {}/{}/{}",
            r.scenario.as_str(),
            r.protocol.as_str(),
            r.basic,
            r.tuned,
            r.fusion,
            r.basic_band,
            r.tuned_band,
            r.fusion_band
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> RunHeader {
        RunHeader::new("test-run", "close", "00ff")
    }

    fn rows(n: usize) -> String {
        let mut s = log_to_string(&header(), &[]);
        for i in 0..n {
            let _ = writeln!(s, "{i},MQTT,close,latency,{}.5", i + 1);
        }
        s
    }

    #[test]
    fn empty_log_is_vacuous() {
        let log = parse_log(&rows(0)).unwrap();
        assert!(log.series.is_empty());
        assert!(log.violations.is_empty());
        assert_eq!(log.header, header());
    }

    #[test]
    fn one_malformed_row_among_hundred() {
        let text = rows(100);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // metadata (5) + column row (1), then rows; line 6 + 42 + 1 is row index 42
        let target = 6 + 42;
        lines[target] = "42,MQTT,close,latency,not-a-number".into();
        let text = lines.join("\n") + "\n";
        let log = parse_log(&text).unwrap();
        assert_eq!(log.series.len(), 1);
        assert_eq!(log.series[0].len(), 99);
        assert_eq!(log.violations.len(), 1);
        assert_eq!(log.violations[0].line, target as u64 + 1);
        assert!(log.violations[0].message.contains("bad value"));
    }

    #[test]
    fn invalid_sample_reported_not_loaded() {
        let mut text = rows(0);
        text.push_str("0,HTTP,close,packet_loss,1.5\n");
        text.push_str("1,HTTP,close,packet_loss,0.5\n");
        text.push_str("2,HTTP,close,latency\n");
        let log = parse_log(&text).unwrap();
        assert_eq!(log.series[0].len(), 1);
        assert_eq!(log.violations.len(), 2);
        assert!(log.violations[0].message.contains("ratio exceeds 1"));
        assert_eq!(log.violations[1].line, 9);
    }

    #[test]
    fn unknown_schema_version() {
        let text = "# qers-log schema=9\ntimestamp_ms,protocol,scenario,metric,value\n";
        assert!(matches!(parse_log(text), Err(Error::UnknownSchemaVersion(v)) if v == "9"));
        assert!(matches!(
            parse_log("timestamp_ms,protocol,scenario,metric,value\n"),
            Err(Error::MalformedLog(_))
        ));
    }

    #[test]
    fn wrong_columns_rejected() {
        let text = "# qers-log schema=1\nt,p,s,m,v\n";
        assert!(matches!(parse_log(text), Err(Error::MalformedLog(_))));
    }

    #[test]
    fn unreadable_file() {
        let err = ingest_csv(Path::new("/definitely/not/here.csv")).unwrap_err();
        assert!(matches!(err, Error::UnreadableFile { .. }));
    }
}
