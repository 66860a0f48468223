//! Final outputs: the per-source summary table, the panel-by-source
//! histogram, the two SVG figures and their CSV exports.

mod svg;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classifier::{ErcPanel, PanelDistribution};
use crate::model::{share, Share, Source};
use crate::vocab::TagSummary;

pub use svg::{render_histogram, render_scatter, HistogramScale, PALETTE};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("record `{0}` has no known source")]
    UnknownRecord(String),
    #[error("palette has {available} colors but {needed} topics need one each")]
    PaletteTooShort { needed: usize, available: usize },
    #[error("point `{record_id}` has topic {topic} but only {k} topics are described")]
    TopicOutOfRange { record_id: String, topic: usize, k: usize },
    #[error("point `{0}` has a non-finite coordinate")]
    NonFinite(String),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("CSV header is {found:?}, expected {expected:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    #[error("summary row for {source_name}: {reason}")]
    InconsistentRow { source_name: Source, reason: String },
    #[error("unknown panel label `{0}`")]
    Panel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub source: Source,
    pub total_records: u64,
    pub sdg_records: u64,
    /// `None` exactly when `total_records` is zero.
    pub share_percent: Option<Share>,
}

impl SummaryRow {
    /// # Panics
    /// If `sdg_records > total_records`.
    pub fn new(source: Source, total_records: u64, sdg_records: u64) -> SummaryRow {
        assert!(sdg_records <= total_records, "{source}: {sdg_records} tagged of {total_records}");
        SummaryRow {
            source,
            total_records,
            sdg_records,
            share_percent: share(sdg_records, total_records).ok(),
        }
    }
}

/// Always four rows, in `Source::ALL` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

pub const SUMMARY_HEADER: [&str; 4] = ["source", "total_records", "sdg_records", "share_percent"];

/// Builds the summary table; sources absent from `summary` get a `(0, 0)`
/// row without a share.
///
/// # Panics
/// If any source has more tagged than total records.
pub fn summary_table(summary: &TagSummary) -> SummaryTable {
    let rows = Source::ALL
        .iter()
        .map(|&s| {
            let c = summary.get(&s).copied().unwrap_or_default();
            SummaryRow::new(s, c.total, c.tagged)
        })
        .collect();
    SummaryTable { rows }
}

impl SummaryTable {
    pub fn write_csv(&self, writer: impl Write) -> Result<(), ReportError> {
        export_csv(&SUMMARY_HEADER, &self.rows, writer)
    }

    /// Reads a table back and checks every share against its counts.
    pub fn read_csv(reader: impl Read) -> Result<SummaryTable, ReportError> {
        let rows: Vec<SummaryRow> = import_csv(&SUMMARY_HEADER, reader)?;
        for row in &rows {
            let bad = |reason: String| ReportError::InconsistentRow { source_name: row.source, reason };
            if row.sdg_records > row.total_records {
                return Err(bad("more SDG records than total records".into()));
            }
            let expected = share(row.sdg_records, row.total_records).ok();
            if row.share_percent != expected {
                return Err(bad(format!("share {:?} does not recompute to {:?}", row.share_percent, expected)));
            }
        }
        Ok(SummaryTable { rows })
    }

    /// Markdown table with columns padded to equal width.
    pub fn to_markdown(&self) -> String {
        let header = ["Source", "Total records", "SDG 13 records", "Share (%)"];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.source.to_string(),
                    r.total_records.to_string(),
                    r.sdg_records.to_string(),
                    r.share_percent.map_or_else(|| "-".to_string(), |s| s.to_string()),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |cells: [&str; 4], out: &mut String| {
            out.push('|');
            for (i, cell) in cells.iter().enumerate() {
                // The first column is text; the rest are numbers.
                if i == 0 {
                    out.push_str(&format!(" {cell:<w$} |", w = widths[i]));
                } else {
                    out.push_str(&format!(" {cell:>w$} |", w = widths[i]));
                }
            }
            out.push('\n');
        };
        line(header, &mut out);
        out.push('|');
        for (i, w) in widths.iter().enumerate() {
            let dashes = "-".repeat(*w);
            if i == 0 {
                out.push_str(&format!(" {dashes} |"));
            } else {
                out.push_str(&format!(" {}: |", &dashes[1..]));
            }
        }
        out.push('\n');
        for row in &body {
            line([&row[0], &row[1], &row[2], &row[3]], &mut out);
        }
        out
    }
}

/// Argmax panel counts per source plus the records left unassigned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PanelHistogram {
    pub counts: BTreeMap<(Source, ErcPanel), u64>,
    pub unclassified: BTreeMap<Source, u64>,
}

impl PanelHistogram {
    pub fn count(&self, source: Source, panel: ErcPanel) -> u64 {
        self.counts.get(&(source, panel)).copied().unwrap_or(0)
    }

    pub fn classified(&self, source: Source) -> u64 {
        self.counts.iter().filter(|((s, _), _)| *s == source).map(|(_, c)| c).sum()
    }

    /// Classified plus unclassified records of `source`.
    pub fn total(&self, source: Source) -> u64 {
        self.classified(source) + self.unclassified.get(&source).copied().unwrap_or(0)
    }

    /// Long format: one row per source and panel in code order, then one
    /// `unclassified` row per source. Zero counts are written.
    pub fn rows(&self) -> Vec<HistogramRow> {
        let mut rows = Vec::with_capacity(Source::ALL.len() * (ErcPanel::COUNT + 1));
        for source in Source::ALL {
            for panel in ErcPanel::all() {
                rows.push(HistogramRow {
                    source,
                    panel: panel.code(),
                    count: self.count(source, panel),
                });
            }
        }
        for source in Source::ALL {
            rows.push(HistogramRow {
                source,
                panel: UNCLASSIFIED.to_string(),
                count: self.unclassified.get(&source).copied().unwrap_or(0),
            });
        }
        rows
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), ReportError> {
        export_csv(&HISTOGRAM_HEADER, &self.rows(), writer)
    }

    pub fn read_csv(reader: impl Read) -> Result<PanelHistogram, ReportError> {
        let rows: Vec<HistogramRow> = import_csv(&HISTOGRAM_HEADER, reader)?;
        let mut hist = PanelHistogram::default();
        for row in rows {
            if row.count == 0 {
                continue;
            }
            if row.panel == UNCLASSIFIED {
                *hist.unclassified.entry(row.source).or_default() += row.count;
            } else {
                let panel: ErcPanel = row.panel.parse().map_err(|_| ReportError::Panel(row.panel.clone()))?;
                *hist.counts.entry((row.source, panel)).or_default() += row.count;
            }
        }
        Ok(hist)
    }
}

pub const UNCLASSIFIED: &str = "unclassified";
pub const HISTOGRAM_HEADER: [&str; 3] = ["source", "panel", "count"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub source: Source,
    pub panel: String,
    pub count: u64,
}

/// Tallies argmax assignments per `(source, panel)`; distributions with no
/// assignment count as unclassified. Zero counts are not stored.
pub fn panel_histogram(distributions: &[PanelDistribution], sources: &BTreeMap<String, Source>) -> Result<PanelHistogram, ReportError> {
    let mut hist = PanelHistogram::default();
    for dist in distributions {
        let source = *sources
            .get(&dist.record_id)
            .ok_or_else(|| ReportError::UnknownRecord(dist.record_id.clone()))?;
        match dist.assigned {
            Some(panel) => *hist.counts.entry((source, panel)).or_default() += 1,
            None => *hist.unclassified.entry(source).or_default() += 1,
        }
    }
    Ok(hist)
}

/// One embedded document with its dominant topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutPoint {
    pub record_id: String,
    #[serde(with = "crate::decimal::scalar")]
    pub x: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub y: f64,
    pub dominant_topic: usize,
}

pub const LAYOUT_HEADER: [&str; 4] = ["record_id", "x", "y", "dominant_topic"];

pub fn write_layout_csv(points: &[LayoutPoint], writer: impl Write) -> Result<(), ReportError> {
    export_csv(&LAYOUT_HEADER, points, writer)
}

pub fn read_layout_csv(reader: impl Read) -> Result<Vec<LayoutPoint>, ReportError> {
    import_csv(&LAYOUT_HEADER, reader)
}

/// Writes `header` then one record per row: UTF-8, LF line endings, fields
/// quoted only when needed. The header is written even with no rows.
pub fn export_csv<T: Serialize>(header: &[&str], rows: &[T], writer: impl Write) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`export_csv`], insisting on the exact header.
pub fn import_csv<T: DeserializeOwned>(header: &[&str], reader: impl Read) -> Result<Vec<T>, ReportError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(ReportError::Header {
            expected: header.iter().map(|h| h.to_string()).collect(),
            found,
        });
    }
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}
