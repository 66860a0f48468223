//! Conversion of the CORDIS and Kohesio bulk exports into page payloads
//! that [`FixtureFetcher`](super::FixtureFetcher) can serve.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("export is not a JSON array of objects: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV export: {0}")]
    Csv(#[from] csv::Error),
    #[error("page size must be positive")]
    PageSize,
}

fn key(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn paginate(items: Vec<Value>, page_size: usize) -> Result<Vec<Vec<u8>>, ExportError> {
    if page_size == 0 {
        return Err(ExportError::PageSize);
    }
    let chunks: Vec<&[Value]> = if items.is_empty() {
        vec![&[]]
    } else {
        items.chunks(page_size).collect()
    };
    let last = chunks.len() - 1;
    Ok(chunks
        .iter()
        .enumerate()
        .map(|(i, chunk)| {
            let next = (i < last).then(|| format!("page-{:04}", i + 1));
            let mut bytes = serde_json::to_vec_pretty(&json!({"next_cursor": next, "projects": chunk})).expect("json value");
            bytes.push(b'\n');
            bytes
        })
        .collect())
}

/// Joins the CORDIS `project.json` and `organization.json` exports on
/// project id and splits the result into pages.
pub fn cordis_pages_from_export(projects: &[u8], organizations: &[u8], page_size: usize) -> Result<Vec<Vec<u8>>, ExportError> {
    let projects: Vec<serde_json::Map<String, Value>> = serde_json::from_slice(projects)?;
    let organizations: Vec<serde_json::Map<String, Value>> = serde_json::from_slice(organizations)?;
    let mut by_project: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for org in organizations {
        if let Some(pid) = key(org.get("projectID")) {
            by_project.entry(pid).or_default().push(json!({
                "name": org.get("name").cloned().unwrap_or(Value::Null),
                "country": org.get("country").cloned().unwrap_or(Value::Null),
                "role": org.get("role").cloned().unwrap_or(Value::Null),
            }));
        }
    }
    let joined = projects
        .into_iter()
        .map(|p| {
            let orgs = key(p.get("id")).and_then(|id| by_project.remove(&id)).unwrap_or_default();
            let field = |name: &str| p.get(name).cloned().unwrap_or(Value::Null);
            json!({
                "id": field("id"),
                "acronym": field("acronym"),
                "title": field("title"),
                "objective": field("objective"),
                "startDate": field("startDate"),
                "grantDoi": field("grantDoi"),
                "organizations": orgs,
            })
        })
        .collect();
    paginate(joined, page_size)
}

#[derive(Debug, Serialize, Deserialize)]
struct KohesioRow {
    id: String,
    label: String,
    #[serde(default)]
    summary: String,
    #[serde(rename = "startTime")]
    start_time: String,
    #[serde(rename = "countryCode")]
    country_code: String,
}

/// Splits a Kohesio CSV export with columns
/// `id,label,summary,startTime,countryCode` into pages.
pub fn kohesio_pages_from_csv(reader: impl std::io::Read, page_size: usize) -> Result<Vec<Vec<u8>>, ExportError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let rows = rdr
        .deserialize::<KohesioRow>()
        .map(|row| row.map(|r| serde_json::to_value(r).expect("row serializes")))
        .collect::<Result<Vec<_>, _>>()?;
    paginate(rows, page_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{decode_page, parse_item};
    use crate::model::Source;

    #[test]
    fn cordis_join_and_paginate() {
        let projects = br#"[
            {"id": "1", "title": "A", "objective": "o1", "startDate": "2015-01-01"},
            {"id": 2, "title": "B", "objective": "o2", "startDate": "2016-01-01"},
            {"id": "3", "title": "C", "objective": "o3", "startDate": "2017-01-01"}
        ]"#;
        let orgs = br#"[
            {"projectID": 1, "country": "DK", "name": "DTU"},
            {"projectID": "2", "country": "SE", "name": "KTH"},
            {"projectID": "2", "country": "DK", "name": "AU"}
        ]"#;
        let pages = cordis_pages_from_export(projects, orgs, 2).unwrap();
        assert_eq!(pages.len(), 2);
        let first = decode_page(Source::CORDIS, &pages[0]).unwrap();
        assert_eq!(first.next_cursor.as_deref(), Some("page-0001"));
        let rec = parse_item(Source::CORDIS, &first.items[1]).unwrap();
        assert_eq!(rec.record_id, "cordis:2");
        assert_eq!(rec.country_codes.len(), 2);
        let second = decode_page(Source::CORDIS, &pages[1]).unwrap();
        assert!(second.next_cursor.is_none());
        assert!(parse_item(Source::CORDIS, &second.items[0]).unwrap().country_codes.is_empty());
    }

    #[test]
    fn kohesio_csv() {
        let csv = "id,label,summary,startTime,countryCode\nQ1,\"Heat, pumps\",s,2016-02-01,DK\n";
        let pages = kohesio_pages_from_csv(csv.as_bytes(), 10).unwrap();
        let page = decode_page(Source::Kohesio, &pages[0]).unwrap();
        let rec = parse_item(Source::Kohesio, &page.items[0]).unwrap();
        assert_eq!((rec.title.as_str(), rec.year), ("Heat, pumps", 2016));
        let empty = kohesio_pages_from_csv("id,label,summary,startTime,countryCode\n".as_bytes(), 10).unwrap();
        assert_eq!(decode_page(Source::Kohesio, &empty[0]).unwrap().items.len(), 0);
        assert!(matches!(kohesio_pages_from_csv(csv.as_bytes(), 0), Err(ExportError::PageSize)));
    }
}
