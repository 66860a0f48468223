//! Source payload parsers. Each page payload is a JSON document holding a
//! list of items and an optional continuation cursor:
//!
//! | source   | items          | cursor               |
//! |----------|----------------|----------------------|
//! | OpenAlex | `results`      | `meta.next_cursor`   |
//! | OpenAIRE | `results`      | `header.nextCursor`  |
//! | CORDIS   | `projects`     | `next_cursor`        |
//! | Kohesio  | `projects`     | `next_cursor`        |

use std::collections::BTreeSet;

use serde_json::Value;

use crate::model::{normalize_doi, Kind, Source, StiRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{origin} payload is not valid JSON ({message}); starts with {excerpt:?}")]
    InvalidJson { origin: Source, message: String, excerpt: String },
    #[error("{origin} page has no `{field}` array; starts with {excerpt:?}")]
    MissingItems { origin: Source, field: &'static str, excerpt: String },
    #[error("{origin} item is missing `{field}`: {excerpt}")]
    MissingField { origin: Source, field: &'static str, excerpt: String },
    #[error("{origin} item has an unreadable `{field}`: {excerpt}")]
    BadField { origin: Source, field: &'static str, excerpt: String },
}

const EXCERPT_LEN: usize = 160;

pub(crate) fn excerpt(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    let mut end = text.len().min(EXCERPT_LEN);
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    text[..end].to_string()
}

fn item_excerpt(item: &Value) -> String {
    excerpt(item.to_string().as_bytes())
}

/// Items and continuation cursor of one page.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPage {
    pub items: Vec<Value>,
    pub next_cursor: Option<String>,
}

pub fn decode_page(source: Source, payload: &[u8]) -> Result<DecodedPage, ParseError> {
    let doc: Value = serde_json::from_slice(payload).map_err(|e| ParseError::InvalidJson {
        origin: source,
        message: e.to_string(),
        excerpt: excerpt(payload),
    })?;
    let (items_field, cursor) = match source {
        Source::OpenAlex => ("results", doc.pointer("/meta/next_cursor")),
        Source::OpenAIRE => ("results", doc.pointer("/header/nextCursor")),
        Source::CORDIS | Source::Kohesio => ("projects", doc.get("next_cursor")),
    };
    let items = doc
        .get(items_field)
        .and_then(Value::as_array)
        .ok_or_else(|| ParseError::MissingItems {
            origin: source,
            field: items_field,
            excerpt: excerpt(payload),
        })?
        .clone();
    let next_cursor = cursor.and_then(|c| match c {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    });
    Ok(DecodedPage { items, next_cursor })
}

pub fn parse_item(source: Source, item: &Value) -> Result<StiRecord, ParseError> {
    match source {
        Source::OpenAlex => parse_openalex_work(item),
        Source::OpenAIRE => parse_openaire_result(item),
        Source::CORDIS => parse_cordis_project(item),
        Source::Kohesio => parse_kohesio_project(item),
    }
}

fn str_field<'a>(item: &'a Value, field: &str) -> Option<&'a str> {
    item.get(field).and_then(Value::as_str)
}

fn id_field(source: Source, item: &Value, field: &'static str) -> Result<String, ParseError> {
    let id = match item.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(Value::Number(n)) => n.to_string(),
        _ => {
            return Err(ParseError::MissingField {
                origin: source,
                field,
                excerpt: item_excerpt(item),
            })
        }
    };
    Ok(id)
}

fn year_from_date(source: Source, item: &Value, field: &'static str) -> Result<i32, ParseError> {
    let date = str_field(item, field).ok_or_else(|| ParseError::MissingField {
        origin: source,
        field,
        excerpt: item_excerpt(item),
    })?;
    date.get(..4)
        .filter(|y| y.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|y| y.parse().ok())
        .ok_or_else(|| ParseError::BadField {
            origin: source,
            field,
            excerpt: item_excerpt(item),
        })
}

/// ISO 3166 alpha-2, mapping the EU's `EL`/`UK` conventions to `GR`/`GB`.
fn country(code: &str) -> Option<String> {
    let code = code.trim().to_ascii_uppercase();
    if code.len() != 2 || !code.bytes().all(|b| b.is_ascii_alphabetic()) {
        return None;
    }
    Some(match code.as_str() {
        "EL" => "GR".to_string(),
        "UK" => "GB".to_string(),
        _ => code,
    })
}

/// Rebuilds plain text from an inverted index `{token: [positions]}`.
pub fn reconstruct_inverted_abstract(index: &serde_json::Map<String, Value>) -> String {
    let mut positioned: Vec<(u64, &str)> = index
        .iter()
        .flat_map(|(token, positions)| {
            positions
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(Value::as_u64)
                .map(move |p| (p, token.as_str()))
        })
        .collect();
    positioned.sort();
    positioned.iter().map(|(_, t)| *t).collect::<Vec<_>>().join(" ")
}

/// One element of an OpenAlex `/works` `results` array.
pub fn parse_openalex_work(item: &Value) -> Result<StiRecord, ParseError> {
    let source = Source::OpenAlex;
    let id = id_field(source, item, "id")?;
    let id = id.rsplit('/').next().unwrap_or(&id).to_string();
    let title = str_field(item, "title")
        .or_else(|| str_field(item, "display_name"))
        .unwrap_or_default()
        .to_string();
    let body = item
        .get("abstract_inverted_index")
        .and_then(Value::as_object)
        .map(reconstruct_inverted_abstract)
        .unwrap_or_default();
    let year = match item.get("publication_year").and_then(Value::as_i64) {
        Some(y) => y as i32,
        None => year_from_date(source, item, "publication_date")?,
    };
    let mut country_codes = BTreeSet::new();
    for authorship in item.get("authorships").and_then(Value::as_array).into_iter().flatten() {
        let institutions = authorship.get("institutions").and_then(Value::as_array).into_iter().flatten();
        let codes = institutions
            .filter_map(|inst| str_field(inst, "country_code"))
            .chain(authorship.get("countries").and_then(Value::as_array).into_iter().flatten().filter_map(Value::as_str));
        country_codes.extend(codes.filter_map(country));
    }
    Ok(StiRecord {
        record_id: format!("openalex:{id}"),
        source,
        kind: Kind::Publication,
        title,
        body,
        year,
        country_codes,
        doi: str_field(item, "doi").and_then(normalize_doi),
    })
}

/// One OpenAIRE research product.
pub fn parse_openaire_result(item: &Value) -> Result<StiRecord, ParseError> {
    let source = Source::OpenAIRE;
    let id = id_field(source, item, "id")?;
    let title = str_field(item, "mainTitle").unwrap_or_default().to_string();
    let body = match item.get("descriptions") {
        Some(Value::Array(parts)) => parts.iter().filter_map(Value::as_str).collect::<Vec<_>>().join("\n"),
        Some(Value::String(s)) => s.clone(),
        _ => String::new(),
    };
    let year = year_from_date(source, item, "publicationDate")?;
    let mut country_codes = BTreeSet::new();
    for c in item.get("countries").and_then(Value::as_array).into_iter().flatten() {
        if let Some(code) = str_field(c, "code").or_else(|| c.as_str()).and_then(country) {
            country_codes.insert(code);
        }
    }
    for org in item.get("organizations").and_then(Value::as_array).into_iter().flatten() {
        if let Some(code) = org.pointer("/country/code").and_then(Value::as_str).and_then(country) {
            country_codes.insert(code);
        }
    }
    let doi = item
        .get("pids")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter(|p| str_field(p, "scheme").is_some_and(|s| s.eq_ignore_ascii_case("doi")))
        .find_map(|p| str_field(p, "value").and_then(normalize_doi));
    Ok(StiRecord {
        record_id: format!("openaire:{id}"),
        source,
        kind: Kind::Publication,
        title,
        body,
        year,
        country_codes,
        doi,
    })
}

/// One CORDIS H2020 project joined with its participating organisations.
pub fn parse_cordis_project(item: &Value) -> Result<StiRecord, ParseError> {
    let source = Source::CORDIS;
    let id = id_field(source, item, "id")?;
    let year = year_from_date(source, item, "startDate")?;
    let country_codes = item
        .get("organizations")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
        .filter_map(|org| str_field(org, "country"))
        .filter_map(country)
        .collect();
    Ok(StiRecord {
        record_id: format!("cordis:{id}"),
        source,
        kind: Kind::Project,
        title: str_field(item, "title").unwrap_or_default().to_string(),
        body: str_field(item, "objective").unwrap_or_default().to_string(),
        year,
        country_codes,
        doi: str_field(item, "grantDoi").and_then(normalize_doi),
    })
}

/// One Kohesio project row.
pub fn parse_kohesio_project(item: &Value) -> Result<StiRecord, ParseError> {
    let source = Source::Kohesio;
    let id = id_field(source, item, "id")?;
    let year = year_from_date(source, item, "startTime")?;
    Ok(StiRecord {
        record_id: format!("kohesio:{id}"),
        source,
        kind: Kind::Project,
        title: str_field(item, "label").unwrap_or_default().to_string(),
        body: str_field(item, "summary").unwrap_or_default().to_string(),
        year,
        country_codes: str_field(item, "countryCode").and_then(country).into_iter().collect(),
        doi: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn openalex_inverted_abstract() {
        let work = json!({
            "id": "https://openalex.org/W42",
            "title": "Ice",
            "abstract_inverted_index": {"climate": [0], "action": [1]},
            "publication_year": 2017,
            "doi": "https://doi.org/10.5555/X1",
            "authorships": [
                {"institutions": [{"country_code": "DK"}, {"country_code": null}]},
                {"institutions": [], "countries": ["se"]}
            ]
        });
        let r = parse_openalex_work(&work).unwrap();
        assert_eq!(r.record_id, "openalex:W42");
        assert_eq!(r.body, "climate action");
        assert_eq!(r.doi.as_deref(), Some("10.5555/x1"));
        assert_eq!(r.country_codes, ["DK".to_string(), "SE".to_string()].into());
        assert_eq!(r.year, 2017);
        assert_eq!(r.kind, Kind::Publication);
    }

    #[test]
    fn inverted_abstract_orders_repeated_tokens() {
        let idx = json!({"the": [0, 3], "sea": [1], "and": [2], "ice": [4]});
        assert_eq!(reconstruct_inverted_abstract(idx.as_object().unwrap()), "the sea and the ice");
    }

    #[test]
    fn openalex_missing_optional_fields() {
        let r = parse_openalex_work(&json!({"id": "W1", "publication_year": 2015})).unwrap();
        assert_eq!((r.title.as_str(), r.body.as_str()), ("", ""));
        assert!(r.country_codes.is_empty() && r.doi.is_none());
        let err = parse_openalex_work(&json!({"title": "x", "publication_year": 2015})).unwrap_err();
        assert!(matches!(err, ParseError::MissingField { field: "id", .. }));
    }

    #[test]
    fn openaire_fields() {
        let item = json!({
            "id": "50|doi_dedup___::abc",
            "mainTitle": "Wind",
            "descriptions": ["Offshore wind."],
            "publicationDate": "2016-03-01",
            "countries": [{"code": "DK", "label": "Denmark"}],
            "pids": [{"scheme": "handle", "value": "1/2"}, {"scheme": "doi", "value": "10.1/AB"}]
        });
        let r = parse_openaire_result(&item).unwrap();
        assert_eq!(r.year, 2016);
        assert!(r.country_codes.contains("DK"));
        assert_eq!(r.doi.as_deref(), Some("10.1/ab"));
        assert_eq!(r.record_id, "openaire:50|doi_dedup___::abc");
        let bare = parse_openaire_result(&json!({"id": "x", "publicationDate": "2019"})).unwrap();
        assert!(bare.country_codes.is_empty());
        assert!(matches!(
            parse_openaire_result(&json!({"id": "x", "publicationDate": "n/a"})),
            Err(ParseError::BadField { field: "publicationDate", .. })
        ));
    }

    #[test]
    fn cordis_fields() {
        let item = json!({
            "id": 640987, "title": "Arctic", "objective": "Study permafrost.",
            "startDate": "2015-05-01",
            "organizations": [{"country": "DK"}, {"country": "EL"}, {"country": "UK"}]
        });
        let r = parse_cordis_project(&item).unwrap();
        assert_eq!(r.record_id, "cordis:640987");
        assert_eq!(r.kind, Kind::Project);
        assert_eq!(r.year, 2015);
        assert_eq!(r.country_codes, ["DK", "GB", "GR"].iter().map(|s| s.to_string()).collect());
        assert!(matches!(
            parse_cordis_project(&json!({"title": "x", "startDate": "2015-01-01"})),
            Err(ParseError::MissingField { field: "id", .. })
        ));
    }

    #[test]
    fn kohesio_fields() {
        let item = json!({"id": "Q2", "label": "Heat pumps", "summary": "District heating.", "startTime": "2018-01-01T00:00:00Z", "countryCode": "dk"});
        let r = parse_kohesio_project(&item).unwrap();
        assert_eq!((r.record_id.as_str(), r.year), ("kohesio:Q2", 2018));
        assert!(r.country_codes.contains("DK"));
        assert_eq!(r.body, "District heating.");
    }

    #[test]
    fn page_decoding() {
        let page = decode_page(Source::OpenAlex, br#"{"meta": {"next_cursor": "abc"}, "results": [{}, {}]}"#).unwrap();
        assert_eq!((page.items.len(), page.next_cursor.as_deref()), (2, Some("abc")));
        let page = decode_page(Source::OpenAIRE, br#"{"header": {"nextCursor": null}, "results": []}"#).unwrap();
        assert!(page.items.is_empty() && page.next_cursor.is_none());
        let page = decode_page(Source::CORDIS, br#"{"next_cursor": 2, "projects": []}"#).unwrap();
        assert_eq!(page.next_cursor.as_deref(), Some("2"));
        let err = decode_page(Source::Kohesio, b"<html>oops</html>").unwrap_err();
        assert!(matches!(&err, ParseError::InvalidJson { excerpt, .. } if excerpt.starts_with("<html>")));
        assert!(matches!(decode_page(Source::OpenAlex, b"{}"), Err(ParseError::MissingItems { .. })));
    }
}
