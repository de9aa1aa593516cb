//! Site list upload format: a CSV file whose first column is `url`; every
//! further header column becomes a property.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::Site;
use crate::site_url::normalize_url;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSites {
    pub property_schema: Vec<String>,
    pub sites: Vec<Site>,
}

/// Parses an uploaded list. Empty cells become null properties; rows with
/// an empty `url` cell are skipped.
pub fn parse_site_csv(text: &str) -> Result<CsvSites> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.trim_start_matches('\u{feff}').as_bytes());
    let headers = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    match headers.get(0) {
        Some(h) if h.eq_ignore_ascii_case("url") => {}
        Some(h) if !h.is_empty() => {
            return Err(Error::Csv(format!("first column must be \"url\", found {h:?}")))
        }
        _ => return Err(Error::EmptyList),
    }
    let property_schema: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if property_schema.iter().any(String::is_empty) {
        return Err(Error::Csv("property columns need a header name".into()));
    }
    for (i, name) in property_schema.iter().enumerate() {
        if property_schema[..i].contains(name) {
            return Err(Error::Csv(format!("duplicate column {name:?}")));
        }
    }

    let mut sites = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let raw = record.get(0).unwrap_or("");
        if raw.is_empty() {
            continue;
        }
        if record.len() > headers.len() {
            return Err(Error::Csv(format!("row {} has more cells than the header", i + 2)));
        }
        let url = normalize_url(raw)?;
        let properties: BTreeMap<String, Option<String>> = property_schema
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let v = record.get(j + 1).filter(|v| !v.is_empty()).map(str::to_string);
                (name.clone(), v)
            })
            .collect();
        sites.push(Site {
            url,
            final_url: None,
            properties,
        });
    }
    if sites.is_empty() {
        return Err(Error::EmptyList);
    }
    Ok(CsvSites {
        property_schema,
        sites,
    })
}
