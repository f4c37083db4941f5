//! Delimited place tables (GeoNames-style dumps with a header row).

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::cache::{CacheSet, SourceDescriptor};
use super::entity::{Entity, EntityKind, ScopeFilter};
use super::FactError;
use crate::terms::{Clause, Term};

/// Column mapping for a place table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub delimiter: u8,
    pub id_column: String,
    pub name_column: String,
    pub variants_column: Option<String>,
    pub latitude_column: Option<String>,
    pub longitude_column: Option<String>,
    /// Separates variant names inside one cell.
    pub sub_delimiter: char,
    /// Prepended to the id cell, e.g. `geo:`.
    pub id_prefix: String,
}

impl Default for TableSchema {
    fn default() -> Self {
        TableSchema {
            delimiter: b'\t',
            id_column: "id".into(),
            name_column: "name".into(),
            variants_column: Some("variants".into()),
            latitude_column: Some("latitude".into()),
            longitude_column: Some("longitude".into()),
            sub_delimiter: ',',
            id_prefix: "geo:".into(),
        }
    }
}

impl TableSchema {
    pub fn comma() -> Self {
        TableSchema {
            delimiter: b',',
            sub_delimiter: ';',
            ..TableSchema::default()
        }
    }

    /// Applies `column(role, "header")`, `delimiter("\t")`,
    /// `sub_delimiter(",")` and `id_prefix("geo:")` clauses.
    pub fn apply_clauses(&mut self, clauses: &[Clause]) -> Result<(), String> {
        for c in clauses {
            let text = |i: usize| c.args.get(i).and_then(Term::as_text);
            let single_char = |s: &str| {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(ch), None) => Ok(ch),
                    _ => Err(format!("line {}: expected a single character, got `{s}`", c.line)),
                }
            };
            match (c.functor.as_str(), text(0), text(1)) {
                ("column", Some(role), Some(header)) => {
                    let header = header.to_string();
                    match role {
                        "id" => self.id_column = header,
                        "name" => self.name_column = header,
                        "variants" => self.variants_column = Some(header),
                        "latitude" => self.latitude_column = Some(header),
                        "longitude" => self.longitude_column = Some(header),
                        other => return Err(format!("line {}: unknown column role `{other}`", c.line)),
                    }
                }
                ("delimiter", Some(d), None) => {
                    let ch = single_char(d)?;
                    self.delimiter = u8::try_from(ch).map_err(|_| format!("line {}: delimiter must be ASCII", c.line))?;
                }
                ("sub_delimiter", Some(d), None) => self.sub_delimiter = single_char(d)?,
                ("id_prefix", Some(p), None) => self.id_prefix = p.to_string(),
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TableReport {
    pub rows: usize,
    /// 1-based line numbers (header is line 1) of skipped rows.
    pub bad_rows: Vec<u64>,
    pub filtered: usize,
}

/// Reads one Place entity per row. Rows without id or name, with
/// unparseable coordinates, or with the wrong field count are skipped and
/// listed in the report.
pub fn ingest_table<R: Read>(
    reader: R,
    schema: &TableSchema,
    filter: &ScopeFilter,
    label: &str,
) -> Result<(CacheSet, TableReport), FactError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| FactError::Schema(format!("{label}: cannot read header: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| FactError::Schema(format!("{label}: missing column `{name}`")))
    };
    let id_col = col(&schema.id_column)?;
    let name_col = col(&schema.name_column)?;
    let opt_col = |c: &Option<String>| c.as_deref().map(col).transpose();
    let var_col = opt_col(&schema.variants_column)?;
    let lat_col = opt_col(&schema.latitude_column)?;
    let lon_col = opt_col(&schema.longitude_column)?;

    let mut report = TableReport::default();
    let mut entities = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        report.rows += 1;
        let line = rec.as_ref().ok().and_then(|r| r.position()).map_or(i as u64 + 2, |p| p.line());
        let Ok(rec) = rec else {
            report.bad_rows.push(line);
            continue;
        };
        let cell = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let (id, name) = (cell(id_col), cell(name_col));
        if id.is_empty() || name.is_empty() {
            report.bad_rows.push(line);
            continue;
        }
        let coord = |c: Option<usize>| -> Result<Option<f64>, ()> {
            match c.map(cell).filter(|s| !s.is_empty()) {
                None => Ok(None),
                Some(s) => s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some).ok_or(()),
            }
        };
        let (Ok(lat), Ok(lon)) = (coord(lat_col), coord(lon_col)) else {
            report.bad_rows.push(line);
            continue;
        };
        let mut e = Entity::place(format!("{}{id}", schema.id_prefix), name);
        e.latitude = lat;
        e.longitude = lon;
        if let Some(vc) = var_col {
            for v in cell(vc).split(schema.sub_delimiter).map(str::trim).filter(|v| !v.is_empty()) {
                e.variant_names.insert(v.to_string());
            }
        }
        if !filter.admits(&e) {
            report.filtered += 1;
            continue;
        }
        entities.push(e);
    }
    let source = SourceDescriptor {
        label: label.to_string(),
        format: "table".to_string(),
        entities: entities.len() as u64,
    };
    debug_assert!(entities.iter().all(|e| e.kind == EntityKind::Place));
    Ok((CacheSet::from_entities(entities, vec![source]), report))
}

pub fn ingest_table_file(
    path: &Path,
    schema: &TableSchema,
    filter: &ScopeFilter,
) -> Result<(CacheSet, TableReport), FactError> {
    let file = std::fs::File::open(path).map_err(|source| FactError::Io { path: path.to_path_buf(), source })?;
    ingest_table(std::io::BufReader::new(file), schema, filter, &path.display().to_string())
}
