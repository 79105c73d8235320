//! Demographic metadata CSV: `case_id,sex,age_years,tsi_months,cohort`,
//! UTF-8, empty cell = missing.

use std::collections::HashSet;
use std::path::Path;

use lesionbench_core::evaluation::{CaseMeta, Sex};

use crate::error::IoError;

const REQUIRED_HEADER: [&str; 5] = ["case_id", "sex", "age_years", "tsi_months", "cohort"];

pub fn read_meta_table(path: &Path) -> Result<Vec<CaseMeta>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IoError::MetaFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;

    let headers = reader.headers().map_err(|e| IoError::MetaFormat {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let header_fields: Vec<&str> = headers.iter().collect();
    if header_fields != REQUIRED_HEADER {
        return Err(IoError::MetaFormat {
            path: path.to_path_buf(),
            reason: format!("header must be {:?}, found {:?}", REQUIRED_HEADER.join(","), header_fields.join(",")),
        });
    }

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::MetaFormat {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |reason: String| IoError::MetaRow {
            path: path.to_path_buf(),
            line,
            reason,
        };

        let case_id = record.get(0).unwrap_or("").to_string();
        if case_id.is_empty() {
            return Err(row_err("empty case_id".into()));
        }
        if !seen.insert(case_id.clone()) {
            return Err(IoError::DuplicateCase {
                path: path.to_path_buf(),
                case_id,
            });
        }
        let sex = match record.get(1).unwrap_or("") {
            "male" | "m" | "M" => Sex::Male,
            "female" | "f" | "F" => Sex::Female,
            "" | "unknown" => Sex::Unknown,
            other => return Err(row_err(format!("unrecognized sex value '{other}'"))),
        };
        let parse_opt = |field: &str, name: &str| -> Result<Option<f64>, IoError> {
            if field.is_empty() {
                return Ok(None);
            }
            let v: f64 = field
                .parse()
                .map_err(|_| row_err(format!("unparsable {name} value '{field}'")))?;
            if v < 0.0 {
                return Err(row_err(format!("negative {name} value {v}")));
            }
            Ok(Some(v))
        };
        let age_years = parse_opt(record.get(2).unwrap_or(""), "age_years")?;
        let tsi_months = parse_opt(record.get(3).unwrap_or(""), "tsi_months")?;
        let cohort = record.get(4).unwrap_or("").to_string();
        rows.push(CaseMeta {
            case_id,
            sex,
            age_years,
            tsi_months,
            cohort,
        });
    }
    Ok(rows)
}
