//! Predictor table files: the mixture block format with a key header per
//! entry.
//!
//! ```text
//! mol-table 1
//! min_count 8
//! entries 1
//! entry desk laptop keyboard
//! count 23
//! k 4
//! dim 12
//! ...
//! ```
//!
//! An absent functional anchor is written as `-`.

use std::fs;
use std::path::Path;

use super::{valid_label, PredictorError, PredictorTable, RelationKey};
use crate::geometry::BoxVector;
use crate::mol::io::{check_version, parse_mixture_block, write_mixture_block, LineReader, ParseError};

pub const TABLE_FORMAT_VERSION: u32 = 1;

pub fn write_table(table: &PredictorTable) -> String {
    let mut out = format!("mol-table {TABLE_FORMAT_VERSION}\n");
    out.push_str(&format!("min_count {}\n", table.min_count()));
    out.push_str(&format!("entries {}\n", table.len()));
    for (key, entry) in table.entries() {
        out.push_str(&format!(
            "entry {} {} {}\n",
            key.support,
            key.functional.as_deref().unwrap_or("-"),
            key.dependent
        ));
        out.push_str(&format!("count {}\n", entry.count));
        write_mixture_block(&mut out, &entry.mixture);
    }
    out
}

pub fn parse_table(text: &str) -> Result<PredictorTable, ParseError> {
    let mut reader = LineReader::new(text);
    check_version(&mut reader, "mol-table", TABLE_FORMAT_VERSION)?;
    let min_count = reader.expect_usize("min_count")?;
    let n = reader.expect_usize("entries")?;
    let mut table = PredictorTable::new(min_count);
    for _ in 0..n {
        let (line, toks) = reader.expect("entry")?;
        let [sup, fnc, dep] = toks[..] else {
            return Err(ParseError::new(
                line,
                "entry",
                format!("expected three category labels, found {}", toks.len()),
            ));
        };
        for label in [sup, dep] {
            if !valid_label(label) {
                return Err(ParseError::new(line, "entry", format!("invalid label `{label}`")));
            }
        }
        let key = RelationKey::new(sup, (fnc != "-").then_some(fnc), dep);
        if table.entries().contains_key(&key) {
            return Err(ParseError::new(line, "entry", format!("duplicate key {key}")));
        }
        let count = reader.expect_usize("count")?;
        if count < min_count {
            return Err(ParseError::new(
                line + 1,
                "count",
                format!("{count} tuples is below min_count {min_count}"),
            ));
        }
        let mixture = parse_mixture_block(&mut reader)?;
        if mixture.dim() != BoxVector::DIM {
            return Err(ParseError::new(
                line + 3,
                "dim",
                format!("expected {}, found {}", BoxVector::DIM, mixture.dim()),
            ));
        }
        table
            .insert(key, mixture, count)
            .map_err(|e| ParseError::new(line, "entry", e.to_string()))?;
    }
    if !reader.at_end() {
        return Err(ParseError::new(0, "eof", "trailing content after the last entry"));
    }
    Ok(table)
}

pub fn save_params(table: &PredictorTable, path: &Path) -> Result<(), PredictorError> {
    fs::write(path, write_table(table)).map_err(|source| PredictorError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_params(path: &Path) -> Result<PredictorTable, PredictorError> {
    let text = fs::read_to_string(path).map_err(|source| PredictorError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_table(&text)?)
}
