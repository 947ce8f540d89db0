//! Report rendering. JSON documents carry `schema_version`; CSV files
//! start with a fixed header whose first column is `schema_version`.

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// `{"schema_version": 1, ...body}`.
#[derive(Serialize)]
pub struct Versioned<'a, T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn json<T: Serialize>(body: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })?;
    s.push('\n');
    Ok(s)
}

/// CSV with `schema_version` prepended to the header and to every row.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(vec![]);
    let mut h = vec!["schema_version"];
    h.extend_from_slice(header);
    w.write_record(&h)?;
    let version = SCHEMA_VERSION.to_string();
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(std::iter::once(&version).chain(row.iter()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

/// Shortest round-trip decimal, in exponent form for very large or small
/// magnitudes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Indices joined by `;` inside one CSV field.
pub fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

/// Coordinates joined by `;` inside one CSV field.
pub fn nums(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_prepends_version() {
        let s = csv(&["x", "value"], vec![vec![num(0.5), num(-1e-300)]]).unwrap();
        assert_eq!(s, "schema_version,x,value\n1,0.5,-1e-300\n");
    }

    #[test]
    fn json_flattens_body() {
        #[derive(Serialize)]
        struct B {
            a: f64,
        }
        let s = json(&B { a: 2.0 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["a"], 2.0);
    }
}
