//! Rendering of result documents as JSON, CSV or text.

use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            _ => Err(format!("unknown format {s}, expected json, csv or text")),
        }
    }
}

pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Outcome {
    pub result: Value,
    pub table: Option<Table>,
}

impl Outcome {
    pub fn new<T: serde::Serialize>(result: &T) -> Result<Self, CliError> {
        Ok(Outcome { result: to_value(result)?, table: None })
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }
}

pub fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn render(format: Format, command: &str, doc: &Value, table: Option<&Table>) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).map_err(|e| CliError::Validation(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let t = table.ok_or_else(|| CliError::Validation(format!("csv output is not available for {command}")))?;
            let mut s = t.headers.join(",");
            s.push('\n');
            for r in &t.rows {
                let cells: Vec<String> = r.iter().map(|c| csv_cell(c)).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            Ok(s)
        }
        Format::Text => {
            let mut lines = Vec::new();
            flatten("", &doc["result"], &mut lines);
            let mut s = format!("# {command} {}\n", doc["version"].as_str().unwrap_or(""));
            for (k, v) in lines {
                s.push_str(&format!("{k} = {v}\n"));
            }
            Ok(s)
        }
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

fn is_leaf_array(v: &[Value]) -> bool {
    v.iter().all(|x| !x.is_array() && !x.is_object())
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(a) if !is_leaf_array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{}]", i + 1), x, out);
            }
        }
        _ => out.push((if prefix.is_empty() { "value".into() } else { prefix.to_string() }, v.to_string())),
    }
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}
