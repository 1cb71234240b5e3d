//! Rendering of command results; every document carries the configuration.

use serde_json::Value;

use crate::{CliError, Format};

/// A command result in the forms it supports.
pub struct Output {
    /// The JSON result, stored under `result` next to `config`.
    pub result: Value,
    /// Header and rows for CSV output.
    pub table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
    /// One JSON value per line, after a leading config line.
    pub lines: Option<Vec<Value>>,
    /// A plain-text document, preceded by a `#` config line.
    pub text: Option<String>,
}

impl Output {
    pub fn json(result: Value) -> Self {
        Output { result, table: None, lines: None, text: None }
    }

    pub fn with_table(mut self, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        self.table = Some((header, rows));
        self
    }

    pub fn render(&self, format: Format, config: &Value) -> Result<Vec<u8>, CliError> {
        let compact = serde_json::to_string(config).expect("config serializes");
        if let Some(text) = &self.text {
            return Ok(format!("# config: {compact}\n{text}").into_bytes());
        }
        if let Some(lines) = &self.lines {
            let mut s = serde_json::to_string(&serde_json::json!({ "config": config })).expect("serializes");
            s.push('\n');
            for l in lines {
                s.push_str(&serde_json::to_string(l).expect("serializes"));
                s.push('\n');
            }
            return Ok(s.into_bytes());
        }
        match format {
            Format::Json => {
                let doc = serde_json::json!({ "config": config, "result": self.result });
                let mut s = serde_json::to_string_pretty(&doc).expect("serializes");
                s.push('\n');
                Ok(s.into_bytes())
            }
            Format::Csv => {
                let (header, rows) = self.table.as_ref().ok_or_else(|| CliError::Usage("this command has no CSV form".into()))?;
                let mut buf = format!("# config: {compact}\n").into_bytes();
                {
                    let mut w = csv::Writer::from_writer(&mut buf);
                    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
                    for r in rows {
                        w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
                    }
                    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
                }
                Ok(buf)
            }
        }
    }
}
