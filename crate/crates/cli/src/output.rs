use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::CliResult;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where results go: files under `--out`, or stdout.
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    fn open(&self, name: &str, format: Format) -> CliResult<Box<dyn Write>> {
        Ok(match &self.dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{name}.{}", format.extension()));
                Box::new(BufWriter::new(File::create(path)?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    /// Writes one artifact in the selected format. CSV output starts with
    /// a `# params:` line; JSON output is an object whose `params` field
    /// holds the resolved parameters.
    pub fn emit<P, F>(&self, name: &str, params: &P, body: Value, csv: F) -> CliResult<()>
    where
        P: Serialize,
        F: FnOnce(&mut dyn Write) -> CliResult<()>,
    {
        self.emit_as(self.format, name, params, body, csv)
    }

    pub fn emit_as<P, F>(&self, format: Format, name: &str, params: &P, body: Value, csv: F) -> CliResult<()>
    where
        P: Serialize,
        F: FnOnce(&mut dyn Write) -> CliResult<()>,
    {
        let mut out = self.open(name, format)?;
        match format {
            Format::Csv => {
                writeln!(out, "# params: {}", serde_json::to_string(params)?)?;
                csv(&mut out)?;
            }
            Format::Json => {
                let mut doc = serde_json::Map::new();
                doc.insert("params".into(), serde_json::to_value(params)?);
                match body {
                    Value::Object(fields) => doc.extend(fields),
                    other => {
                        doc.insert("result".into(), other);
                    }
                }
                serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
