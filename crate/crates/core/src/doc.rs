//! Structured text documents and CSV tables.
//!
//! Documents are TOML written by hand so that every float carries 17
//! significant digits; they are read back with the `toml` parser. CSV tables
//! have a single header row preceded by `#` provenance comments.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run identity embedded in every emitted file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// Formats a float with 17 significant digits as a valid TOML float.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Default)]
pub struct DocWriter {
    buf: String,
}

impl DocWriter {
    pub fn new(kind: &str, provenance: &Provenance) -> Self {
        let mut w = DocWriter::default();
        w.string("kind", kind);
        w.string("config_hash", &provenance.config_hash);
        w.int("seed", provenance.seed as i128);
        w
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        for line in text.lines() {
            let _ = writeln!(self.buf, "# {line}");
        }
        self
    }

    pub fn section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.buf, "\n[{name}]");
        self
    }

    pub fn array_section(&mut self, name: &str) -> &mut Self {
        let _ = writeln!(self.buf, "\n[[{name}]]");
        self
    }

    pub fn string(&mut self, key: &str, value: &str) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {}", quote(value));
        self
    }

    pub fn int(&mut self, key: &str, value: i128) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {value}");
        self
    }

    pub fn boolean(&mut self, key: &str, value: bool) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {value}");
        self
    }

    pub fn float(&mut self, key: &str, value: f64) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = {}", fmt_f64(value));
        self
    }

    pub fn floats(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let items: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(self.buf, "{key} = [{}]", items.join(", "));
        self
    }

    pub fn strings(&mut self, key: &str, values: &[String]) -> &mut Self {
        let items: Vec<String> = values.iter().map(|v| quote(v)).collect();
        let _ = writeln!(self.buf, "{key} = [{}]", items.join(", "));
        self
    }

    pub fn matrix(&mut self, key: &str, rows: &[Vec<f64>]) -> &mut Self {
        let _ = writeln!(self.buf, "{key} = [");
        for row in rows {
            let items: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(self.buf, "  [{}],", items.join(", "));
        }
        let _ = writeln!(self.buf, "]");
        self
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Parses a document into a serde type.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Checks the `kind` field of a document.
pub fn expect_kind(text: &str, kind: &str) -> Result<()> {
    #[derive(Deserialize)]
    struct Kind {
        kind: String,
    }
    let k: Kind = parse(text)?;
    if k.kind != kind {
        return Err(Error::Parse(format!("expected a `{kind}` document, found `{}`", k.kind)));
    }
    Ok(())
}

/// Comma-separated table with provenance comments and one header row.
pub fn csv(provenance: &Provenance, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash = {}", provenance.config_hash);
    let _ = writeln!(out, "# seed = {}", provenance.seed);
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let items: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "{}", items.join(","));
    }
    out
}

/// Reads a table written by [`csv`]: returns the header and numeric rows.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("table has no header".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!("row {} has {} fields, header has {}", k + 1, row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
