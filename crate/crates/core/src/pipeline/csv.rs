//! Plain CSV with `#` metadata lines; floats use shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(config_hash: &str, header: &[&str]) -> Self {
        Table { meta: vec![("config_hash".into(), config_hash.into())], header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path, what: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact { path: path.to_path_buf(), what: what.into() },
            _ => Error::Io(e),
        })?;
        let mut meta = Vec::new();
        let mut lines = text.lines();
        let mut header = None;
        for line in lines.by_ref() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once('=').unwrap_or((m, ""));
                meta.push((k.to_string(), v.to_string()));
            } else {
                header = Some(line.split(',').map(String::from).collect::<Vec<_>>());
                break;
            }
        }
        let header = header.ok_or_else(|| Error::Format { path: path.to_path_buf(), reason: "no header row".into() })?;
        let rows: Vec<Vec<String>> = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(String::from).collect()).collect();
        if rows.iter().any(|r| r.len() != header.len()) {
            return Err(Error::Format { path: path.to_path_buf(), reason: "ragged rows".into() });
        }
        Ok(Table { meta, header, rows })
    }

    pub fn column(&self, name: &str, path: &Path) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format { path: path.to_path_buf(), reason: format!("missing column {name}") })
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn parse_num(s: &str, path: &Path) -> Result<f64> {
    s.parse().map_err(|_| Error::Format { path: path.to_path_buf(), reason: format!("not a number: {s}") })
}
