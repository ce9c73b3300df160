use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{fmt_f64, Params};

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

pub struct Table {
    pub name: String,
    header: Vec<&'static str>,
    rows: Vec<String>,
}

impl Table {
    pub fn new(name: &str, header: &[&'static str]) -> Self {
        Table { name: name.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(Cell::render).collect::<Vec<_>>().join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Leading comment line with the config hash, then the header and rows.
    pub fn render(&self, hash: &str) -> String {
        let mut s = format!("# gnlab {} config_hash={hash}\n", env!("CARGO_PKG_VERSION"));
        s.push_str(&self.header.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// Collects the artifacts of one command and writes them with a JSON sidecar.
pub struct Artifacts {
    pub dir: PathBuf,
    pub command: String,
    pub hash: String,
    tables: Vec<Table>,
    pub summary: Map<String, Value>,
    pub tolerances: Map<String, Value>,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, params: &Params) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            hash: params.hash(command),
            tables: Vec::new(),
            summary: Map::new(),
            tolerances: Map::new(),
        }
    }

    pub fn add(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn note(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }

    pub fn tolerance(&mut self, key: &str, v: f64) {
        self.tolerances.insert(key.to_string(), json!(v));
    }

    /// Writes `<table>.csv` for every table and `<stem>.json`; returns the written paths.
    pub fn write(&self, stem: &str, params: &Params) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        let mut paths = Vec::new();
        for t in &self.tables {
            let p = self.dir.join(format!("{}.csv", t.name));
            fs::write(&p, t.render(&self.hash))?;
            paths.push(p);
        }
        let files: Vec<Value> = self.tables.iter().map(|t| json!({ "file": format!("{}.csv", t.name), "rows": t.len() })).collect();
        let sidecar = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.hash,
            "parameters": params.used(),
            "tolerances": self.tolerances,
            "artifacts": files,
            "summary": self.summary,
        });
        let p = self.dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&sidecar).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(&p, text)?;
        paths.push(p);
        Ok(paths)
    }
}
