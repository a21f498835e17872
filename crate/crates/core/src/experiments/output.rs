use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, ExperimentError};

/// One CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width of table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner()
            .map_err(|e| ExperimentError::Io(e.into_error()))
    }
}

/// Shortest round-trip text of a float.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Empty cell for an absent value.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Write the tables as `<name>.csv`, the summary as `<stem>.txt` headed by
/// the config, and the config itself as `<stem>.toml`.
pub fn write_outputs(
    dir: &Path,
    stem: &str,
    config: &ExperimentConfig,
    tables: &[Table],
    summary: &str,
) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, t.to_csv()?)?;
        written.push(path);
    }
    let toml = config.to_toml();
    let path = dir.join(format!("{stem}.toml"));
    fs::write(&path, &toml)?;
    written.push(path);
    let mut text = String::new();
    for line in toml.lines() {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    text.push('\n');
    text.push_str(summary);
    let path = dir.join(format!("{stem}.txt"));
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

/// Left-aligned first column, right-aligned others.
pub fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Label of a cutoff: `baseline` for an infinite one.
pub fn cutoff_label(c: f64) -> String {
    if c.is_infinite() {
        "baseline".into()
    } else {
        format!("{c}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_header() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(
            String::from_utf8(t.to_csv().unwrap()).unwrap(),
            "a,b\n1,\"x,y\"\n"
        );
    }

    #[test]
    fn outputs_echo_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::default();
        let files =
            write_outputs(dir.path(), "s", &c, &[Table::new("t", &["a"])], "body\n").unwrap();
        assert_eq!(files.len(), 3);
        let text = fs::read_to_string(dir.path().join("s.txt")).unwrap();
        assert!(text.starts_with("# "));
        assert!(text.ends_with("\nbody\n"));
        let back = ExperimentConfig::load(&dir.path().join("s.toml"), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn alignment_and_labels() {
        let rows = vec![
            vec!["x".to_string(), "10".to_string()],
            vec!["long".to_string(), "1".to_string()],
        ];
        assert_eq!(aligned(&rows), "x     10\nlong   1\n");
        assert_eq!(cutoff_label(f64::INFINITY), "baseline");
        assert_eq!(cutoff_label(10.0), "10");
        assert_eq!(opt(None), "");
        assert_eq!(num(0.1), "0.1");
    }
}
