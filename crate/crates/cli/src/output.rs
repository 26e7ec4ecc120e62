//! Deterministic output files.
//!
//! Every file starts with a header embedding the tool version and the full
//! resolved config (seed pinned, output path stripped), so a data file is
//! reproducible from its own header. CSV files carry the header as `#`
//! comment lines; JSON files carry it as `version` and `config` fields.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct OutputDir {
    dir: PathBuf,
    config_line: String,
    pub files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, embedded_config: &serde_json::Value) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            config_line: serde_json::to_string(embedded_config).expect("config serializes"),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Writes a CSV file with the standard comment header, a column line,
    /// and one line per row.
    pub fn write_csv<I>(&mut self, name: &str, columns: &str, rows: I) -> io::Result<PathBuf>
    where
        I: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut f = io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "# symq {VERSION}")?;
        writeln!(f, "# config {}", self.config_line)?;
        writeln!(f, "{columns}")?;
        for row in rows {
            writeln!(f, "{row}")?;
        }
        f.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }

    /// Writes a JSON document `{version, config, results}`.
    pub fn write_json(&mut self, name: &str, results: serde_json::Value) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let doc = serde_json::json!({
            "version": VERSION,
            "config": serde_json::from_str::<serde_json::Value>(&self.config_line)
                .expect("config line is json"),
            "results": results,
        });
        let mut f = io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "{}", serde_json::to_string_pretty(&doc)?)?;
        f.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }
}

/// JSON shape shared by every hypothesis-test emission.
pub fn test_result_json(r: &symq_core::stats::TestResult) -> serde_json::Value {
    serde_json::json!({
        "stat": r.statistic,
        "p": r.p_value,
        "reject01": r.rejected_at(0.01),
        "reject05": r.rejected_at(0.05),
        "degenerate": r.degenerate,
    })
}
