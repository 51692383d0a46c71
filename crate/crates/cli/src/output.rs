//! CSV emission with shortest round-trip number formatting.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use pollregen::parameters::CriticalExponent;

/// Shortest decimal that parses back to `x`; independent of locale.
pub fn num(x: f64) -> String {
    ryu::Buffer::new().format(x).to_string()
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

/// `s*` as a CSV cell: the root, `inf` beyond the search cap, empty when none.
pub fn s_star_cell(c: &CriticalExponent) -> String {
    match *c {
        CriticalExponent::Root(s) => num(s),
        CriticalExponent::RootBeyondCap { .. } => "inf".to_string(),
        CriticalExponent::NoFiniteRoot => String::new(),
    }
}

pub struct Table {
    writer: csv::Writer<File>,
    path: PathBuf,
}

impl Table {
    /// Creates `dir/name`, writes `comments` as `# ` lines and then the header.
    pub fn create(dir: &Path, name: &str, comments: &[String], header: &[&str]) -> Result<Self, csv::Error> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut file = File::create(&path)?;
        for c in comments {
            writeln!(file, "# {c}")?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { writer, path })
    }

    pub fn row<I, S>(&mut self, cells: I) -> Result<(), csv::Error>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells)
    }

    pub fn finish(mut self) -> Result<PathBuf, csv::Error> {
        self.writer.flush()?;
        Ok(self.path)
    }
}
