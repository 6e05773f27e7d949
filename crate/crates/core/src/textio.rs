//! Whitespace-delimited text tables with `#` comment lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().fold(String::with_capacity(16), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Row-major numeric matrix as text, one row per line.
pub fn format_matrix(out: &mut String, rows: usize, cols: usize, values: &[f64]) {
    debug_assert_eq!(values.len(), rows * cols);
    for r in 0..rows {
        let row = &values[r * cols..(r + 1) * cols];
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
}

/// Cursor over the non-comment, non-blank lines of a text file.
pub struct Lines<'a> {
    iter: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    origin: PathBuf,
    line: usize,
}

impl<'a> Lines<'a> {
    pub fn new(text: &'a str, origin: &Path) -> Self {
        let iter: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Self {
            iter: iter.peekable(),
            origin: origin.to_path_buf(),
            line: 0,
        }
    }

    pub fn error(&self, message: impl std::fmt::Display) -> Error {
        Error::parse(&self.origin, format!("line {}: {message}", self.line))
    }

    pub fn next_row(&mut self) -> Result<Vec<&'a str>> {
        match self.iter.next() {
            Some((n, l)) => {
                self.line = n;
                Ok(l.split_whitespace().collect())
            }
            None => Err(Error::parse(&self.origin, "unexpected end of file")),
        }
    }

    /// Next row, which must start with `keyword`.
    pub fn expect_keyword(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let row = self.next_row()?;
        if row.first() != Some(&keyword) {
            return Err(self.error(format!("expected `{keyword}`")));
        }
        Ok(row)
    }

    /// Parses a `keyword <count>` row and returns the count.
    pub fn count_of<T: FromStr>(&mut self, keyword: &str) -> Result<T> {
        let row = self.expect_keyword(keyword)?;
        self.field(&row, 1)
    }

    pub fn field<T: FromStr>(&self, row: &[&str], index: usize) -> Result<T> {
        let raw = row
            .get(index)
            .ok_or_else(|| self.error(format!("missing column {index}")))?;
        raw.parse()
            .map_err(|_| self.error(format!("cannot parse `{raw}`")))
    }

    pub fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let row = self.next_row()?;
        if row.len() != expected {
            return Err(self.error(format!("expected {expected} columns, got {}", row.len())));
        }
        (0..expected).map(|i| self.field(&row, i)).collect()
    }
}
