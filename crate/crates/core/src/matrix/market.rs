//! MatrixMarket ASCII reader/writer (coordinate and array formats).
//!
//! Values are written in shortest round-trip scientific notation, so a
//! write/read cycle reproduces every entry exactly.

use super::{GenMatrix, SymMatrix};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// A matrix read back from a MatrixMarket file.
#[derive(Debug, Clone)]
pub enum MmData {
    Sym(SymMatrix),
    Gen(GenMatrix),
}

impl MmData {
    pub fn into_sym(self) -> Result<SymMatrix> {
        match self {
            MmData::Sym(s) => Ok(s),
            MmData::Gen(g) => {
                if !g.is_square() || g.max_abs_diff(&g.transpose()) != 0.0 {
                    return Err(Error::Parse {
                        path: String::new(),
                        line: 0,
                        detail: "general matrix is not symmetric".into(),
                    });
                }
                Ok(SymMatrix::from_gen(&g))
            }
        }
    }

    pub fn into_gen(self) -> GenMatrix {
        match self {
            MmData::Sym(s) => s.to_gen(),
            MmData::Gen(g) => g,
        }
    }
}

fn fmt_value(v: f64) -> String {
    // normalize -0.0 so skipped zeros and written zeros agree
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:e}")
}

pub fn write_sym_coordinate<W: Write>(w: &mut W, a: &SymMatrix) -> std::io::Result<()> {
    let n = a.n();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            if a.get(i, j) != 0.0 {
                entries.push((i + 1, j + 1, a.get(i, j)));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", n, n, entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {}", i, j, fmt_value(v))?;
    }
    Ok(())
}

pub fn write_gen_coordinate<W: Write>(w: &mut W, a: &GenMatrix) -> std::io::Result<()> {
    let mut entries = Vec::new();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if a.get(i, j) != 0.0 {
                entries.push((i + 1, j + 1, a.get(i, j)));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {}", i, j, fmt_value(v))?;
    }
    Ok(())
}

pub fn write_sym_array<W: Write>(w: &mut W, a: &SymMatrix) -> std::io::Result<()> {
    let n = a.n();
    writeln!(w, "%%MatrixMarket matrix array real symmetric")?;
    writeln!(w, "{} {}", n, n)?;
    // lower triangle, column-major
    for j in 0..n {
        for i in j..n {
            writeln!(w, "{}", fmt_value(a.get(i, j)))?;
        }
    }
    Ok(())
}

pub fn write_gen_array<W: Write>(w: &mut W, a: &GenMatrix) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            writeln!(w, "{}", fmt_value(a.get(i, j)))?;
        }
    }
    Ok(())
}

struct LineReader<R: BufRead> {
    inner: R,
    path: String,
    line_no: usize,
}

impl<R: BufRead> LineReader<R> {
    /// Next non-comment, non-blank line.
    fn next_data_line(&mut self) -> Result<Option<String>> {
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = self
                .inner
                .read_line(&mut buf)
                .map_err(|e| Error::Io { path: self.path.clone(), source: e })?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let trimmed = buf.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            return Ok(Some(trimmed.to_string()));
        }
    }

    fn err(&self, detail: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone(), line: self.line_no, detail: detail.into() }
    }
}

/// Read a MatrixMarket file (coordinate or array, real, general or
/// symmetric).
pub fn read<R: BufRead>(reader: R, path: &str) -> Result<MmData> {
    let mut lr = LineReader { inner: reader, path: path.to_string(), line_no: 0 };

    // header line
    let mut header = String::new();
    let n = lr
        .inner
        .read_line(&mut header)
        .map_err(|e| Error::Io { path: path.to_string(), source: e })?;
    lr.line_no += 1;
    if n == 0 {
        return Err(lr.err("empty file"));
    }
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(lr.err("expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let (format, field, symmetry) = (tokens[2].as_str(), tokens[3].as_str(), tokens[4].as_str());
    if field != "real" && field != "integer" {
        return Err(lr.err(format!("unsupported field {field:?}")));
    }
    let symmetric = match symmetry {
        "general" => false,
        "symmetric" => true,
        other => return Err(lr.err(format!("unsupported symmetry {other:?}"))),
    };

    let size_line = lr.next_data_line()?.ok_or_else(|| lr.err("missing size line"))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| lr.err(format!("bad size token {t:?}"))))
        .collect::<Result<_>>()?;

    match format {
        "coordinate" => {
            if sizes.len() != 3 {
                return Err(lr.err("coordinate size line needs 'rows cols nnz'"));
            }
            let (rows, cols, nnz) = (sizes[0], sizes[1], sizes[2]);
            if symmetric && rows != cols {
                return Err(lr.err("symmetric matrix must be square"));
            }
            let mut m = GenMatrix::zeros(rows, cols);
            for _ in 0..nnz {
                let line = lr.next_data_line()?.ok_or_else(|| lr.err("unexpected end of entries"))?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(lr.err("entry line needs 'i j value'"));
                }
                let i: usize = toks[0].parse().map_err(|_| lr.err("bad row index"))?;
                let j: usize = toks[1].parse().map_err(|_| lr.err("bad column index"))?;
                let v: f64 = toks[2].parse().map_err(|_| lr.err("bad value"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(lr.err(format!("index ({i}, {j}) out of bounds")));
                }
                m.set(i - 1, j - 1, v);
                if symmetric && i != j {
                    m.set(j - 1, i - 1, v);
                }
            }
            if symmetric {
                Ok(MmData::Sym(SymMatrix::from_gen(&m)))
            } else {
                Ok(MmData::Gen(m))
            }
        }
        "array" => {
            if sizes.len() != 2 {
                return Err(lr.err("array size line needs 'rows cols'"));
            }
            let (rows, cols) = (sizes[0], sizes[1]);
            if symmetric && rows != cols {
                return Err(lr.err("symmetric matrix must be square"));
            }
            let mut m = GenMatrix::zeros(rows, cols);
            let mut coords: Vec<(usize, usize)> = Vec::new();
            for j in 0..cols {
                let start = if symmetric { j } else { 0 };
                for i in start..rows {
                    coords.push((i, j));
                }
            }
            let mut values = Vec::with_capacity(coords.len());
            while values.len() < coords.len() {
                let line = lr.next_data_line()?.ok_or_else(|| lr.err("unexpected end of values"))?;
                for tok in line.split_whitespace() {
                    let v: f64 = tok.parse().map_err(|_| lr.err(format!("bad value {tok:?}")))?;
                    values.push(v);
                }
            }
            if values.len() != coords.len() {
                return Err(lr.err("too many values"));
            }
            for ((i, j), v) in coords.into_iter().zip(values) {
                m.set(i, j, v);
                if symmetric && i != j {
                    m.set(j, i, v);
                }
            }
            if symmetric {
                Ok(MmData::Sym(SymMatrix::from_gen(&m)))
            } else {
                Ok(MmData::Gen(m))
            }
        }
        other => Err(lr.err(format!("unsupported format {other:?}"))),
    }
}

pub fn read_path(path: &Path) -> Result<MmData> {
    let file = File::open(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    read(BufReader::new(file), &path.display().to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    Ok(BufWriter::new(file))
}

pub fn write_sym_path(path: &Path, a: &SymMatrix) -> Result<()> {
    let mut w = create(path)?;
    write_sym_coordinate(&mut w, a)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

pub fn write_gen_path(path: &Path, a: &GenMatrix) -> Result<()> {
    let mut w = create(path)?;
    write_gen_coordinate(&mut w, a)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}
