//! MatrixMarket matrices and plain-text vectors.
//!
//! Matrices are written in MatrixMarket coordinate format (`real general`,
//! 1-based indices, zeros omitted). The reader accepts coordinate and array
//! layouts with `real` or `integer` fields and `general` or `symmetric`
//! symmetry. Vectors are one value per line. Values are written with 17
//! significant digits, which round-trips every finite `f64` exactly.

use std::fs;
use std::path::Path;

use super::ProblemError;
use crate::linalg::Matrix;

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> ProblemError {
    ProblemError::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens with their 1-based starting column.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (pos, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(pos),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..pos]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_f64(tok: (usize, &str), line: usize) -> Result<f64, ProblemError> {
    let v: f64 = tok
        .1
        .parse()
        .map_err(|_| parse_err(line, tok.0, format!("cannot parse {:?} as a number", tok.1)))?;
    if !v.is_finite() {
        return Err(parse_err(
            line,
            tok.0,
            format!("non-finite value {:?}", tok.1),
        ));
    }
    Ok(v)
}

fn parse_usize(tok: (usize, &str), line: usize, what: &str) -> Result<usize, ProblemError> {
    tok.1
        .parse()
        .map_err(|_| parse_err(line, tok.0, format!("cannot parse {what} from {:?}", tok.1)))
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

/// Parses MatrixMarket text.
pub fn parse_matrix_market(text: &str) -> Result<Matrix, ProblemError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, 1, "empty file, expected a %%MatrixMarket header"))?;
    let head = tokens(header);
    let word = |k: usize| head.get(k).map(|(_, w)| w.to_ascii_lowercase());
    let col_of = |k: usize| head.get(k).map_or(header.len() + 1, |(c, _)| *c);
    if head.first().map(|(_, w)| *w) != Some("%%MatrixMarket") {
        return Err(parse_err(1, 1, "header must start with %%MatrixMarket"));
    }
    if word(1).as_deref() != Some("matrix") {
        return Err(parse_err(1, col_of(1), "expected object \"matrix\""));
    }
    let layout = match word(2).as_deref() {
        Some("coordinate") => Layout::Coordinate,
        Some("array") => Layout::Array,
        _ => {
            return Err(parse_err(
                1,
                col_of(2),
                "expected format \"coordinate\" or \"array\"",
            ))
        }
    };
    match word(3).as_deref() {
        Some("real") | Some("integer") | Some("double") => {}
        _ => {
            return Err(parse_err(
                1,
                col_of(3),
                "expected field \"real\" or \"integer\"",
            ))
        }
    }
    let symmetric = match word(4).as_deref() {
        Some("general") => false,
        Some("symmetric") => true,
        _ => {
            return Err(parse_err(
                1,
                col_of(4),
                "expected symmetry \"general\" or \"symmetric\"",
            ))
        }
    };

    let mut content = lines.filter(|(_, l)| {
        let t = l.trim_start();
        !t.is_empty() && !t.starts_with('%')
    });

    let (size_line, size_text) = content
        .next()
        .ok_or_else(|| ProblemError::DimensionMismatch("missing size line".into()))?;
    let size = tokens(size_text);
    let expected_tokens = if layout == Layout::Coordinate { 3 } else { 2 };
    if size.len() != expected_tokens {
        return Err(parse_err(
            size_line,
            1,
            format!(
                "size line needs {expected_tokens} integers, found {}",
                size.len()
            ),
        ));
    }
    let m = parse_usize(size[0], size_line, "row count")?;
    let n = parse_usize(size[1], size_line, "column count")?;
    if m == 0 || n == 0 {
        return Err(parse_err(size_line, 1, "dimensions must be positive"));
    }
    if symmetric && m != n {
        return Err(parse_err(size_line, 1, "symmetric matrix must be square"));
    }
    let mut data = vec![0.0; m * n];

    match layout {
        Layout::Coordinate => {
            let nnz = parse_usize(size[2], size_line, "entry count")?;
            let mut count = 0;
            for (line, text) in content {
                if count == nnz {
                    return Err(ProblemError::DimensionMismatch(format!(
                        "more than the {nnz} entries promised by the size line (line {line})"
                    )));
                }
                let t = tokens(text);
                if t.len() != 3 {
                    return Err(parse_err(
                        line,
                        1,
                        format!("expected \"i j value\", found {} fields", t.len()),
                    ));
                }
                let i = parse_usize(t[0], line, "row index")?;
                let j = parse_usize(t[1], line, "column index")?;
                if i == 0 || i > m {
                    return Err(parse_err(
                        line,
                        t[0].0,
                        format!("row index {i} outside 1..={m}"),
                    ));
                }
                if j == 0 || j > n {
                    return Err(parse_err(
                        line,
                        t[1].0,
                        format!("column index {j} outside 1..={n}"),
                    ));
                }
                let v = parse_f64(t[2], line)?;
                data[(i - 1) * n + (j - 1)] += v;
                if symmetric && i != j {
                    data[(j - 1) * n + (i - 1)] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(ProblemError::DimensionMismatch(format!(
                    "size line promises {nnz} entries, found {count}"
                )));
            }
        }
        Layout::Array => {
            // column-major; symmetric stores the lower triangle only
            let slots: Vec<(usize, usize)> = (0..n)
                .flat_map(|j| {
                    let start = if symmetric { j } else { 0 };
                    (start..m).map(move |i| (i, j))
                })
                .collect();
            let mut count = 0;
            for (line, text) in content {
                let t = tokens(text);
                if t.len() != 1 {
                    return Err(parse_err(
                        line,
                        1,
                        format!("expected one value, found {} fields", t.len()),
                    ));
                }
                let &(i, j) = slots.get(count).ok_or_else(|| {
                    ProblemError::DimensionMismatch(format!(
                        "more than the {} values implied by the size line (line {line})",
                        slots.len()
                    ))
                })?;
                let v = parse_f64(t[0], line)?;
                data[i * n + j] = v;
                if symmetric {
                    data[j * n + i] = v;
                }
                count += 1;
            }
            if count != slots.len() {
                return Err(ProblemError::DimensionMismatch(format!(
                    "size line implies {} values, found {count}",
                    slots.len()
                )));
            }
        }
    }
    Ok(Matrix::from_row_major(m, n, data)?)
}

/// MatrixMarket coordinate text for `matrix`.
pub fn write_matrix_market(matrix: &Matrix) -> String {
    let nnz = matrix.as_row_major().iter().filter(|v| **v != 0.0).count();
    let mut out = String::with_capacity(32 * (nnz + 2));
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", matrix.nrows(), matrix.ncols(), nnz));
    for (i, row) in matrix.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                out.push_str(&format!("{} {} {:.16e}\n", i + 1, j + 1, v));
            }
        }
    }
    out
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>, ProblemError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let t = tokens(raw);
        match t.first() {
            None => continue,
            Some((_, w)) if w.starts_with('%') || w.starts_with('#') => continue,
            Some(_) if t.len() > 1 => {
                return Err(parse_err(line, t[1].0, "expected one value per line"));
            }
            Some(&tok) => out.push(parse_f64(tok, line)?),
        }
    }
    Ok(out)
}

pub fn write_vector(v: &[f64]) -> String {
    let mut out = String::with_capacity(24 * v.len());
    for x in v {
        out.push_str(&format!("{x:.16e}\n"));
    }
    out
}

fn read(path: &Path) -> Result<String, ProblemError> {
    fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), ProblemError> {
    fs::write(path, text).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix, ProblemError> {
    parse_matrix_market(&read(path.as_ref())?)
}

pub fn save_matrix(path: impl AsRef<Path>, matrix: &Matrix) -> Result<(), ProblemError> {
    write(path.as_ref(), &write_matrix_market(matrix))
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>, ProblemError> {
    parse_vector(&read(path.as_ref())?)
}

pub fn save_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<(), ProblemError> {
    write(path.as_ref(), &write_vector(v))
}
