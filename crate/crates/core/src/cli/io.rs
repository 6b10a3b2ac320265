//! CSV file formats.
//!
//! * labels / predictions: header `y1,..,yM`, one row per sample, 1-based classes.
//! * probabilities: a metadata line `# M=<M>,K=<K>`, header `p_1_1,..,p_1_K,p_2_1,..`
//!   (output-major), one row per sample.
//! * features: header `x1,..,xD`, one row per sample.

use std::path::Path;

use ndarray::{Array2, Array3};

use crate::confusion::{ClassMatrix, ProbabilityField};
use crate::error::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Header plus data rows, each row tagged with its 1-based line number in
/// the file. `line_offset` counts lines stripped before `text`.
fn read_table(
    path: &Path,
    text: &str,
    line_offset: u64,
) -> Result<(Vec<String>, Vec<(u64, Vec<String>)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, line_offset + 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(parse_error(path, line_offset + 1, "missing header"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line()) + line_offset;
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line()) + line_offset;
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

/// 1-based class rows from a labels or predictions file.
pub fn read_class_rows(path: &Path) -> Result<Vec<Vec<usize>>> {
    let text = read_text(path)?;
    let (header, rows) = read_table(path, &text, 0)?;
    rows.into_iter()
        .map(|(line, fields)| {
            if fields.len() != header.len() {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {} columns, found {}", header.len(), fields.len()),
                ));
            }
            fields
                .iter()
                .map(|f| match f.parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v),
                    _ => Err(parse_error(
                        path,
                        line,
                        format!("'{f}' is not a class label (integers from 1)"),
                    )),
                })
                .collect()
        })
        .collect()
}

/// Reads a labels/predictions file as a [`ClassMatrix`] with at least
/// `min_classes` classes.
pub fn read_class_matrix(path: &Path, min_classes: usize) -> Result<ClassMatrix> {
    let rows = read_class_rows(path)?;
    let max = rows.iter().flatten().copied().max().unwrap_or(1);
    ClassMatrix::from_one_based(&rows, max.max(min_classes))
}

pub fn format_class_matrix(matrix: &ClassMatrix) -> String {
    let m = matrix.n_outputs();
    let mut out = (1..=m)
        .map(|j| format!("y{j}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in matrix.to_one_based() {
        out.push_str(
            &row.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

pub fn write_class_matrix(path: &Path, matrix: &ClassMatrix) -> Result<()> {
    write_text(path, &format_class_matrix(matrix))
}

fn parse_metadata(path: &Path, line: &str) -> Result<(usize, usize)> {
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| parse_error(path, 1, "expected metadata line '# M=..,K=..'"))?;
    let mut m = None;
    let mut k = None;
    for part in body.split(',') {
        let (key, value) = part
            .trim()
            .split_once('=')
            .ok_or_else(|| parse_error(path, 1, format!("bad metadata entry '{}'", part.trim())))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| parse_error(path, 1, format!("bad metadata value '{}'", value.trim())))?;
        match key.trim() {
            "M" => m = Some(value),
            "K" => k = Some(value),
            other => {
                return Err(parse_error(
                    path,
                    1,
                    format!("unknown metadata key '{other}'"),
                ))
            }
        }
    }
    match (m, k) {
        (Some(m), Some(k)) if m > 0 && k > 0 => Ok((m, k)),
        _ => Err(parse_error(path, 1, "metadata must give positive M and K")),
    }
}

pub fn read_probabilities(path: &Path) -> Result<ProbabilityField> {
    let text = read_text(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let (m, k) = parse_metadata(path, first)?;
    let (header, rows) = read_table(path, rest, 1)?;
    let expected: Vec<String> = (1..=m)
        .flat_map(|o| (1..=k).map(move |c| format!("p_{o}_{c}")))
        .collect();
    if header != expected {
        return Err(parse_error(
            path,
            2,
            format!("header must be {} for M={m}, K={k}", expected.join(",")),
        ));
    }
    let mut values = Array3::zeros((rows.len(), m, k));
    for (n, (line, fields)) in rows.iter().enumerate() {
        if fields.len() != m * k {
            return Err(parse_error(
                path,
                *line,
                format!("expected {} columns, found {}", m * k, fields.len()),
            ));
        }
        for (idx, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_error(path, *line, format!("'{f}' is not a number")))?;
            values[[n, idx / k, idx % k]] = v;
        }
    }
    ProbabilityField::new(values).map_err(|e| match e {
        Error::SimplexViolation {
            sample,
            output,
            sum,
        } => parse_error(
            path,
            rows.get(sample - 1).map_or(0, |r| r.0),
            format!("probabilities for output {output} sum to {sum}, not 1"),
        ),
        other => other,
    })
}

pub fn format_probabilities(probs: &ProbabilityField) -> String {
    let (_, m, k) = probs.values().dim();
    let mut out = format!("# M={m},K={k}\n");
    out.push_str(
        &(1..=m)
            .flat_map(|o| (1..=k).map(move |c| format!("p_{o}_{c}")))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for sample in probs.values().outer_iter() {
        out.push_str(
            &sample
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

pub fn write_probabilities(path: &Path, probs: &ProbabilityField) -> Result<()> {
    write_text(path, &format_probabilities(probs))
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let (header, rows) = read_table(path, &text, 0)?;
    let d = header.len();
    let mut values = Array2::zeros((rows.len(), d));
    for (n, (line, fields)) in rows.iter().enumerate() {
        if fields.len() != d {
            return Err(parse_error(
                path,
                *line,
                format!("expected {d} columns, found {}", fields.len()),
            ));
        }
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_error(path, *line, format!("'{f}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(path, *line, format!("non-finite value '{f}'")));
            }
            values[[n, j]] = v;
        }
    }
    Ok(values)
}

pub fn format_features(features: &Array2<f64>) -> String {
    let mut out = (1..=features.ncols())
        .map(|j| format!("x{j}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in features.rows() {
        out.push_str(
            &row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

pub fn write_features(path: &Path, features: &Array2<f64>) -> Result<()> {
    write_text(path, &format_features(features))
}
