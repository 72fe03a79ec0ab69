//! Full-precision CSV formatting and a small parser for round-trip checks.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Formats a scalar with enough digits to round-trip exactly through text.
pub fn fmt<T: Scalar>(x: T) -> String {
    format!("{:.*e}", T::csv_decimals(), x)
}

/// Appends one CSV row of scalars.
pub fn push_row<T: Scalar>(out: &mut String, values: &[T]) {
    for (j, v) in values.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        out.push_str(&fmt(*v));
    }
    out.push('\n');
}

/// Parses a numeric CSV document into its header and rows.
pub fn parse_table<T: Scalar>(text: &str) -> Result<(Vec<String>, Vec<Vec<T>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidParams(vec!["empty CSV document".into()]))?
        .split(',')
        .map(str::to_owned)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(header.len());
        for field in line.split(',') {
            let x: f64 = field.parse().map_err(|_| {
                Error::InvalidParams(vec![format!(
                    "line {}: field {field:?} is not a number",
                    lineno + 2
                )])
            })?;
            row.push(T::cst(x));
        }
        if row.len() != header.len() {
            return Err(Error::InvalidParams(vec![format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                header.len(),
                row.len()
            )]));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
