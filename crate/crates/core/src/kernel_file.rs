//! Kernel file format.
//!
//! ```json
//! { "inputs": 2, "outputs": 2, "rows": [[0.75, 0.25], [0.25, 0.75]] }
//! ```
//!
//! Loading validates every kernel invariant and reports failures with the
//! line of the offending value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::StochasticKernel;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub inputs: usize,
    pub outputs: usize,
    pub rows: Vec<Vec<f64>>,
}

impl From<&StochasticKernel<f64>> for KernelFile {
    fn from(k: &StochasticKernel<f64>) -> Self {
        KernelFile { inputs: k.n_inputs(), outputs: k.n_outputs(), rows: k.to_rows_f64() }
    }
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn key_line(text: &str, key: &str) -> usize {
    text.find(&format!("\"{key}\"")).map(|p| line_of(text, p)).unwrap_or(1)
}

/// Line on which the `index`-th inner array of `"rows"` starts.
fn row_line(text: &str, index: usize) -> usize {
    let Some(start) = text.find("\"rows\"") else { return 1 };
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut seen = 0usize;
    let mut in_string = false;
    for (i, &b) in bytes.iter().enumerate().skip(start + 6) {
        match b {
            b'"' => in_string = !in_string,
            _ if in_string => {}
            b'[' => {
                depth += 1;
                if depth == 2 {
                    if seen == index {
                        return line_of(text, i);
                    }
                    seen += 1;
                }
            }
            b']' => {
                if depth <= 1 {
                    break;
                }
                depth -= 1;
            }
            _ => {}
        }
    }
    key_line(text, "rows")
}

fn fail<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::KernelFile { line, message: message.into() })
}

pub fn parse_kernel(text: &str) -> Result<StochasticKernel<f64>> {
    let file: KernelFile = serde_json::from_str(text)
        .map_err(|e| Error::KernelFile { line: e.line().max(1), message: e.to_string() })?;
    if file.inputs == 0 {
        return fail(key_line(text, "inputs"), "\"inputs\" must be at least 1");
    }
    if file.outputs == 0 {
        return fail(key_line(text, "outputs"), "\"outputs\" must be at least 1");
    }
    if file.rows.len() != file.inputs {
        return fail(
            key_line(text, "rows"),
            format!("{} rows given but \"inputs\" is {}", file.rows.len(), file.inputs),
        );
    }
    for (d, row) in file.rows.iter().enumerate() {
        let line = row_line(text, d);
        if row.len() != file.outputs {
            return fail(line, format!("row {d} has {} entries but \"outputs\" is {}", row.len(), file.outputs));
        }
        if let Some((w, v)) = row.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return fail(line, format!("row {d} entry {w} = {v} is not a probability"));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return fail(line, format!("row {d} sums to {total}, expected 1 within 1e-12"));
        }
    }
    StochasticKernel::new(file.rows).map_err(|e| Error::KernelFile { line: 1, message: e.to_string() })
}

pub fn load_kernel(path: &std::path::Path) -> Result<StochasticKernel<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::KernelFile { line: 0, message: format!("{}: {e}", path.display()) })?;
    parse_kernel(&text)
}

pub fn kernel_to_json(kernel: &StochasticKernel<f64>) -> String {
    serde_json::to_string_pretty(&KernelFile::from(kernel)).expect("kernel serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_err(text: &str) -> usize {
        match parse_kernel(text) {
            Err(Error::KernelFile { line, .. }) => line,
            other => panic!("expected kernel file error, got {other:?}"),
        }
    }

    #[test]
    fn parses_valid_file() {
        let k = parse_kernel(r#"{ "inputs": 2, "outputs": 2, "rows": [[0.75, 0.25], [0.25, 0.75]] }"#).unwrap();
        assert_eq!(k.entry(1, 1), 0.75);
        let again = parse_kernel(&kernel_to_json(&k)).unwrap();
        assert_eq!(again, k);
    }

    #[test]
    fn reports_offending_row_line() {
        let text = "{\n  \"inputs\": 3,\n  \"outputs\": 2,\n  \"rows\": [\n    [0.5, 0.5],\n    [0.5, 0.4],\n    [1.0, 0.0]\n  ]\n}";
        assert_eq!(line_err(text), 6);
        let text = "{\n  \"inputs\": 2,\n  \"outputs\": 2,\n  \"rows\": [\n    [0.5, 0.5],\n    [0.5]\n  ]\n}";
        assert_eq!(line_err(text), 6);
        let text = "{\n  \"inputs\": 2,\n  \"outputs\": 2,\n  \"rows\": [\n    [1.5, -0.5],\n    [0.5, 0.5]\n  ]\n}";
        assert_eq!(line_err(text), 5);
    }

    #[test]
    fn reports_shape_and_syntax_errors() {
        let text = "{\n  \"inputs\": 3,\n  \"outputs\": 2,\n  \"rows\": [[1.0, 0.0]]\n}";
        assert_eq!(line_err(text), 4);
        let text = "{\n  \"inputs\": 1,\n  \"outputs\": 1,\n  \"rows\": [[1.0]],\n  oops\n}";
        assert_eq!(line_err(text), 5);
        let text = "{\n  \"inputs\": 1,\n  \"outputs\": 1,\n  \"rows\": [[1.0]],\n  \"extra\": 1\n}";
        assert_eq!(line_err(text), 5);
    }
}
