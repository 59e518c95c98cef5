//! Grid-CSV text format.
//!
//! ```text
//! # grid x0=<float> y0=<float> dx=<float> dy=<float> nx=<int> ny=<int> unit=<nT|bits|none>
//! v(0,0),v(1,0),...,v(nx-1,0)
//! ...
//! v(0,ny-1),...,v(nx-1,ny-1)
//! ```
//!
//! Row `k` holds `y = y0 + k * dy`. Lines end with LF. The writer always emits
//! the canonical key order; the reader accepts header keys in any order and
//! defaults `unit` to `nT` when absent.

use std::collections::HashMap;

use super::{GridError, GridField, Unit};
use crate::scalar::{format_sig, Scalar};

const HEADER_KEYS: [&str; 7] = ["x0", "y0", "dx", "dy", "nx", "ny", "unit"];

pub fn save_grid<T: Scalar>(field: &GridField<T>) -> String {
    let mut out = format!(
        "# grid x0={} y0={} dx={} dy={} nx={} ny={} unit={}\n",
        format_sig(field.origin_x()),
        format_sig(field.origin_y()),
        format_sig(field.dx()),
        format_sig(field.dy()),
        field.nx(),
        field.ny(),
        field.unit().tag()
    );
    for row in field.values().chunks(field.nx()) {
        let line: Vec<String> = row.iter().map(|&v| format_sig(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn parse_header(line: &str) -> Result<HashMap<&str, &str>, GridError> {
    let bad = |reason: String| GridError::MalformedHeader { line: 1, reason };
    let body = line
        .strip_prefix('#')
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix("grid"))
        .ok_or_else(|| bad("expected a line starting with `# grid`".into()))?;
    let mut kv = HashMap::new();
    for token in body.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| bad(format!("token {token:?} is not key=value")))?;
        if !HEADER_KEYS.contains(&k) {
            return Err(bad(format!("unknown key {k:?}")));
        }
        if kv.insert(k, v).is_some() {
            return Err(bad(format!("duplicate key {k:?}")));
        }
    }
    Ok(kv)
}

pub fn load_grid<T: Scalar>(text: &str) -> Result<GridField<T>, GridError> {
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or("");
    let kv = parse_header(header)?;
    let bad = |reason: String| GridError::MalformedHeader { line: 1, reason };
    let float = |k: &str| -> Result<T, GridError> {
        let v = kv.get(k).ok_or_else(|| bad(format!("missing key {k:?}")))?;
        v.parse::<T>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(format!("{k}={v} is not a finite number")))
    };
    let count = |k: &str| -> Result<usize, GridError> {
        let v = kv.get(k).ok_or_else(|| bad(format!("missing key {k:?}")))?;
        v.parse::<usize>().map_err(|_| bad(format!("{k}={v} is not a non-negative integer")))
    };
    let (x0, y0, dx, dy) = (float("x0")?, float("y0")?, float("dx")?, float("dy")?);
    let (nx, ny) = (count("nx")?, count("ny")?);
    let unit = match kv.get("unit") {
        Some(tag) => Unit::from_tag(tag).ok_or_else(|| bad(format!("unknown unit {tag:?}")))?,
        None => Unit::Nanotesla,
    };
    if nx < 2 || ny < 2 {
        return Err(bad(format!("nx and ny must be at least 2, got {nx}x{ny}")));
    }
    if dx <= T::zero() || dy <= T::zero() {
        return Err(bad("dx and dy must be positive".into()));
    }

    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0usize;
    let mut last_line = 1usize;
    for (k, raw) in lines.enumerate() {
        let line_no = k + 2;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            // Only the terminating newline may produce an empty line.
            continue;
        }
        last_line = line_no;
        rows += 1;
        if rows > ny {
            return Err(GridError::RowCount { line: line_no, expected: ny, found: rows });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != nx {
            return Err(GridError::RaggedRow { line: line_no, expected: nx, found: fields.len() });
        }
        for (c, f) in fields.iter().enumerate() {
            let v: T = f.trim().parse().map_err(|_| GridError::BadNumber {
                line: line_no,
                column: c + 1,
                text: f.to_string(),
            })?;
            if !v.is_finite() {
                return Err(GridError::NonFiniteEntry { line: line_no, column: c + 1 });
            }
            values.push(v);
        }
    }
    if rows != ny {
        return Err(GridError::RowCount { line: last_line, expected: ny, found: rows });
    }
    GridField::new(x0, y0, dx, dy, nx, ny, values, unit)
}
