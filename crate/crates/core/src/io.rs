//! Path CSV format: header `t,x1,...,xn`, one row per grid node, numbers in
//! shortest round-trip form so that files reload bit-exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::DiscretePath;

pub fn path_header(dimension: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=dimension {
        let _ = write!(h, ",x{i}");
    }
    h
}

pub fn path_to_csv(path: &DiscretePath) -> String {
    let mut out = path_header(path.dimension());
    out.push('\n');
    for (k, row) in path.nodes().enumerate() {
        let _ = write!(out, "{}", path.time(k));
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses [`path_to_csv`] output. Errors carry 1-based line numbers.
pub fn path_from_csv(text: &str) -> Result<DiscretePath> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Csv { line: 1, message: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "t" {
        return Err(Error::Csv { line: 1, message: format!("expected header t,x1,...,xn, got {header:?}") });
    }
    let dimension = cols.len() - 1;
    if cols[1..].iter().enumerate().any(|(i, c)| *c != format!("x{}", i + 1)) {
        return Err(Error::Csv { line: 1, message: format!("expected header {}", path_header(dimension)) });
    }
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Csv {
                line: idx + 1,
                message: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Csv { line: idx + 1, message: format!("bad number {f:?}") })?;
            if j == 0 {
                grid.push(v);
            } else {
                values.push(v);
            }
        }
    }
    DiscretePath::new(grid, values, dimension)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = DiscretePath::from_fn(37, 2, |t, x| {
            x[0] = (t * 3.1).sin() / 7.0;
            x[1] = 0.1 + t * t;
        })
        .unwrap();
        let csv = path_to_csv(&p);
        assert!(csv.starts_with("t,x1,x2\n0,"));
        let q = path_from_csv(&csv).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn reports_line_numbers() {
        let err = path_from_csv("t,x1\n0,1\n0.5,oops\n1,2\n").unwrap_err();
        assert!(matches!(err, Error::Csv { line: 3, .. }), "{err}");
        let err = path_from_csv("t,x1\n0,1\n0.5\n").unwrap_err();
        assert!(matches!(err, Error::Csv { line: 3, .. }));
        assert!(matches!(path_from_csv("time,x\n"), Err(Error::Csv { line: 1, .. })));
        assert!(matches!(path_from_csv(""), Err(Error::Csv { line: 1, .. })));
    }
}
