//! Plain-text QUBO instances in the qbsolv convention:
//!
//! ```text
//! c comment
//! p qubo 0 <maxNodes> <nNodes> <nCouplers>
//! i i a_i        (nNodes lines)
//! i j b_ij       (nCouplers lines, i < j)
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::Qubo;
use crate::error::{Error, Result};

pub fn format_qubo(qubo: &Qubo) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "c qubo instance, {} variables", qubo.n);
    let _ = writeln!(out, "p qubo 0 {} {} {}", qubo.n, qubo.n, qubo.quadratic.len());
    for (i, a) in qubo.linear.iter().enumerate() {
        let _ = writeln!(out, "{i} {i} {a}");
    }
    for (&(i, j), b) in &qubo.quadratic {
        let _ = writeln!(out, "{i} {j} {b}");
    }
    out
}

pub fn write_qubo_file(qubo: &Qubo, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_qubo(qubo)).map_err(|e| Error::io(path, e))
}

pub fn parse_qubo_file(path: impl AsRef<Path>) -> Result<Qubo> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qubo_named(&text, &path.display().to_string())
}

pub fn parse_qubo(text: &str) -> Result<Qubo> {
    parse_qubo_named(text, "<qubo>")
}

fn parse_qubo_named(text: &str, name: &str) -> Result<Qubo> {
    let err = |line: usize, message: String| Error::Format {
        file: name.to_string(),
        line,
        message,
    };

    let mut header: Option<(usize, usize, usize)> = None;
    let mut qubo = Qubo::default();
    let mut nodes_seen = BTreeSet::new();
    let mut couplers_seen = BTreeSet::new();
    let mut last_line = 0;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "p" {
            if header.is_some() {
                return Err(err(line_no, "second header line".into()));
            }
            if fields.len() != 6 || fields[1] != "qubo" {
                return Err(err(line_no, "expected `p qubo <topology> <maxNodes> <nNodes> <nCouplers>`".into()));
            }
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| err(line_no, format!("bad header count `{s}`")))
            };
            let (max_nodes, n_nodes, n_couplers) = (num(fields[3])?, num(fields[4])?, num(fields[5])?);
            if n_nodes > max_nodes {
                return Err(err(line_no, "nNodes exceeds maxNodes".into()));
            }
            header = Some((max_nodes, n_nodes, n_couplers));
            qubo = Qubo::new(max_nodes);
            continue;
        }
        let Some((max_nodes, n_nodes, n_couplers)) = header else {
            return Err(err(line_no, "data before the `p qubo` header".into()));
        };
        if fields.len() != 3 {
            return Err(err(line_no, "expected `i j value`".into()));
        }
        let idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(line_no, format!("bad index `{s}`")))
        };
        let (i, j) = (idx(fields[0])?, idx(fields[1])?);
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| err(line_no, format!("bad value `{}`", fields[2])))?;
        if i >= max_nodes || j >= max_nodes {
            return Err(err(line_no, format!("index out of range (maxNodes = {max_nodes})")));
        }
        if nodes_seen.len() < n_nodes {
            if i != j {
                return Err(err(line_no, format!("expected a node line `i i a_i`, got coupler ({i}, {j})")));
            }
            if !nodes_seen.insert(i) {
                return Err(err(line_no, format!("duplicate node {i}")));
            }
            qubo.linear[i] = value;
        } else {
            if i == j {
                return Err(err(line_no, format!("diagonal entry ({i}, {i}) in coupler section")));
            }
            if i > j {
                return Err(err(line_no, format!("coupler ({i}, {j}) must have i < j")));
            }
            if couplers_seen.len() >= n_couplers {
                return Err(err(line_no, "more couplers than declared".into()));
            }
            if !couplers_seen.insert((i, j)) {
                return Err(err(line_no, format!("duplicate coupler ({i}, {j})")));
            }
            if value != 0.0 {
                qubo.quadratic.insert((i, j), value);
            }
        }
    }

    let Some((_, n_nodes, n_couplers)) = header else {
        return Err(err(last_line.max(1), "missing `p qubo` header".into()));
    };
    if nodes_seen.len() != n_nodes || couplers_seen.len() != n_couplers {
        return Err(err(
            last_line,
            format!(
                "expected {n_nodes} nodes and {n_couplers} couplers, found {} and {}",
                nodes_seen.len(),
                couplers_seen.len()
            ),
        ));
    }
    Ok(qubo)
}
