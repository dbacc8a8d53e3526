//! Plain-text field snapshots.
//!
//! ```text
//! # kind=radial            # or box
//! # n=4096                 # radial nodes, or box points per axis
//! # rmax=0.6279...         # radial only; box files carry `# L=...`
//! # p=4
//! # any_key=any value      # optional metadata, kept in order
//! r re im                  # radial: one node per line
//! re im                    # box: row-major, last index fastest
//! ```
//!
//! Floats are written with 17 significant digits, so a write/parse round
//! trip is exact.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{BoxField, RadialField};
use crate::grid::{BoxGrid, RadialGrid};

/// Largest sample count a snapshot may declare.
pub const MAX_SAMPLES: usize = 1 << 27;

#[derive(Clone, Debug, PartialEq)]
pub enum SnapshotField {
    Radial(RadialField),
    Box(BoxField),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub field: SnapshotField,
    pub p: f64,
    pub metadata: Vec<(String, String)>,
}

impl Snapshot {
    pub fn radial(field: RadialField, p: f64) -> Self {
        Self { field: SnapshotField::Radial(field), p, metadata: Vec::new() }
    }

    pub fn boxed(field: BoxField, p: f64) -> Self {
        Self { field: SnapshotField::Box(field), p, metadata: Vec::new() }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn as_radial(&self) -> Option<&RadialField> {
        match &self.field {
            SnapshotField::Radial(f) => Some(f),
            SnapshotField::Box(_) => None,
        }
    }

    pub fn as_box(&self) -> Option<&BoxField> {
        match &self.field {
            SnapshotField::Box(f) => Some(f),
            SnapshotField::Radial(_) => None,
        }
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(out);
        match &self.field {
            SnapshotField::Radial(f) => {
                writeln!(out, "# kind=radial")?;
                writeln!(out, "# n={}", f.grid().len())?;
                writeln!(out, "# rmax={:.16e}", f.grid().r_max())?;
            }
            SnapshotField::Box(f) => {
                writeln!(out, "# kind=box")?;
                writeln!(out, "# n={}", f.grid().n())?;
                writeln!(out, "# L={:.16e}", f.grid().length())?;
            }
        }
        writeln!(out, "# p={:.16e}", self.p)?;
        for (k, v) in &self.metadata {
            writeln!(out, "# {}={}", sanitize_key(k), v.replace(['\n', '\r'], " "))?;
        }
        let mut line = String::new();
        match &self.field {
            SnapshotField::Radial(f) => {
                for (r, v) in f.grid().nodes().iter().zip(f.values()) {
                    line.clear();
                    let _ = write!(line, "{r:.16e} {:.16e} {:.16e}", v.re, v.im);
                    writeln!(out, "{line}")?;
                }
            }
            SnapshotField::Box(f) => {
                for v in f.values() {
                    writeln!(out, "{:.16e} {:.16e}", v.re, v.im)?;
                }
            }
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(file)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut n = None;
        let mut extent = None;
        let mut p = None;
        let mut metadata = Vec::new();
        let mut samples: Vec<(usize, &str)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                if !samples.is_empty() {
                    return Err(parse_err(line_no, "header line after data"));
                }
                let Some((key, value)) = header.trim().split_once('=') else {
                    continue;
                };
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "kind" => set_once(&mut kind, line_no, key, value.to_string())?,
                    "n" => set_once(&mut n, line_no, key, parse_count(value, line_no)?)?,
                    "rmax" => set_once(&mut extent, line_no, key, ("rmax", parse_float(value, line_no)?))?,
                    "L" => set_once(&mut extent, line_no, key, ("L", parse_float(value, line_no)?))?,
                    "p" => set_once(&mut p, line_no, key, parse_float(value, line_no)?)?,
                    _ => metadata.push((key.to_string(), value.to_string())),
                }
                continue;
            }
            samples.push((line_no, line));
        }
        let kind = kind.ok_or_else(|| parse_err(0, "missing `# kind=` header"))?;
        let n = n.ok_or_else(|| parse_err(0, "missing `# n=` header"))?;
        let p = p.ok_or_else(|| parse_err(0, "missing `# p=` header"))?;
        let last_line = samples.last().map_or(0, |s| s.0);
        let field = match kind.as_str() {
            "radial" => {
                let r_max = match extent {
                    Some(("rmax", v)) => v,
                    _ => return Err(parse_err(0, "radial snapshot needs `# rmax=`")),
                };
                if samples.len() != n {
                    return Err(parse_err(last_line, &format!("expected {n} samples, found {}", samples.len())));
                }
                let grid = RadialGrid::new(n, r_max).map_err(|e| parse_err(0, &e.to_string()))?;
                let mut values = Vec::with_capacity(n);
                for (&(line_no, line), &r) in samples.iter().zip(grid.nodes()) {
                    let cols = parse_columns::<3>(line, line_no)?;
                    if (cols[0] - r).abs() > 1e-9 * r_max {
                        return Err(parse_err(line_no, &format!("node {} does not match grid value {r}", cols[0])));
                    }
                    values.push(Complex64::new(cols[1], cols[2]));
                }
                SnapshotField::Radial(RadialField::new(grid, values).map_err(|e| parse_err(0, &e.to_string()))?)
            }
            "box" => {
                let length = match extent {
                    Some(("L", v)) => v,
                    _ => return Err(parse_err(0, "box snapshot needs `# L=`")),
                };
                let grid = BoxGrid::new(n, length).map_err(|e| parse_err(0, &e.to_string()))?;
                let total = n
                    .checked_pow(3)
                    .filter(|&t| t <= MAX_SAMPLES)
                    .ok_or_else(|| parse_err(0, "box snapshot too large"))?;
                if samples.len() != total {
                    return Err(parse_err(last_line, &format!("expected {total} samples, found {}", samples.len())));
                }
                let mut values = Vec::with_capacity(total);
                for &(line_no, line) in &samples {
                    let cols = parse_columns::<2>(line, line_no)?;
                    values.push(Complex64::new(cols[0], cols[1]));
                }
                SnapshotField::Box(BoxField::new(grid, values).map_err(|e| parse_err(0, &e.to_string()))?)
            }
            other => return Err(parse_err(0, &format!("unknown kind `{other}`"))),
        };
        Ok(Self { field, p, metadata })
    }
}

fn sanitize_key(k: &str) -> String {
    k.chars().map(|c| if c == '=' || c.is_whitespace() { '_' } else { c }).collect()
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}

fn set_once<T>(slot: &mut Option<T>, line: usize, key: &str, value: T) -> Result<()> {
    if slot.is_some() {
        return Err(parse_err(line, &format!("duplicate `{key}` header")));
    }
    *slot = Some(value);
    Ok(())
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, &format!("bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, &format!("non-finite number `{s}`")));
    }
    Ok(v)
}

fn parse_count(s: &str, line: usize) -> Result<usize> {
    let v: usize = s.parse().map_err(|_| parse_err(line, &format!("bad count `{s}`")))?;
    if v > MAX_SAMPLES {
        return Err(parse_err(line, &format!("count {v} exceeds {MAX_SAMPLES}")));
    }
    Ok(v)
}

fn parse_columns<const K: usize>(line: &str, line_no: usize) -> Result<[f64; K]> {
    let mut out = [0.0; K];
    let mut it = line.split_whitespace();
    for slot in out.iter_mut() {
        let tok = it.next().ok_or_else(|| parse_err(line_no, &format!("expected {K} columns")))?;
        *slot = parse_float(tok, line_no)?;
    }
    if it.next().is_some() {
        return Err(parse_err(line_no, &format!("expected {K} columns")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(s: &Snapshot) -> Snapshot {
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        Snapshot::parse(std::str::from_utf8(&buf).unwrap()).unwrap()
    }

    #[test]
    fn radial_round_trip_is_exact() {
        let grid = RadialGrid::new(64, 5.0).unwrap().dilated(1.7);
        let f = RadialField::gaussian(grid).with_phase(0.3);
        let s = Snapshot::radial(f.clone(), 4.0).with_meta("lambda_c", -1.25).with_meta("note", "a b=c");
        let back = round_trip(&s);
        let g = back.as_radial().unwrap();
        assert_eq!(g.values(), f.values());
        assert!((g.grid().spacing() - f.grid().spacing()).abs() < 1e-15);
        assert_eq!(back.meta("lambda_c"), Some("-1.25"));
        assert_eq!(back.meta("note"), Some("a b=c"));
        assert_eq!(back.p, 4.0);
    }

    #[test]
    fn box_round_trip_is_exact() {
        let grid = BoxGrid::new(4, 3.0).unwrap();
        let f = BoxField::plane_wave(grid, [1, 0, -1], 0.7);
        let back = round_trip(&Snapshot::boxed(f.clone(), 3.5));
        assert_eq!(back.as_box().unwrap(), &f);
        assert!(back.as_radial().is_none());
    }

    #[test]
    fn rejects_malformed_input() {
        let good = "# kind=radial\n# n=8\n# rmax=8\n# p=4\n";
        let rows: String = (1..=8).map(|j| format!("{j} 0.5 0\n")).collect();
        assert!(Snapshot::parse(&format!("{good}{rows}")).is_ok());
        for bad in [
            String::new(),
            format!("# kind=radial\n# n=8\n# p=4\n{rows}"),
            format!("{good}{}", &rows[..rows.len() - 8]),
            format!("{good}{rows}1 2 3\n"),
            format!("{good}{}", rows.replace("3 0.5 0", "3.5 0.5 0")),
            format!("{good}{}", rows.replace("4 0.5 0", "4 nan 0")),
            format!("{good}{}", rows.replace("5 0.5 0", "5 0.5")),
            format!("# kind=sphere\n# n=8\n# rmax=8\n# p=4\n{rows}"),
            format!("# kind=box\n# n=3\n# L=1\n# p=4\n"),
            format!("# kind=box\n# n=1048576\n# L=1\n# p=4\n"),
            format!("{good}# n=8\n{rows}"),
        ] {
            assert!(matches!(Snapshot::parse(&bad), Err(Error::Parse { .. })), "accepted:\n{bad}");
        }
    }
}
