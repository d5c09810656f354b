//! CSV and PGM outputs. Floats are written in Rust's shortest round-trip
//! form, so parsing and re-emitting a file reproduces it byte for byte.

use std::path::Path;

use ndarray::Array2;

use super::discover::ProbeRow;
use super::grid::SweepGrid;
use super::record::GroundStateRecord;
use super::region::{LossMap, PhaseLabeling};
use crate::binio::write_atomic;
use crate::error::{Error, Result};

pub const UNASSIGNED: &str = "UNASSIGNED";

/// Locale-independent shortest representation that parses back exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Plain comma-separated table without quoting.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> =
            lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?.split(',').map(String::from).collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(String::from).collect();
            if row.len() != header.len() {
                return Err(Error::Format(format!("CSV row {} has {} fields, header {}", k + 1, row.len(), header.len())));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

fn label_fields(labeling: &PhaseLabeling, i: usize) -> (String, String) {
    match (labeling.labels[i], labeling.provenance[i]) {
        (Some(l), Some(it)) => (l.to_string(), it.to_string()),
        _ => (UNASSIGNED.to_string(), String::new()),
    }
}

/// `U,V,loss,assigned_label,iteration`, one row per cell in row-major order.
pub fn loss_map_table(grid: &SweepGrid, map: &LossMap, labeling: &PhaseLabeling) -> Table {
    let mut t = Table::new(&["U", "V", "loss", "assigned_label", "iteration"]);
    for cell in grid.cells() {
        let i = grid.index(cell);
        let (label, it) = label_fields(labeling, i);
        t.push(vec![fmt_f64(grid.u(cell.0)), fmt_f64(grid.v(cell.1)), fmt_f64(map.losses[i]), label, it]);
    }
    t
}

/// `iu,iv,U,V,label,iteration`.
pub fn labels_table(grid: &SweepGrid, labeling: &PhaseLabeling) -> Table {
    let mut t = Table::new(&["iu", "iv", "U", "V", "label", "iteration"]);
    for cell in grid.cells() {
        let (label, it) = label_fields(labeling, grid.index(cell));
        t.push(vec![
            cell.0.to_string(),
            cell.1.to_string(),
            fmt_f64(grid.u(cell.0)),
            fmt_f64(grid.v(cell.1)),
            label,
            it,
        ]);
    }
    t
}

/// Central-bond entanglement entropy of a record.
pub fn central_entropy(r: &GroundStateRecord) -> f64 {
    r.observables.entropy_profile.get(r.length / 2 - 1).copied().unwrap_or(0.0)
}

/// `U,V,O_SF,O_DW,O_HI,S_entropy,S_structure,xi`.
pub fn observables_table(records: &[GroundStateRecord]) -> Table {
    let mut t = Table::new(&["U", "V", "O_SF", "O_DW", "O_HI", "S_entropy", "S_structure", "xi"]);
    for r in records {
        let o = &r.observables;
        t.push(
            [r.u, r.v, o.o_sf, o.o_dw, o.o_hi, central_entropy(r), o.structure_factor, r.xi]
                .into_iter()
                .map(fmt_f64)
                .collect(),
        );
    }
    t
}

/// `i,j,x_i,x_j,F,F_next`: every pair of the cut; `F_next` is `F(i, i+1)`
/// (empty on the last point).
pub fn fidelity_table(xs: &[f64], f: &Array2<f64>) -> Table {
    let mut t = Table::new(&["i", "j", "x_i", "x_j", "F", "F_next"]);
    let m = xs.len();
    for i in 0..m {
        let next = if i + 1 < m { fmt_f64(f[[i, i + 1]]) } else { String::new() };
        for j in 0..m {
            t.push(vec![i.to_string(), j.to_string(), fmt_f64(xs[i]), fmt_f64(xs[j]), fmt_f64(f[[i, j]]), next.clone()]);
        }
    }
    t
}

/// `U,V,O_SF,O_DW,S,converged,candidate`.
pub fn probe_table(rows: &[ProbeRow]) -> Table {
    let mut t = Table::new(&["U", "V", "O_SF", "O_DW", "S", "converged", "candidate"]);
    for r in rows {
        t.push(vec![
            fmt_f64(r.u),
            fmt_f64(r.v),
            fmt_f64(r.o_sf),
            fmt_f64(r.o_dw),
            fmt_f64(r.s),
            (r.converged as u8).to_string(),
            (r.candidate as u8).to_string(),
        ]);
    }
    t
}

/// Plain PGM (P2): one row per U index, one column per V index, gray level
/// proportional to the loss with the largest loss at 255.
pub fn loss_map_pgm(map: &LossMap) -> String {
    let max = map.losses.iter().copied().filter(|x| x.is_finite()).fold(0.0f64, f64::max);
    let mut s = format!("P2\n{} {}\n255\n", map.n_v, map.n_u);
    for iu in 0..map.n_u {
        let row: Vec<String> = (0..map.n_v)
            .map(|iv| {
                let x = map.loss((iu, iv));
                let g = if max > 0.0 && x.is_finite() { (255.0 * x / max).round() as u32 } else { 0 };
                g.min(255).to_string()
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0, -2.5e-17, 1e300, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        let t = Table::parse("a,b\n1.0,x\n").unwrap();
        assert_eq!(t.render(), "a,b\n1.0,x\n");
        assert!(Table::parse("a,b\n1.0\n").is_err());
    }
}
