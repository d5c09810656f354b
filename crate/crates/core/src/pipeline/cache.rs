use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::grid::{Cell, SweepGrid};
use super::record::{sha256_hex, GroundStateRecord};
use crate::binio::write_atomic;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";

/// Directory of `u<iu>_v<iv>.gsr` records plus a manifest.
#[derive(Clone, Debug)]
pub struct GroundStateCache {
    dir: PathBuf,
}

/// Result of one cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcome {
    pub cell: Cell,
    pub u: f64,
    pub v: f64,
    pub energy: f64,
    pub converged: bool,
    pub sweeps: usize,
    /// False when a valid record was already present.
    pub computed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub computed: usize,
    pub cached: usize,
    /// Cells whose DMRG run did not converge, kept with their flag.
    pub flagged: Vec<Cell>,
    pub cells: Vec<CellOutcome>,
}

impl GroundStateCache {
    /// Opens (and creates if needed) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record_path(&self, (iu, iv): Cell) -> PathBuf {
        self.dir.join(format!("u{iu}_v{iv}.gsr"))
    }

    pub fn load(&self, cell: Cell) -> Result<GroundStateRecord> {
        GroundStateRecord::from_bytes(&fs::read(self.record_path(cell))?)
    }

    /// The stored record if it decodes, passes its checksum and belongs to
    /// this grid cell.
    pub fn load_valid(&self, grid: &SweepGrid, cell: Cell) -> Option<GroundStateRecord> {
        self.load(cell).ok().filter(|r| r.matches(grid, cell))
    }

    pub fn store(&self, record: &GroundStateRecord) -> Result<()> {
        write_atomic(&self.record_path(record.cell), &record.to_bytes()?)
    }

    pub fn missing_cells(&self, grid: &SweepGrid) -> Vec<Cell> {
        grid.cells().into_iter().filter(|&c| self.load_valid(grid, c).is_none()).collect()
    }

    /// Every record of the grid in row-major order, or the list of cells
    /// that are missing or invalid.
    pub fn load_grid(&self, grid: &SweepGrid) -> Result<Vec<GroundStateRecord>> {
        let mut out = Vec::with_capacity(grid.len());
        let mut missing = Vec::new();
        for cell in grid.cells() {
            match self.load_valid(grid, cell) {
                Some(r) => out.push(r),
                None => missing.push(cell),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            let list: Vec<String> = missing.iter().map(|(u, v)| format!("u{u}_v{v}")).collect();
            Err(Error::RecordIncomplete(format!("{} cells missing from cache: {}", missing.len(), list.join(" "))))
        }
    }

    /// Computes every cell without a valid record (in parallel), then
    /// rewrites the manifest. `progress` sees each cell as it finishes.
    pub fn sweep(&self, grid: &SweepGrid, progress: Option<&(dyn Fn(&CellOutcome) + Sync)>) -> Result<SweepSummary> {
        grid.validate()?;
        let outcomes: Vec<Result<CellOutcome>> = grid
            .cells()
            .into_par_iter()
            .map(|cell| {
                let (record, computed) = match self.load_valid(grid, cell) {
                    Some(r) => (r, false),
                    None => {
                        let r = GroundStateRecord::compute(grid, cell)?;
                        self.store(&r)?;
                        (r, true)
                    }
                };
                let outcome = CellOutcome {
                    cell,
                    u: record.u,
                    v: record.v,
                    energy: record.energy,
                    converged: record.converged(),
                    sweeps: record.convergence.sweeps_used,
                    computed,
                };
                if let Some(f) = progress {
                    f(&outcome);
                }
                Ok(outcome)
            })
            .collect();
        let cells = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        self.write_manifest(grid)?;
        Ok(SweepSummary {
            computed: cells.iter().filter(|c| c.computed).count(),
            cached: cells.iter().filter(|c| !c.computed).count(),
            flagged: cells.iter().filter(|c| !c.converged).map(|c| c.cell).collect(),
            cells,
        })
    }

    /// One line per present record: `iu iv U V sha256 converged`.
    pub fn write_manifest(&self, grid: &SweepGrid) -> Result<()> {
        let mut text = String::from("# iu iv U V sha256 converged\n");
        for cell in grid.cells() {
            let path = self.record_path(cell);
            let Ok(bytes) = fs::read(&path) else { continue };
            let Ok(record) = GroundStateRecord::from_bytes(&bytes) else { continue };
            text.push_str(&format!(
                "{} {} {:?} {:?} {} {}\n",
                cell.0,
                cell.1,
                record.u,
                record.v,
                sha256_hex(&bytes),
                record.converged() as u8
            ));
        }
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())
    }

    /// Parsed manifest entries `(cell, sha256, converged)`.
    pub fn read_manifest(&self) -> Result<Vec<(Cell, String, bool)>> {
        let text = fs::read_to_string(self.dir.join(MANIFEST))?;
        let mut out = Vec::new();
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Format(format!("bad manifest line {line:?}"));
            if f.len() != 6 {
                return Err(bad());
            }
            let cell = (f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?);
            out.push((cell, f[4].to_string(), f[5] == "1"));
        }
        Ok(out)
    }
}
