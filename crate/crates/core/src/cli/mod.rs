//! The `phasescout` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 sweep finished with
//! non-converged cells, 3 cache incomplete, 64 usage or configuration error.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::ae::checkpoint;
use crate::binio::write_atomic;
use crate::error::{Error, Result};
use crate::model::{fidelity_scan, ModelParams};
use crate::pipeline::export::{
    fmt_f64, labels_table, loss_map_pgm, loss_map_table, observables_table, probe_table, fidelity_table, Table,
    UNASSIGNED,
};
use crate::pipeline::{
    discover_phases, evaluate_loss_map, hole_study, origin_block, supersolid_probe, train_region, CellMask,
    Discovery, GroundStateCache, GroundStateRecord, InputKind, PhaseLabeling, SweepGrid,
};
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "phasescout", version, about = "Extended Bose-Hubbard ground states and autoencoder phase discovery")]
pub struct Cli {
    /// Run configuration (flat `key = value` file).
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for DMRG runs and loss evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for weight initialization and shuffling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "input-kind", global = true)]
    pub input_kind: Option<Kind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Kind {
    Es,
    Theta,
    Csf,
}

impl From<Kind> for InputKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Es => InputKind::Es,
            Kind::Theta => InputKind::Theta,
            Kind::Csf => InputKind::Csf,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "U", alias = "u")]
    U,
    #[value(name = "V", alias = "v")]
    V,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute every missing ground state of the grid.
    Sweep,
    /// Train one model on a region (default: the origin block).
    Train {
        /// Region as `u0:u1,v0:v1` in parameter units.
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Loss map of a trained model over the whole grid.
    Scan {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// The full train / scan / propose loop.
    Discover {
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Add the supersolid indicator table and hole study to the report.
        #[arg(long = "probe-ss")]
        probe_ss: bool,
    },
    /// Order parameters, entropies and correlation lengths of every cell.
    Observables,
    /// Ground-state overlaps along a line cut.
    Fidelity {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Value of the other coupling along the cut.
        #[arg(long)]
        fixed: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
    },
    /// Rewrite report.txt from the cache and labels.csv.
    Report,
}

/// Failure with an exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            Error::RecordIncomplete(_) => EXIT_INCOMPLETE,
            _ => EXIT_FAILURE,
        };
        Self { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Exit {
    Exit { code: EXIT_USAGE, message: message.into() }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("phasescout: {}", e.message);
            e.code
        }
    }
}

/// Loads the configuration and applies flags and `PHASESCOUT_CACHE`.
pub fn load_config(cli: &Cli) -> std::result::Result<RunConfig, Exit> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.input_kind {
        cfg.discover.kind = k.into();
    }
    if let Some(dir) = std::env::var_os("PHASESCOUT_CACHE") {
        cfg.cache_dir = PathBuf::from(dir);
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> std::result::Result<i32, Exit> {
    let cfg = load_config(cli)?;
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be positive"));
        }
        // fails only if a pool already exists, which keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Sweep => cmd_sweep(&cfg),
        Command::Train { region, checkpoint } => cmd_train(&cfg, region.as_deref(), checkpoint.as_deref()),
        Command::Scan { checkpoint } => cmd_scan(&cfg, checkpoint),
        Command::Discover { max_iter, probe_ss } => cmd_discover(&cfg, *max_iter, *probe_ss),
        Command::Observables => cmd_observables(&cfg),
        Command::Fidelity { axis, fixed, points } => cmd_fidelity(&cfg, *axis, *fixed, *points),
        Command::Report => cmd_report(&cfg),
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

fn complete_records(cfg: &RunConfig) -> std::result::Result<Vec<GroundStateRecord>, Exit> {
    let cache = GroundStateCache::open(&cfg.cache_dir)?;
    Ok(cache.load_grid(&cfg.grid)?)
}

pub fn cmd_sweep(cfg: &RunConfig) -> std::result::Result<i32, Exit> {
    let cache = GroundStateCache::open(&cfg.cache_dir)?;
    let report = |c: &crate::pipeline::CellOutcome| {
        if c.computed {
            println!(
                "cell u{}_v{} U={} V={} E={} sweeps={} {}",
                c.cell.0,
                c.cell.1,
                fmt_f64(c.u),
                fmt_f64(c.v),
                fmt_f64(c.energy),
                c.sweeps,
                if c.converged { "converged" } else { "FLAGGED" }
            );
        }
    };
    let summary = cache.sweep(&cfg.grid, Some(&report))?;
    println!("{} computed, {} cached, {} flagged", summary.computed, summary.cached, summary.flagged.len());
    if summary.flagged.is_empty() {
        Ok(EXIT_OK)
    } else {
        for (u, v) in &summary.flagged {
            eprintln!("not converged: u{u}_v{v}");
        }
        Ok(EXIT_FLAGGED)
    }
}

/// `u0:u1,v0:v1` in parameter units.
fn parse_region(grid: &SweepGrid, text: &str) -> std::result::Result<CellMask, Exit> {
    let bad = || usage(format!("region {text:?} is not u0:u1,v0:v1"));
    let (u, v) = text.split_once(',').ok_or_else(bad)?;
    let range = |s: &str| -> std::result::Result<(f64, f64), Exit> {
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
    };
    let cells = grid.cells_in(range(u)?, range(v)?);
    if cells.is_empty() {
        return Err(usage(format!("region {text:?} contains no grid cells")));
    }
    Ok(CellMask::from_cells(grid.n_u, grid.n_v, &cells))
}

pub fn cmd_train(cfg: &RunConfig, region: Option<&str>, path: Option<&Path>) -> std::result::Result<i32, Exit> {
    let g = &cfg.grid;
    let region = match region {
        Some(r) => parse_region(g, r)?,
        None => origin_block(g.n_u, g.n_v, cfg.discover.first_block),
    };
    let records = complete_records(cfg)?;
    let trained = train_region(&records, &region, &cfg.discover_config())?;
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => output_dir(cfg)?.join("model.ae"),
    };
    checkpoint::save(&trained.model, &path)?;
    println!(
        "trained on {} cells ({} skipped), loss {} -> {} (epoch {}), saved {}",
        trained.cells.len(),
        trained.skipped.len(),
        fmt_f64(trained.outcome.loss_curve[0]),
        fmt_f64(trained.train_loss),
        trained.outcome.best_epoch,
        path.display()
    );
    Ok(EXIT_OK)
}

fn region_from_metadata(grid: &SweepGrid, text: &str) -> Result<CellMask> {
    let mut mask = CellMask::empty(grid.n_u, grid.n_v);
    for item in text.split_whitespace() {
        let cell = item
            .split_once(':')
            .and_then(|(u, v)| Some((u.parse::<usize>().ok()?, v.parse::<usize>().ok()?)))
            .filter(|&(u, v)| u < grid.n_u && v < grid.n_v)
            .ok_or_else(|| Error::Format(format!("bad training cell {item:?} in checkpoint")))?;
        mask.set(cell, true);
    }
    Ok(mask)
}

pub fn cmd_scan(cfg: &RunConfig, path: &Path) -> std::result::Result<i32, Exit> {
    let model = checkpoint::load(path)?;
    let kind: InputKind = match model.metadata.get("input_kind") {
        Some(k) => k.parse()?,
        None => cfg.discover.kind,
    };
    let region = match model.metadata.get("train_region") {
        Some(r) => region_from_metadata(&cfg.grid, r)?,
        None => origin_block(cfg.grid.n_u, cfg.grid.n_v, cfg.discover.first_block),
    };
    let records = complete_records(cfg)?;
    let map = evaluate_loss_map(&model, &records, &region, kind)?;
    let threshold = map.threshold()?;
    let mut labeling = PhaseLabeling::new(cfg.grid.n_u, cfg.grid.n_v);
    labeling.assign(&map, threshold, 1, 1);
    let out = output_dir(cfg)?;
    loss_map_table(&cfg.grid, &map, &labeling).write(&out.join("lossmap_scan.csv"))?;
    write_atomic(&out.join("lossmap_scan.pgm"), loss_map_pgm(&map).as_bytes())?;
    println!("threshold {}, {} cells at or below", fmt_f64(threshold), labeling.labels.iter().flatten().count());
    Ok(EXIT_OK)
}

pub fn cmd_discover(cfg: &RunConfig, max_iter: Option<usize>, probe_ss: bool) -> std::result::Result<i32, Exit> {
    let records = complete_records(cfg)?;
    let mut dc = cfg.discover_config();
    if let Some(n) = max_iter {
        if n == 0 {
            return Err(usage("--max-iter must be positive"));
        }
        dc.max_iterations = n;
    }
    let out = output_dir(cfg)?;
    let g = &cfg.grid;
    let discovery = discover_phases(&records, g.n_u, g.n_v, &dc, |it| {
        println!(
            "iteration: {} training cells, train loss {}, threshold {}, {} cells labeled",
            it.region.count(),
            fmt_f64(it.train_loss),
            fmt_f64(it.threshold),
            it.newly_labeled
        );
    })?;
    for (k, it) in discovery.iterations.iter().enumerate() {
        let labeling = labeling_after(&discovery, k + 1);
        loss_map_table(g, &it.loss_map, &labeling).write(&out.join(format!("lossmap_{}.csv", k + 1)))?;
        write_atomic(&out.join(format!("lossmap_{}.pgm", k + 1)), loss_map_pgm(&it.loss_map).as_bytes())?;
        checkpoint::save(&it.model, &out.join(format!("model_{}.ae", k + 1)))?;
    }
    labels_table(g, &discovery.labeling).write(&out.join("labels.csv"))?;
    let mut text = render_report(cfg, &records, &discovery.labeling, Some(&discovery));
    if probe_ss {
        text.push_str(&probe_section(cfg, &records)?);
    }
    write_atomic(&out.join("report.txt"), text.as_bytes())?;
    println!("{:?}: {} loss maps, {} cells unassigned", discovery.stop, discovery.iterations.len(), discovery.labeling.unassigned_count());
    Ok(EXIT_OK)
}

/// Labels as they stood after iteration `k` (1-based).
fn labeling_after(d: &Discovery, k: usize) -> PhaseLabeling {
    let mut l = d.labeling.clone();
    for i in 0..l.labels.len() {
        if l.provenance[i].is_some_and(|it| it > k) {
            l.labels[i] = None;
            l.provenance[i] = None;
        }
    }
    l.thresholds.truncate(k);
    l
}

fn render_report(cfg: &RunConfig, records: &[GroundStateRecord], labeling: &PhaseLabeling, d: Option<&Discovery>) -> String {
    let g = &cfg.grid;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "grid: U [{}, {}] x {}, V [{}, {}] x {}; L={} n_max={} N={} chi_max={}",
        fmt_f64(g.u_range.0),
        fmt_f64(g.u_range.1),
        g.n_u,
        fmt_f64(g.v_range.0),
        fmt_f64(g.v_range.1),
        g.n_v,
        g.model.length,
        g.model.n_max,
        g.particles(),
        g.dmrg.chi_max
    );
    let _ = writeln!(s, "input: {}", cfg.discover.kind);
    let flagged = records.iter().filter(|r| !r.converged()).count();
    let _ = writeln!(s, "non-converged cells: {flagged}");
    if let Some(d) = d {
        let _ = writeln!(s, "\niterations");
        for (k, it) in d.iterations.iter().enumerate() {
            let _ = writeln!(
                s,
                "  {}: {} training cells {}, train loss {}, threshold {}, labeled {}",
                k + 1,
                it.region.count(),
                describe_box(g, &it.region),
                fmt_f64(it.train_loss),
                fmt_f64(it.threshold),
                it.newly_labeled
            );
        }
        let _ = writeln!(s, "  stop: {:?}", d.stop);
    }
    let _ = writeln!(s, "\nphases");
    let mut ids: Vec<u32> = labeling.labels.iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let groups = ids.into_iter().map(Some).chain(std::iter::once(None));
    for id in groups {
        let cells: Vec<usize> = (0..labeling.labels.len()).filter(|&i| labeling.labels[i] == id).collect();
        if cells.is_empty() {
            continue;
        }
        let mask = CellMask { n_u: g.n_u, n_v: g.n_v, bits: (0..labeling.labels.len()).map(|i| labeling.labels[i] == id).collect() };
        let mean = |f: &dyn Fn(&GroundStateRecord) -> f64| cells.iter().map(|&i| f(&records[i])).sum::<f64>() / cells.len() as f64;
        let _ = writeln!(
            s,
            "  {}: {} cells {}, mean O_SF {:.4} O_DW {:.4} O_HI {:.4} S {:.4} xi {:.3}",
            id.map_or(UNASSIGNED.to_string(), |l| format!("phase {l}")),
            cells.len(),
            describe_box(g, &mask),
            mean(&|r| r.observables.o_sf),
            mean(&|r| r.observables.o_dw),
            mean(&|r| r.observables.o_hi),
            mean(&|r| r.observables.structure_factor),
            mean(&|r| r.xi)
        );
    }
    s
}

fn describe_box(g: &SweepGrid, mask: &CellMask) -> String {
    match mask.bounding_box() {
        Some(((u0, u1), (v0, v1))) => format!(
            "U [{:.3}, {:.3}] V [{:.3}, {:.3}]",
            g.u(u0),
            g.u(u1),
            g.v(v0),
            g.v(v1)
        ),
        None => "(empty)".into(),
    }
}

fn probe_section(cfg: &RunConfig, records: &[GroundStateRecord]) -> Result<String> {
    let g = &cfg.grid;
    let all = CellMask { n_u: g.n_u, n_v: g.n_v, bits: vec![true; g.len()] };
    let rows = supersolid_probe(records, &all, &cfg.probe.thresholds)?;
    probe_table(&rows).write(&output_dir(cfg)?.join("probe.csv"))?;
    let th = &cfg.probe.thresholds;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "\nsupersolid probe (O_SF > {}, O_DW > {}, S > {})",
        fmt_f64(th.o_sf),
        fmt_f64(th.o_dw),
        fmt_f64(th.s)
    );
    let _ = writeln!(s, "  U V O_SF O_DW S");
    for r in rows.iter().filter(|r| r.candidate) {
        let _ = writeln!(s, "  {:.3} {:.3} {:.4} {:.4} {:.4}", r.u, r.v, r.o_sf, r.o_dw, r.s);
    }
    let _ = writeln!(s, "  candidates: {}", rows.iter().filter(|r| r.candidate).count());
    let (hu, hv) = cfg.probe.hole_point;
    let params = ModelParams { length: cfg.probe.hole_length, ..g.model.with_uv(hu, hv) };
    let study = hole_study(&params, &g.dmrg, cfg.probe.max_holes)?;
    let _ = writeln!(s, "\nhole study at U={} V={} L={}", fmt_f64(hu), fmt_f64(hv), params.length);
    for p in &study {
        let _ = writeln!(s, "  h={} S={:.6} converged={}", p.holes, p.structure_factor, p.converged);
    }
    Ok(s)
}

pub fn cmd_observables(cfg: &RunConfig) -> std::result::Result<i32, Exit> {
    let records = complete_records(cfg)?;
    let path = output_dir(cfg)?.join("observables.csv");
    observables_table(&records).write(&path)?;
    println!("{} rows written to {}", records.len(), path.display());
    Ok(EXIT_OK)
}

pub fn cmd_fidelity(cfg: &RunConfig, axis: Axis, fixed: f64, points: usize) -> std::result::Result<i32, Exit> {
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    if !fixed.is_finite() {
        return Err(usage("--fixed must be a finite number"));
    }
    let g = &cfg.grid;
    let (lo, hi) = if axis == Axis::U { g.u_range } else { g.v_range };
    let xs: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let cut: Vec<ModelParams> =
        xs.iter().map(|&x| if axis == Axis::U { g.model.with_uv(x, fixed) } else { g.model.with_uv(fixed, x) }).collect();
    let scan = fidelity_scan(&cut, &g.dmrg, g.particles())?;
    let path = output_dir(cfg)?.join("fidelity.csv");
    fidelity_table(&xs, &scan.matrix).write(&path)?;
    let flagged = scan.reports.iter().filter(|r| !r.converged).count();
    println!("{points}x{points} fidelity matrix written to {} ({flagged} flagged)", path.display());
    Ok(EXIT_OK)
}

pub fn cmd_report(cfg: &RunConfig) -> std::result::Result<i32, Exit> {
    let records = complete_records(cfg)?;
    let out = output_dir(cfg)?;
    let path = out.join("labels.csv");
    let text = fs::read_to_string(&path).map_err(|e| Exit { code: EXIT_FAILURE, message: format!("{}: {e}", path.display()) })?;
    let table = Table::parse(&text)?;
    let g = &cfg.grid;
    let mut labeling = PhaseLabeling::new(g.n_u, g.n_v);
    let col = |n: &str| table.column(n).ok_or_else(|| Error::Format(format!("labels.csv lacks column {n}")));
    let (ciu, civ, cl, cit) = (col("iu")?, col("iv")?, col("label")?, col("iteration")?);
    for row in &table.rows {
        let cell: (usize, usize) = (
            row[ciu].parse().map_err(|_| Error::Format("bad iu".into()))?,
            row[civ].parse().map_err(|_| Error::Format("bad iv".into()))?,
        );
        if cell.0 >= g.n_u || cell.1 >= g.n_v {
            return Err(Error::Format(format!("labels.csv cell {cell:?} outside the grid")).into());
        }
        let i = g.index(cell);
        labeling.labels[i] = row[cl].parse().ok();
        labeling.provenance[i] = row[cit].parse().ok();
    }
    let s = render_report(cfg, &records, &labeling, None);
    write_atomic(&out.join("report.txt"), s.as_bytes())?;
    print!("{s}");
    Ok(EXIT_OK)
}
