//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! ```text
//! # comment
//! model.length = 32
//! dmrg.chi_max = 50
//! grid.n_u = 15
//! ```
//!
//! Unknown keys and unparsable values are errors.

use std::path::PathBuf;
use std::str::FromStr;

use crate::ae::{ShortcutMode, TrainConfig};
use crate::error::{Error, Result};
use crate::pipeline::{DiscoverConfig, InputKind, SupersolidThresholds, SweepGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub thresholds: SupersolidThresholds,
    /// Cell of the hole study, in (U, V).
    pub hole_point: (f64, f64),
    pub max_holes: usize,
    /// Chain length of the hole study.
    pub hole_length: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { thresholds: SupersolidThresholds::default(), hole_point: (0.5, 4.0), max_holes: 4, hole_length: 16 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: SweepGrid,
    pub discover: DiscoverConfig,
    pub probe: ProbeConfig,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: SweepGrid::default(),
            discover: DiscoverConfig::default(),
            probe: ProbeConfig::default(),
            cache_dir: PathBuf::from("phasescout-cache"),
            output_dir: PathBuf::from("phasescout-out"),
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let g = &mut self.grid;
        let d = &mut self.discover;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "model.t" => g.model.t = parse(key, v)?,
            "model.n_max" => g.model.n_max = parse(key, v)?,
            "model.length" => g.model.length = parse(key, v)?,
            "model.particles" => g.particles = Some(parse(key, v)?),
            "dmrg.chi_max" => g.dmrg.chi_max = parse(key, v)?,
            "dmrg.max_sweeps" => g.dmrg.max_sweeps = parse(key, v)?,
            "dmrg.energy_tol" => g.dmrg.energy_tol = Some(parse(key, v)?),
            "dmrg.lanczos_iters" => g.dmrg.lanczos_iters = parse(key, v)?,
            "dmrg.lanczos_tol" => g.dmrg.lanczos_tol = parse(key, v)?,
            "dmrg.mixer_strength" => g.dmrg.mixer_strength = parse(key, v)?,
            "dmrg.mixer_decay" => g.dmrg.mixer_decay = parse(key, v)?,
            "dmrg.mixer_sweeps" => g.dmrg.mixer_sweeps = parse(key, v)?,
            "dmrg.chi_start" => g.dmrg.chi_start = parse(key, v)?,
            "dmrg.noise" => g.dmrg.noise = parse(key, v)?,
            "dmrg.sv_min" => g.dmrg.sv_min = parse(key, v)?,
            "dmrg.seed" => g.dmrg.seed = parse(key, v)?,
            "grid.u_min" => g.u_range.0 = parse(key, v)?,
            "grid.u_max" => g.u_range.1 = parse(key, v)?,
            "grid.v_min" => g.v_range.0 = parse(key, v)?,
            "grid.v_max" => g.v_range.1 = parse(key, v)?,
            "grid.n_u" => g.n_u = parse(key, v)?,
            "grid.n_v" => g.n_v = parse(key, v)?,
            "ae.epochs" => d.train.epochs = parse(key, v)?,
            "ae.batch_size" => d.train.batch_size = parse(key, v)?,
            "ae.learning_rate" => d.train.learning_rate = parse(key, v)?,
            "ae.filters" => d.arch.filters = parse(key, v)?,
            "ae.kernel" => d.arch.kernel = parse(key, v)?,
            "ae.shortcuts" => d.arch.shortcuts = ShortcutMode::from_str(v)?,
            "discover.input_kind" => d.kind = InputKind::from_str(v)?,
            "discover.max_iter" => d.max_iterations = parse(key, v)?,
            "discover.first_block" => d.first_block = parse(key, v)?,
            "discover.min_region_cells" => d.min_region_cells = parse(key, v)?,
            "probe.o_sf" => self.probe.thresholds.o_sf = parse(key, v)?,
            "probe.o_dw" => self.probe.thresholds.o_dw = parse(key, v)?,
            "probe.s" => self.probe.thresholds.s = parse(key, v)?,
            "probe.hole_u" => self.probe.hole_point.0 = parse(key, v)?,
            "probe.hole_v" => self.probe.hole_point.1 = parse(key, v)?,
            "probe.max_holes" => self.probe.max_holes = parse(key, v)?,
            "probe.hole_length" => self.probe.hole_length = parse(key, v)?,
            "paths.cache" => self.cache_dir = PathBuf::from(v),
            "paths.output" => self.output_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.discover.train.validate()?;
        let a = &self.discover.arch;
        if a.filters == 0 || a.kernel % 2 == 0 {
            return Err(Error::Config("ae.filters must be positive and ae.kernel odd".into()));
        }
        if self.discover.max_iterations == 0 || self.discover.first_block == 0 {
            return Err(Error::Config("discover.max_iter and discover.first_block must be positive".into()));
        }
        if self.probe.hole_length < 2 || self.probe.max_holes >= self.probe.hole_length {
            return Err(Error::Config("probe.max_holes must be below probe.hole_length".into()));
        }
        Ok(())
    }

    /// Discovery settings with the run seed applied.
    pub fn discover_config(&self) -> DiscoverConfig {
        DiscoverConfig {
            train: TrainConfig { seed: self.seed, ..self.discover.train.clone() },
            model_seed: self.seed,
            ..self.discover.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let c = RunConfig::parse("dmrg.chi_max = 20  # small\n\nmodel.length=8\ndiscover.input_kind = csf\n").unwrap();
        assert_eq!(c.grid.dmrg.chi_max, 20);
        assert_eq!(c.grid.model.length, 8);
        assert_eq!(c.discover.kind, InputKind::Csf);
        assert!(matches!(RunConfig::parse("dmrg.chi = 3"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("grid.n_u = x"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("grid.n_u = 1"), Err(Error::Config(_))));
        assert!(RunConfig::parse("just words").is_err());
    }
}
