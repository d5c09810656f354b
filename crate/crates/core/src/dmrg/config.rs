use crate::error::{Error, Result};

/// Settings of one finite-chain DMRG run.
#[derive(Clone, Debug, PartialEq)]
pub struct DmrgConfig {
    pub chi_max: usize,
    pub max_sweeps: usize,
    /// Absolute per-sweep energy change below which the run stops. `None`
    /// means `1e-9 * L`.
    pub energy_tol: Option<f64>,
    pub lanczos_iters: usize,
    pub lanczos_tol: f64,
    pub mixer_strength: f64,
    pub mixer_decay: f64,
    /// Sweeps after which the mixer is switched off.
    pub mixer_sweeps: usize,
    /// Bond dimension of the first sweep; doubled each sweep until `chi_max`.
    pub chi_start: usize,
    /// Amplitude of seeded noise added to the two-site tensor in sweep one.
    pub noise: f64,
    pub sv_min: f64,
    pub seed: u64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            chi_max: 50,
            max_sweeps: 30,
            energy_tol: None,
            lanczos_iters: 40,
            lanczos_tol: 1e-10,
            mixer_strength: 0.02,
            mixer_decay: 0.5,
            mixer_sweeps: 5,
            chi_start: 16,
            noise: 1e-4,
            sv_min: crate::tn::svd::SV_MIN,
            seed: 1,
        }
    }
}

impl DmrgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chi_max == 0 {
            return Err(Error::Config("dmrg.chi_max must be at least 1".into()));
        }
        if self.max_sweeps == 0 || self.lanczos_iters == 0 {
            return Err(Error::Config("dmrg.max_sweeps and dmrg.lanczos_iters must be positive".into()));
        }
        if let Some(tol) = self.energy_tol {
            if !(tol > 0.0) {
                return Err(Error::Config("dmrg.energy_tol must be positive".into()));
            }
        }
        if !(self.lanczos_tol > 0.0) {
            return Err(Error::Config("dmrg.lanczos_tol must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.mixer_strength) || !(0.0..=1.0).contains(&self.mixer_decay) {
            return Err(Error::Config("dmrg.mixer must satisfy 0 <= strength < 1, 0 <= decay <= 1".into()));
        }
        if !(self.noise >= 0.0) || !(self.sv_min >= 0.0) {
            return Err(Error::Config("dmrg.noise and dmrg.sv_min must be non-negative".into()));
        }
        Ok(())
    }

    pub fn energy_tol_for(&self, length: usize) -> f64 {
        self.energy_tol.unwrap_or(1e-9 * length as f64)
    }

    /// Mixer strength used during sweep `sweep` (0-based).
    pub fn mixer_at(&self, sweep: usize) -> f64 {
        if sweep >= self.mixer_sweeps {
            0.0
        } else {
            self.mixer_strength * self.mixer_decay.powi(sweep as i32)
        }
    }

    /// Bond dimension cap of sweep `sweep` (0-based).
    pub fn chi_at(&self, sweep: usize) -> usize {
        let start = self.chi_start.max(1);
        start.checked_shl(sweep.min(30) as u32).unwrap_or(usize::MAX).min(self.chi_max)
    }
}

/// What happened during a DMRG run.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// Energy after every full sweep.
    pub energy_per_sweep: Vec<f64>,
    /// Energy at the end of every half-sweep.
    pub energy_per_half_sweep: Vec<f64>,
    pub final_energy: f64,
    pub discarded_weight_max: f64,
    pub converged: bool,
    pub sweeps_used: usize,
    /// Effective problems whose Lanczos run hit the iteration cap.
    pub lanczos_unconverged: usize,
}
