//! Machine design by Monte-Carlo cost simulation.
//!
//! Given the fitted cores -> SSD/RAM projections of a group, a candidate
//! design (S GB SSD, R GB RAM, fixed core count) is costed by resampling
//! per-core usage slopes from the observed distribution: each draw works
//! out how many cores the design can actually feed, then prices the idle
//! cores, idle SSD/RAM, and a stranding penalty whenever SSD or RAM runs
//! out. The design grid's expected-cost surface has a sweet spot between
//! starved (stranding dominates) and oversized (idle cost dominates).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mix_seed;
use crate::whatif::ResourceModels;

/// Idle SSD/RAM below this many GB counts as stranded; exact-zero
/// comparison would be numerically fragile.
pub const STRANDING_EPSILON_GB: f64 = 1e-9;

/// Cost coefficients for one candidate design, in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    /// Cost per idle CPU core.
    pub unit_core: f64,
    /// Cost per idle GB of SSD.
    pub unit_ssd_gb: f64,
    /// Cost per idle GB of RAM.
    pub unit_ram_gb: f64,
    /// Penalty when the design runs out of SSD.
    pub strand_ssd: f64,
    /// Penalty when the design runs out of RAM.
    pub strand_ram: f64,
    /// Cores of the future machine.
    pub c_max: u32,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            unit_core: 1.0,
            unit_ssd_gb: 0.01,
            unit_ram_gb: 0.05,
            strand_ssd: 500.0,
            strand_ram: 500.0,
            c_max: 128,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("unit_core", self.unit_core),
            ("unit_ssd_gb", self.unit_ssd_gb),
            ("unit_ram_gb", self.unit_ram_gb),
            ("strand_ssd", self.strand_ssd),
            ("strand_ram", self.strand_ram),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "cost `{name}` must be finite and non-negative, got {v}"
                )));
            }
        }
        // Running out of CPU degrades gracefully; running out of SSD/RAM
        // does not, so stranding must cost at least the idle unit.
        if self.strand_ssd < self.unit_ssd_gb || self.strand_ram < self.unit_ram_gb {
            return Err(Error::InvalidInput(
                "stranding penalties must be at least the idle unit costs".into(),
            ));
        }
        if self.c_max == 0 {
            return Err(Error::InvalidInput("c_max must be positive".into()));
        }
        Ok(())
    }
}

/// Whether the SSD and RAM per-core slopes are drawn as observed pairs
/// (preserving their correlation) or independently.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeSampling {
    /// Keep each observation's (ssd, ram) slopes together.
    #[default]
    Joint,
    /// Draw the two components from separate observations.
    Independent,
}

/// Expected cost per grid cell, plus the evaluation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSurface {
    /// Ascending SSD sizes in GB.
    pub ssd_grid: Vec<f64>,
    /// Ascending RAM sizes in GB.
    pub ram_grid: Vec<f64>,
    /// `expected_cost[i][j]` for design `(ssd_grid[i], ram_grid[j])`.
    pub expected_cost: Vec<Vec<f64>>,
    pub draws: u32,
    pub seed: u64,
}

fn positive_slopes(samples: &[f64]) -> Vec<f64> {
    samples.iter().copied().filter(|&b| b > 0.0).collect()
}

struct SlopePool {
    joint: Vec<(f64, f64)>,
    ssd_only: Vec<f64>,
    ram_only: Vec<f64>,
    sampling: SlopeSampling,
}

impl SlopePool {
    fn new(models: &ResourceModels, sampling: SlopeSampling) -> Result<Self> {
        if models.per_core_samples.is_empty() {
            return Err(Error::EmptyInput(format!(
                "per-core slope samples for group `{}`",
                models.group_id
            )));
        }
        // Draws with non-positive slopes are rejected and redrawn, which
        // is equivalent to sampling uniformly from the valid subset.
        let joint: Vec<(f64, f64)> = models
            .per_core_samples
            .iter()
            .copied()
            .filter(|&(s, r)| s > 0.0 && r > 0.0)
            .collect();
        let ssd_only = positive_slopes(
            &models
                .per_core_samples
                .iter()
                .map(|p| p.0)
                .collect::<Vec<_>>(),
        );
        let ram_only = positive_slopes(
            &models
                .per_core_samples
                .iter()
                .map(|p| p.1)
                .collect::<Vec<_>>(),
        );
        let exhausted = match sampling {
            SlopeSampling::Joint => joint.is_empty(),
            SlopeSampling::Independent => ssd_only.is_empty() || ram_only.is_empty(),
        };
        if exhausted {
            return Err(Error::InvalidInput(format!(
                "group `{}` has no positive per-core slope samples",
                models.group_id
            )));
        }
        Ok(SlopePool {
            joint,
            ssd_only,
            ram_only,
            sampling,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self.sampling {
            SlopeSampling::Joint => self.joint[rng.random_range(0..self.joint.len())],
            SlopeSampling::Independent => {
                let s = self.ssd_only[rng.random_range(0..self.ssd_only.len())];
                let r = self.ram_only[rng.random_range(0..self.ram_only.len())];
                (s, r)
            }
        }
    }
}

fn draw_cost(
    models: &ResourceModels,
    pool: &SlopePool,
    ssd_gb: f64,
    ram_gb: f64,
    cfg: &CostConfig,
    draw_seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
    let (ssd_per_core, ram_per_core) = pool.draw(&mut rng);
    let ssd_base = models.cores_to_ssd.intercept;
    let ram_base = models.cores_to_ram.intercept;
    let c_max = cfg.c_max as f64;

    // Feedable cores: whichever of the core budget, SSD or RAM binds
    // first, by inverting the usage projections.
    let cores = c_max
        .min((ssd_gb - ssd_base) / ssd_per_core)
        .min((ram_gb - ram_base) / ram_per_core)
        .max(0.0);
    let idle_cores = c_max - cores;
    let idle_ssd = ssd_gb - (ssd_base + ssd_per_core * cores);
    let idle_ram = ram_gb - (ram_base + ram_per_core * cores);

    let mut cost =
        cfg.unit_core * idle_cores + cfg.unit_ssd_gb * idle_ssd + cfg.unit_ram_gb * idle_ram;
    if idle_ssd <= STRANDING_EPSILON_GB {
        cost += cfg.strand_ssd;
    }
    if idle_ram <= STRANDING_EPSILON_GB {
        cost += cfg.strand_ram;
    }
    cost
}

/// Expected cost of one `(S, R)` design: the mean over `draws` resampled
/// slope pairs, each drawn from its own sub-seeded stream so that draw
/// order and parallelism cannot change the estimate.
pub fn simulate_design_cost(
    models: &ResourceModels,
    ssd_gb: f64,
    ram_gb: f64,
    cfg: &CostConfig,
    draws: u32,
    seed: u64,
) -> Result<f64> {
    simulate_with_sampling(
        models,
        ssd_gb,
        ram_gb,
        cfg,
        draws,
        seed,
        SlopeSampling::Joint,
    )
}

/// [`simulate_design_cost`] with an explicit slope-sampling mode.
pub fn simulate_with_sampling(
    models: &ResourceModels,
    ssd_gb: f64,
    ram_gb: f64,
    cfg: &CostConfig,
    draws: u32,
    seed: u64,
    sampling: SlopeSampling,
) -> Result<f64> {
    cfg.validate()?;
    if !(ssd_gb > 0.0 && ram_gb > 0.0) {
        return Err(Error::InvalidInput(format!(
            "design sizes must be positive, got SSD {ssd_gb} GB, RAM {ram_gb} GB"
        )));
    }
    if draws == 0 {
        return Err(Error::InvalidInput("draws must be at least 1".into()));
    }
    let pool = SlopePool::new(models, sampling)?;
    let total: f64 = (0..draws)
        .map(|i| draw_cost(models, &pool, ssd_gb, ram_gb, cfg, mix_seed(seed, i as u64)))
        .sum();
    Ok(total / draws as f64)
}

/// Evaluates the whole design grid. Cell `(i, j)` always uses the seed
/// stream derived from its index, so the surface is deterministic and
/// cells can be computed in parallel.
pub fn cost_surface(
    models: &ResourceModels,
    ssd_grid: &[f64],
    ram_grid: &[f64],
    cfg: &CostConfig,
    draws: u32,
    seed: u64,
    sampling: SlopeSampling,
) -> Result<CostSurface> {
    if ssd_grid.is_empty() || ram_grid.is_empty() {
        return Err(Error::EmptyInput("design grid".into()));
    }
    for grid in [ssd_grid, ram_grid] {
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "design grids must be strictly ascending".into(),
            ));
        }
    }
    let cells: Vec<(usize, usize)> = (0..ssd_grid.len())
        .flat_map(|i| (0..ram_grid.len()).map(move |j| (i, j)))
        .collect();
    let flat: Vec<f64> = cells
        .into_par_iter()
        .map(|(i, j)| {
            let cell_seed = mix_seed(seed, (i as u64) << 32 | j as u64);
            simulate_with_sampling(
                models,
                ssd_grid[i],
                ram_grid[j],
                cfg,
                draws,
                cell_seed,
                sampling,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let expected_cost = flat
        .chunks(ram_grid.len())
        .map(|row| row.to_vec())
        .collect();
    Ok(CostSurface {
        ssd_grid: ssd_grid.to_vec(),
        ram_grid: ram_grid.to_vec(),
        expected_cost,
        draws,
        seed,
    })
}

/// Argmin cell of the surface; ties prefer smaller SSD, then smaller RAM.
pub fn pick_design(surface: &CostSurface) -> Result<(f64, f64, f64)> {
    if surface.expected_cost.is_empty() {
        return Err(Error::EmptyInput("cost surface".into()));
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, row) in surface.expected_cost.iter().enumerate() {
        for (j, &cost) in row.iter().enumerate() {
            let candidate = (surface.ssd_grid[i], surface.ram_grid[j], cost);
            let better = match best {
                None => true,
                // Strict improvement only: earlier (smaller) cells win ties.
                Some((_, _, best_cost)) => cost < best_cost,
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    Ok(best.expect("non-empty surface"))
}

/// Long-form CSV of the surface: `ssd_gb,ram_gb,expected_cost`.
pub fn surface_csv(surface: &CostSurface) -> String {
    let mut out = String::from("ssd_gb,ram_gb,expected_cost\n");
    for (i, row) in surface.expected_cost.iter().enumerate() {
        for (j, cost) in row.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                surface.ssd_grid[i], surface.ram_grid[j], cost
            ));
        }
    }
    out
}
