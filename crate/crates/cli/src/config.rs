//! Generator sweep configuration (TOML).
//!
//! ```toml
//! seed = 7
//! replicates = 2
//! n_jobs = [15]
//! n_families = 2          # a scalar is a one-element sweep
//! n_machines = [2]
//! setup_scale = [20, 50, 100]
//! ptime_range = [1, 20]
//! weight_range = [1, 10]
//! release_factor = 0.5
//! core_node_budget = 20000
//! ```

use anyhow::{bail, Result};
use serde::Deserialize;

use sbatch_core::instgen::GenConfig;
use sbatch_core::model::Time;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Sweep<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Sweep<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Sweep::One(v) => vec![v.clone()],
            Sweep::Many(vs) => vs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    pub n_jobs: Sweep<usize>,
    pub n_families: Sweep<usize>,
    pub n_machines: Sweep<usize>,
    pub setup_scale: Sweep<Time>,
    pub ptime_range: Option<(Time, Time)>,
    pub weight_range: Option<(i64, i64)>,
    pub release_factor: Option<f64>,
    /// Node cap for the relaxation solve that fixes the minimum sizes. A
    /// node cap rather than a time cap keeps generation reproducible.
    #[serde(default = "default_core_nodes")]
    pub core_node_budget: u64,
}

fn one() -> usize {
    1
}

/// Default node cap of the relaxation solve during generation.
pub const DEFAULT_CORE_NODE_BUDGET: u64 = 20_000;

fn default_core_nodes() -> u64 {
    DEFAULT_CORE_NODE_BUDGET
}

/// One generated file: its name and generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub file_name: String,
    pub config: GenConfig,
}

impl GenFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn cells(&self) -> Result<Vec<Cell>> {
        let (js, fs, ms, ss) = (
            self.n_jobs.values(),
            self.n_families.values(),
            self.n_machines.values(),
            self.setup_scale.values(),
        );
        for (name, empty) in [
            ("n_jobs", js.is_empty()),
            ("n_families", fs.is_empty()),
            ("n_machines", ms.is_empty()),
            ("setup_scale", ss.is_empty()),
        ] {
            if empty {
                bail!("sweep list {name} is empty");
            }
        }
        if self.replicates == 0 {
            bail!("replicates must be positive");
        }
        let base = GenConfig::default();
        let mut cells = Vec::new();
        for &j in &js {
            for &f in &fs {
                for &m in &ms {
                    for &s in &ss {
                        for k in 1..=self.replicates {
                            let seed = cell_seed(self.seed, &[j as u64, f as u64, m as u64, s as u64, k as u64]);
                            let config = GenConfig {
                                ptime_range: self.ptime_range.unwrap_or(base.ptime_range),
                                weight_range: self.weight_range.unwrap_or(base.weight_range),
                                release_factor: self.release_factor.unwrap_or(base.release_factor),
                                ..GenConfig::new(j, f, m, s, seed)
                            };
                            config.validate()?;
                            cells.push(Cell {
                                file_name: format!("J{j}_F{f}_M{m}_S{s}_r{k}.json"),
                                config,
                            });
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// Mixes the sweep coordinates into the base seed (splitmix64 steps), so
/// every cell draws from its own stream and adding cells does not shift
/// the others.
fn cell_seed(base: u64, coords: &[u64]) -> u64 {
    let mut z = base;
    for &c in coords {
        z = z.wrapping_add(c).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Class key `J{J}-F{F}-M{M}-S{S}` from a generated file stem; other stems
/// fall back to the instance dimensions.
pub fn class_label(stem: &str, n_jobs: usize, n_families: usize, n_machines: usize) -> String {
    let parts: Vec<&str> = stem.split('_').collect();
    let tagged = |p: &str, tag: char| {
        p.strip_prefix(tag)
            .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
    };
    if parts.len() >= 4
        && tagged(parts[0], 'J')
        && tagged(parts[1], 'F')
        && tagged(parts[2], 'M')
        && tagged(parts[3], 'S')
    {
        parts[..4].join("-")
    } else {
        format!("J{n_jobs}-F{n_families}-M{n_machines}")
    }
}
