use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::SchemeKind;
use crate::error::{Error, Result};
use crate::freestage::{DevMode, PgKey};
use crate::geo::{GeoParams, Selection};
use crate::mpsgen::TrainParams;
use crate::solvers::SolverKind;

/// Booster settings shared by every boosted run of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeoSettings {
    pub batch_size: usize,
    pub oversample_factor: usize,
    pub resample_rounds: usize,
    pub sweeps: usize,
    pub learning_rate: f64,
    pub warm_start: bool,
    pub selection: Selection,
    pub pg_key: PgKey,
}

impl Default for GeoSettings {
    fn default() -> Self {
        let geo = GeoParams::default();
        Self {
            batch_size: geo.batch_size,
            oversample_factor: geo.oversample_factor,
            resample_rounds: geo.resample_rounds,
            sweeps: geo.train.sweeps,
            learning_rate: geo.train.learning_rate,
            warm_start: geo.warm_start,
            selection: geo.selection,
            pg_key: PgKey::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub margins: Vec<f64>,
    pub dev_modes: Vec<DevMode>,
    pub schemes: Vec<SchemeKind>,
    pub solvers: Vec<SolverKind>,
    pub runs_per_cell: usize,
    pub budget: usize,
    pub seed_evals: usize,
    pub master_seed: u64,
    /// Count unique evaluations only (see [`crate::solvers::RunOptions`]).
    pub cache: bool,
    /// Largest space searched exhaustively for the reference optimum.
    pub brute_force_cap: u64,
    /// Bond dimension of the main boosted runs.
    pub chi: usize,
    /// Also boost with every bond dimension of `chi_list` (PGGray only).
    pub bond_sweep: bool,
    pub chi_list: Vec<usize>,
    /// Also run every solver on the twelve-body formulation.
    pub twelve_body: bool,
    pub geo: GeoSettings,
    /// Worker threads; results do not depend on it.
    pub threads: usize,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            margins: vec![0.015, 0.02, 0.025, 0.05, 1.0],
            dev_modes: vec![DevMode::No, DevMode::Yes],
            schemes: SchemeKind::ALL.to_vec(),
            solvers: SolverKind::ALL.to_vec(),
            runs_per_cell: 50,
            budget: 240,
            seed_evals: 100,
            master_seed: 0,
            cache: true,
            brute_force_cap: 50_000,
            chi: 6,
            bond_sweep: false,
            chi_list: (2..=10).collect(),
            twelve_body: false,
            geo: GeoSettings::default(),
            threads: 1,
        }
    }
}

impl ExperimentGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: Self = toml::from_str(text).map_err(|e| Error::parse("grid", e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("grid serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.margins.is_empty() || self.dev_modes.is_empty() || self.solvers.is_empty() {
            return fail("grid axes must be non-empty");
        }
        if self.schemes.is_empty() && !self.bond_sweep {
            return fail("grid needs at least one scheme");
        }
        if self.margins.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return fail("margins must be positive");
        }
        if self.runs_per_cell == 0 {
            return fail("runs_per_cell must be at least 1");
        }
        if self.bond_sweep && self.chi_list.is_empty() {
            return fail("bond sweep needs a non-empty chi_list");
        }
        if self.chi == 0 || self.chi_list.contains(&0) {
            return fail("bond dimensions must be at least 1");
        }
        self.geo_params(self.chi).validate()
    }

    pub fn geo_params(&self, chi: usize) -> GeoParams {
        GeoParams {
            seed_evals: self.seed_evals,
            total_budget: self.budget,
            batch_size: self.geo.batch_size,
            oversample_factor: self.geo.oversample_factor,
            resample_rounds: self.geo.resample_rounds,
            train: TrainParams {
                sweeps: self.geo.sweeps,
                learning_rate: self.geo.learning_rate,
                max_bond: chi,
                ..TrainParams::default()
            },
            warm_start: self.geo.warm_start,
            selection: self.geo.selection,
        }
    }

    /// Boost variants to run: every scheme at `chi`, plus PGGray at every
    /// bond dimension of the sweep.
    pub fn variants(&self) -> Vec<Variant> {
        let mut out: Vec<Variant> = self
            .schemes
            .iter()
            .map(|&scheme| Variant {
                scheme,
                chi: self.chi,
            })
            .collect();
        if self.bond_sweep {
            for &chi in &self.chi_list {
                let v = Variant {
                    scheme: SchemeKind::Pggray,
                    chi,
                };
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

/// One boosted configuration: encoding scheme and bond dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub scheme: SchemeKind,
    pub chi: usize,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_chi{}", self.scheme, self.chi)
    }
}

/// A search space of the grid: a reduced 3-body space or the 12-body one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formulation", rename_all = "lowercase")]
pub enum SpaceKey {
    #[serde(rename = "3body")]
    ThreeBody { margin: f64, dev: DevMode },
    #[serde(rename = "12body")]
    TwelveBody,
}

impl SpaceKey {
    /// File-name friendly label, e.g. `noDev-1.5` or `12body`.
    pub fn label(&self) -> String {
        match self {
            SpaceKey::ThreeBody { margin, dev } => format!("{dev}-{}", margin * 100.0),
            SpaceKey::TwelveBody => "12body".into(),
        }
    }

    fn stream(&self) -> u64 {
        match self {
            SpaceKey::ThreeBody { margin, dev } => {
                margin.to_bits() ^ if *dev == DevMode::Yes { 1 << 63 } else { 0 }
            }
            SpaceKey::TwelveBody => u64::MAX,
        }
    }
}

impl fmt::Display for SpaceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Which seed of a run is wanted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRole {
    Conventional,
    Boost(Variant),
}

/// Seed of one run, derived from the master seed by position rather than by
/// drawing in sequence, so adding cells or variants never shifts the seeds
/// of others. The conventional seed depends on the solver's position in
/// [`SolverKind::ALL`], not on the grid's solver list; the 3-body and
/// 12-body runs with the same run index share a conventional seed.
pub fn run_seed(master: u64, space: &SpaceKey, solver: SolverKind, run: usize, role: SeedRole) -> u64 {
    let solver_idx = SolverKind::ALL.iter().position(|&k| k == solver).expect("known solver") as u128;
    let stream = match role {
        SeedRole::Conventional => 0,
        SeedRole::Boost(_) => space.stream(),
    };
    let role_idx: u128 = match role {
        SeedRole::Conventional => 0,
        SeedRole::Boost(v) => {
            let scheme = SchemeKind::ALL.iter().position(|&s| s == v.scheme).expect("scheme") as u128;
            1 + scheme * 64 + v.chi.min(63) as u128
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    // two 32-bit words per draw
    rng.set_word_pos(2 * ((((role_idx << 8) | solver_idx) << 32) | run as u128));
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_round_trips_through_toml() {
        let g = ExperimentGrid::default();
        assert_eq!(ExperimentGrid::from_toml(&g.to_toml()).unwrap(), g);
        let g = ExperimentGrid::from_toml("runs_per_cell = 3\nmargins = [0.02]\n").unwrap();
        assert_eq!(g.runs_per_cell, 3);
        assert_eq!(g.budget, 240);
        assert!(ExperimentGrid::from_toml("runs = 3").is_err());
        assert!(ExperimentGrid::from_toml("margins = []").is_err());
    }

    #[test]
    fn seeds_are_positional() {
        let s = SpaceKey::ThreeBody {
            margin: 0.02,
            dev: DevMode::Yes,
        };
        let a = run_seed(7, &s, SolverKind::Sa, 3, SeedRole::Conventional);
        assert_eq!(a, run_seed(7, &s, SolverKind::Sa, 3, SeedRole::Conventional));
        let mut seen = std::collections::HashSet::new();
        for solver in SolverKind::ALL {
            for run in 0..50 {
                assert!(seen.insert(run_seed(7, &s, solver, run, SeedRole::Conventional)));
                let v = Variant {
                    scheme: SchemeKind::Gray,
                    chi: 6,
                };
                assert!(seen.insert(run_seed(7, &s, solver, run, SeedRole::Boost(v))));
            }
        }
        assert_ne!(a, run_seed(8, &s, SolverKind::Sa, 3, SeedRole::Conventional));
    }
}
