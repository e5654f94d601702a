//! Search spaces seen by the solvers: a point is a short vector of field
//! values, one field per stage (three-body) or per shop (twelve-body).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ProblemCatalog, SHOPS, STAGES};
use crate::error::{Error, Result};
use crate::freestage::ReducedSpace;
use crate::simulator::{LineConfig, ShopState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formulation {
    #[serde(rename = "3body")]
    ThreeBody,
    #[serde(rename = "12body")]
    TwelveBody,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::ThreeBody => "3body",
            Formulation::TwelveBody => "12body",
        })
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3body" | "three-body" => Ok(Formulation::ThreeBody),
            "12body" | "twelve-body" => Ok(Formulation::TwelveBody),
            other => Err(Error::parse("formulation", format!("unknown {other:?}"))),
        }
    }
}

pub trait SearchSpace: Send + Sync {
    fn formulation(&self) -> Formulation;
    fn n_fields(&self) -> usize;
    fn field_size(&self, field: usize) -> u32;
    fn config(&self, point: &[u32]) -> LineConfig;
    /// Short human-readable description for trace metadata.
    fn describe(&self) -> String;

    fn total_size(&self) -> u64 {
        (0..self.n_fields())
            .map(|k| self.field_size(k) as u64)
            .product()
    }

    fn contains(&self, point: &[u32]) -> bool {
        point.len() == self.n_fields()
            && point
                .iter()
                .enumerate()
                .all(|(k, &v)| v < self.field_size(k))
    }

    /// Point at row-major position `flat` (last field fastest).
    fn point_at(&self, mut flat: u64) -> Vec<u32> {
        let n = self.n_fields();
        let mut point = vec![0u32; n];
        for k in (0..n).rev() {
            let size = self.field_size(k) as u64;
            point[k] = (flat % size) as u32;
            flat /= size;
        }
        point
    }

    /// Uniform over the space: every field drawn independently.
    fn random_point(&self, rng: &mut dyn rand::RngCore) -> Vec<u32> {
        (0..self.n_fields())
            .map(|k| rng.random_range(0..self.field_size(k)))
            .collect()
    }
}

impl SearchSpace for ReducedSpace {
    fn formulation(&self) -> Formulation {
        Formulation::ThreeBody
    }

    fn n_fields(&self) -> usize {
        STAGES
    }

    fn field_size(&self, field: usize) -> u32 {
        self.stage_sizes()[field] as u32
    }

    fn config(&self, point: &[u32]) -> LineConfig {
        ReducedSpace::config(self, point.try_into().expect("three-body point"))
    }

    fn describe(&self) -> String {
        format!("3body margin={} dev={}", self.margin(), self.dev_mode())
    }
}

/// Every shop free over all shifts and rates: value `s * n_rates + r`
/// (0-based) per shop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwelveBodySpace {
    n_shifts: u32,
    n_rates: u32,
}

impl TwelveBodySpace {
    pub fn new(catalog: &ProblemCatalog) -> Self {
        Self {
            n_shifts: catalog.n_shifts() as u32,
            n_rates: catalog.n_rates() as u32,
        }
    }

    pub fn point_of(&self, config: &LineConfig) -> Vec<u32> {
        config
            .shops
            .iter()
            .map(|s| (s.shift as u32 - 1) * self.n_rates + (s.rate as u32 - 1))
            .collect()
    }
}

impl SearchSpace for TwelveBodySpace {
    fn formulation(&self) -> Formulation {
        Formulation::TwelveBody
    }

    fn n_fields(&self) -> usize {
        SHOPS
    }

    fn field_size(&self, _: usize) -> u32 {
        self.n_shifts * self.n_rates
    }

    fn config(&self, point: &[u32]) -> LineConfig {
        let shops = std::array::from_fn(|j| {
            let v = point[j];
            ShopState::new((v / self.n_rates + 1) as u8, (v % self.n_rates + 1) as u8)
        });
        LineConfig::new(shops)
    }

    fn describe(&self) -> String {
        "12body".to_string()
    }
}

/// A uniformly drawn configuration of the space.
pub fn random_config<S: SearchSpace + ?Sized>(space: &S, rng: &mut dyn rand::RngCore) -> LineConfig {
    space.config(&space.random_point(rng))
}
