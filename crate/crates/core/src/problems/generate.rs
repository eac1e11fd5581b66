//! Seeded generators for small benchmark instances.
//!
//! The auction generators produce simple structured bid sets that share the
//! flavour of the named families; they do not replicate any external tool.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rcpsp::{serial_schedule, RcpspError, RcpspInstance};
use super::wdp::{Bid, WdpInstance};

/// Random RCPSP with `n` real activities, `resources` renewable resources
/// and a horizon tightened to a serial-schedule makespan.
pub fn generate_rcpsp(n: usize, resources: usize, seed: u64) -> Result<RcpspInstance, RcpspError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let durations: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
    let capacities: Vec<u32> = (0..resources).map(|_| rng.gen_range(3..=6)).collect();
    let usage: Vec<Vec<u32>> = (0..n)
        .map(|_| {
            capacities
                .iter()
                .map(|&c| {
                    if rng.gen_bool(0.6) {
                        rng.gen_range(1..=c)
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    let mut precedence = Vec::new();
    for j in 2..=n as u32 {
        for h in 1..j {
            if rng.gen_bool(0.25) {
                precedence.push((h, j));
            }
        }
    }
    let mut inst = RcpspInstance::with_dummies(&durations, &usage, &precedence, &capacities);
    let completion = serial_schedule(&inst)?;
    inst.horizon = completion.iter().copied().max().unwrap_or(0);
    Ok(inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Paths,
    Regions,
    Matching,
    Scheduling,
}

impl Distribution {
    pub const ALL: [Distribution; 4] = [
        Distribution::Paths,
        Distribution::Regions,
        Distribution::Matching,
        Distribution::Scheduling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::Paths => "paths",
            Distribution::Regions => "regions",
            Distribution::Matching => "matching",
            Distribution::Scheduling => "scheduling",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Distribution::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown distribution `{s}`"))
    }
}

/// Random auction with `bids` bids over `goods` goods.
///
/// * paths: goods are nodes on a line, bundles are short contiguous runs;
/// * regions: goods sit on a grid, bundles are a cell plus neighbours;
/// * matching: goods are split into two sides, bundles take one from each;
/// * scheduling: goods are time slots, bundles are intervals ending by a
///   deadline, priced by length.
pub fn generate_wdp(dist: Distribution, goods: usize, bids: usize, seed: u64) -> WdpInstance {
    let goods = goods.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..goods).map(|_| rng.gen_range(1..=10) as f64).collect();
    let mut out = Vec::with_capacity(bids);
    for id in 0..bids as u32 {
        let mut bundle: Vec<usize> = match dist {
            Distribution::Paths => {
                let len = rng.gen_range(1..=3.min(goods));
                let start = rng.gen_range(0..=goods - len);
                (start..start + len).collect()
            }
            Distribution::Regions => {
                let width = (goods as f64).sqrt().ceil() as usize;
                let cell = rng.gen_range(0..goods);
                let mut b = vec![cell];
                let neighbours = [
                    cell.checked_sub(1).filter(|_| cell % width != 0),
                    Some(cell + 1).filter(|c| c % width != 0 && *c < goods),
                    cell.checked_sub(width),
                    Some(cell + width).filter(|c| *c < goods),
                ];
                for n in neighbours.into_iter().flatten() {
                    if rng.gen_bool(0.4) {
                        b.push(n);
                    }
                }
                b
            }
            Distribution::Matching => {
                let half = goods / 2;
                let left = rng.gen_range(0..half);
                let right = rng.gen_range(half..goods);
                vec![left, right]
            }
            Distribution::Scheduling => {
                let deadline = rng.gen_range(1..=goods);
                let len = rng.gen_range(1..=deadline.min(3));
                let start = rng.gen_range(0..=deadline - len);
                (start..start + len).collect()
            }
        };
        bundle.sort_unstable();
        bundle.dedup();
        let base: f64 = bundle.iter().map(|&g| values[g]).sum();
        let noise = rng.gen_range(0..=4) as f64;
        out.push(Bid {
            id,
            goods: bundle,
            price: base + noise,
        });
    }
    WdpInstance { goods, bids: out }
}
