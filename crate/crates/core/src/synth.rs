//! Seeded synthetic dataset generators for tests and benchmarks.

use std::collections::BTreeMap;

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Combo, GroupedTable};

/// Shape of an affiliation-drift dataset: entities move between groups over
/// a sequence of layers, mostly staying put, sometimes hopping to a
/// ring-adjacent group or falling into an absorbing sink.
#[derive(Debug, Clone)]
pub struct DriftConfig {
    pub layers: usize,
    pub groups: usize,
    pub entities: usize,
    /// Probability of keeping the current group between layers.
    pub persistence: f64,
    pub seed: u64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            layers: 9,
            groups: 13,
            entities: 450,
            persistence: 0.82,
            seed: 1,
        }
    }
}

/// Unit-weight trajectories collapsed into a grouped table. Group labels are
/// shuffled relative to the ring structure, so alphabetical order carries no
/// information about which groups exchange entities.
pub fn affiliation_drift(cfg: &DriftConfig) -> GroupedTable {
    assert!(cfg.layers >= 2 && cfg.groups >= 3 && cfg.entities >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = cfg.groups;

    // ring position → display label, shuffled
    let mut label_of: Vec<usize> = (0..g).collect();
    use rand::seq::SliceRandom;
    label_of.shuffle(&mut rng);
    let labels: Vec<String> = label_of.iter().map(|&i| format!("G{i:02}")).collect();
    let sink = g - 1; // ring position of the absorbing group

    let mut trajectories: Vec<Vec<usize>> = Vec::with_capacity(cfg.entities);
    for _ in 0..cfg.entities {
        let mut pos = rng.random_range(0..g);
        let mut path = Vec::with_capacity(cfg.layers);
        path.push(pos);
        for _ in 1..cfg.layers {
            if pos != sink && rng.random_range(0.0..1.0) >= cfg.persistence {
                let roll = rng.random_range(0.0..1.0);
                pos = if roll < 0.40 {
                    (pos + 1) % g
                } else if roll < 0.70 {
                    (pos + g - 1) % g
                } else if roll < 0.85 {
                    sink
                } else {
                    rng.random_range(0..g)
                };
            }
            path.push(pos);
        }
        trajectories.push(path);
    }

    // per layer: occupied labels sorted alphabetically → dense codes
    let mut block_labels: Vec<Vec<String>> = Vec::with_capacity(cfg.layers);
    let mut code_maps: Vec<BTreeMap<&str, u32>> = Vec::with_capacity(cfg.layers);
    for layer in 0..cfg.layers {
        let mut occupied: Vec<&str> = trajectories
            .iter()
            .map(|t| labels[t[layer]].as_str())
            .collect();
        occupied.sort_unstable();
        occupied.dedup();
        code_maps.push(
            occupied
                .iter()
                .enumerate()
                .map(|(code, &l)| (l, code as u32))
                .collect(),
        );
        block_labels.push(occupied.into_iter().map(String::from).collect());
    }

    let mut counts: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for t in &trajectories {
        let blocks: Vec<u32> = t
            .iter()
            .enumerate()
            .map(|(layer, &pos)| code_maps[layer][labels[pos].as_str()])
            .collect();
        *counts.entry(blocks).or_insert(0.0) += 1.0;
    }

    let table = GroupedTable {
        combos: counts
            .into_iter()
            .map(|(blocks, weight)| Combo { blocks, weight })
            .collect(),
        layer_names: (0..cfg.layers).map(|i| format!("t{i}")).collect(),
        block_labels,
    };
    debug_assert!(table.validate().is_ok());
    table
}

/// Random grouped table with the given per-layer block counts: one seeding
/// combo per block column guarantees coverage, then `extra_combos` random
/// combos with integer weights in `1..=max_weight` are merged in.
pub fn random_table(ks: &[usize], extra_combos: usize, max_weight: u32, seed: u64) -> GroupedTable {
    assert!(ks.len() >= 2 && ks.iter().all(|&k| k >= 1) && max_weight >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_k = *ks.iter().max().unwrap();
    let mut combos: Vec<(Vec<u32>, f64)> = Vec::new();
    for j in 0..max_k {
        let blocks: Vec<u32> = ks.iter().map(|&k| (j % k) as u32).collect();
        combos.push((blocks, rng.random_range(1..=max_weight) as f64));
    }
    for _ in 0..extra_combos {
        let blocks: Vec<u32> = ks
            .iter()
            .map(|&k| rng.random_range(0..k) as u32)
            .collect();
        combos.push((blocks, rng.random_range(1..=max_weight) as f64));
    }
    GroupedTable::from_codes(ks, &combos).expect("generated table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_has_the_requested_shape() {
        let cfg = DriftConfig::default();
        let g = affiliation_drift(&cfg);
        assert_eq!(g.m(), 9);
        assert!(g.k_sum() >= 100 && g.k_sum() <= 9 * 13, "{}", g.k_sum());
        assert_eq!(g.total_weight(), cfg.entities as f64);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn drift_is_seed_stable() {
        let cfg = DriftConfig::default();
        assert_eq!(affiliation_drift(&cfg), affiliation_drift(&cfg));
        let other = DriftConfig {
            seed: 2,
            ..DriftConfig::default()
        };
        assert_ne!(affiliation_drift(&cfg), affiliation_drift(&other));
    }

    #[test]
    fn random_table_covers_every_block() {
        for seed in 0..20 {
            let g = random_table(&[2, 4, 3], 8, 9, seed);
            assert!(g.validate().is_ok());
            assert!(g.n_bar() <= 4 + 8);
        }
    }
}
