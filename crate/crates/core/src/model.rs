//! Shared domain types: raw datasets, the grouped (weighted-alluvia) table,
//! layout solutions, color assignments, and the permutation-space bookkeeping.

use std::collections::BTreeMap;

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// One raw observation: `m` category values plus a positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub values: Vec<String>,
    pub weight: f64,
}

/// Raw multivariate categorical data before grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Row>,
    pub layer_names: Vec<String>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let m = self.layer_names.len();
        if m < 2 {
            return Err(Error::TooFewLayers { found: m });
        }
        if self.rows.is_empty() {
            return Err(Error::EmptyInput("dataset has no rows".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.values.len() != m {
                return Err(Error::MismatchedSolution(format!(
                    "row {i} has {} values, expected {m}",
                    row.values.len()
                )));
            }
            if row.weight <= 0.0 || !row.weight.is_finite() {
                return Err(Error::InvalidWeight {
                    row: i,
                    value: row.weight.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// One unique combination of blocks across all layers, with its total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Combo {
    /// One block code per layer, dense 0-based within each layer.
    pub blocks: Vec<u32>,
    pub weight: f64,
}

/// The canonical weighted-alluvia form of the data: distinct block
/// combinations with positive weights, plus the per-layer code → label maps.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedTable {
    pub combos: Vec<Combo>,
    pub layer_names: Vec<String>,
    /// Per layer, indexed by block code.
    pub block_labels: Vec<Vec<String>>,
}

impl GroupedTable {
    /// Number of layers.
    pub fn m(&self) -> usize {
        self.layer_names.len()
    }

    /// Number of distinct combos (unique alluvia).
    pub fn n_bar(&self) -> usize {
        self.combos.len()
    }

    /// Block count of layer `i`.
    pub fn k(&self, i: usize) -> usize {
        self.block_labels[i].len()
    }

    /// Block counts of all layers.
    pub fn ks(&self) -> Vec<usize> {
        self.block_labels.iter().map(|b| b.len()).collect()
    }

    /// Total block count across layers.
    pub fn k_sum(&self) -> usize {
        self.block_labels.iter().map(|b| b.len()).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.combos.iter().map(|c| c.weight).sum()
    }

    /// Total weight passing through block `code` of layer `layer`.
    pub fn block_weight(&self, layer: usize, code: u32) -> f64 {
        self.combos
            .iter()
            .filter(|c| c.blocks[layer] == code)
            .map(|c| c.weight)
            .sum()
    }

    /// Build a table directly from coded combos, synthesizing block labels.
    /// Duplicate combos are summed; every layer must use codes `0..k`.
    pub fn from_codes(k: &[usize], combos: &[(Vec<u32>, f64)]) -> Result<GroupedTable> {
        let m = k.len();
        if m < 2 {
            return Err(Error::TooFewLayers { found: m });
        }
        if combos.is_empty() {
            return Err(Error::EmptyInput("no combos given".into()));
        }
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (row, (blocks, weight)) in combos.iter().enumerate() {
            if blocks.len() != m {
                return Err(Error::MismatchedSolution(format!(
                    "combo {row} has {} blocks, expected {m}",
                    blocks.len()
                )));
            }
            for (layer, &code) in blocks.iter().enumerate() {
                if code as usize >= k[layer] {
                    return Err(Error::MismatchedSolution(format!(
                        "combo {row}: code {code} out of range for layer {layer} (k={})",
                        k[layer]
                    )));
                }
            }
            if *weight <= 0.0 || !weight.is_finite() {
                return Err(Error::InvalidWeight {
                    row,
                    value: weight.to_string(),
                });
            }
            *merged.entry(blocks.clone()).or_insert(0.0) += weight;
        }
        let block_labels = k
            .iter()
            .map(|&ki| (0..ki).map(|c| format!("B{c}")).collect())
            .collect();
        Ok(GroupedTable {
            combos: merged
                .into_iter()
                .map(|(blocks, weight)| Combo { blocks, weight })
                .collect(),
            layer_names: (0..m).map(|i| format!("layer{i}")).collect(),
            block_labels,
        })
    }

    /// Check the structural invariants of the grouped form.
    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m < 2 {
            return Err(Error::TooFewLayers { found: m });
        }
        if self.block_labels.len() != m {
            return Err(Error::MismatchedSolution(
                "block_labels length differs from layer count".into(),
            ));
        }
        if self.combos.is_empty() {
            return Err(Error::EmptyInput("grouped table has no combos".into()));
        }
        let mut seen: BTreeMap<&[u32], usize> = BTreeMap::new();
        for (i, combo) in self.combos.iter().enumerate() {
            if combo.blocks.len() != m {
                return Err(Error::MismatchedSolution(format!(
                    "combo {i} has {} blocks, expected {m}",
                    combo.blocks.len()
                )));
            }
            if combo.weight <= 0.0 || !combo.weight.is_finite() {
                return Err(Error::InvalidWeight {
                    row: i,
                    value: combo.weight.to_string(),
                });
            }
            for (layer, &code) in combo.blocks.iter().enumerate() {
                if code as usize >= self.block_labels[layer].len() {
                    return Err(Error::MismatchedSolution(format!(
                        "combo {i}: code {code} out of range for layer {layer}"
                    )));
                }
            }
            if let Some(prev) = seen.insert(&combo.blocks, i) {
                return Err(Error::MismatchedSolution(format!(
                    "combos {prev} and {i} share the same block tuple"
                )));
            }
        }
        // every block code must occur in at least one combo
        for layer in 0..m {
            let mut used = vec![false; self.block_labels[layer].len()];
            for combo in &self.combos {
                used[combo.blocks[layer] as usize] = true;
            }
            if let Some(code) = used.iter().position(|u| !u) {
                return Err(Error::MismatchedSolution(format!(
                    "block {code} of layer {layer} appears in no combo"
                )));
            }
        }
        Ok(())
    }

    /// New table with layers rearranged so that position `p` holds what was
    /// layer `order[p]`. Used to bake a layer permutation into the table.
    pub fn permute_layers(&self, order: &[usize]) -> Result<GroupedTable> {
        let m = self.m();
        if !is_permutation(order, m) {
            return Err(Error::MismatchedSolution(format!(
                "layer order {order:?} is not a permutation of 0..{m}"
            )));
        }
        Ok(GroupedTable {
            combos: self
                .combos
                .iter()
                .map(|c| Combo {
                    blocks: order.iter().map(|&l| c.blocks[l]).collect(),
                    weight: c.weight,
                })
                .collect(),
            layer_names: order.iter().map(|&l| self.layer_names[l].clone()).collect(),
            block_labels: order.iter().map(|&l| self.block_labels[l].clone()).collect(),
        })
    }
}

/// A layer permutation plus per-layer block orderings and the objective they
/// achieve. `block_orders[i][rank]` is the block code displayed at `rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutSolution {
    pub layer_order: Vec<usize>,
    pub block_orders: Vec<Vec<u32>>,
    pub objective: f64,
}

impl LayoutSolution {
    /// Identity layout for `g`: layers and blocks in table order.
    pub fn identity(g: &GroupedTable) -> LayoutSolution {
        LayoutSolution {
            layer_order: (0..g.m()).collect(),
            block_orders: identity_orders(g),
            objective: 0.0,
        }
    }

    pub fn validate_for(&self, g: &GroupedTable) -> Result<()> {
        let m = g.m();
        if !is_permutation(&self.layer_order, m) {
            return Err(Error::MismatchedSolution(format!(
                "layer_order {:?} is not a permutation of 0..{m}",
                self.layer_order
            )));
        }
        if self.block_orders.len() != m {
            return Err(Error::MismatchedSolution(format!(
                "{} block orders for {m} layers",
                self.block_orders.len()
            )));
        }
        for (i, order) in self.block_orders.iter().enumerate() {
            let k = g.k(i);
            let mut seen = vec![false; k];
            if order.len() != k {
                return Err(Error::MismatchedSolution(format!(
                    "layer {i}: {} entries in block order, expected {k}",
                    order.len()
                )));
            }
            for &code in order {
                if code as usize >= k || seen[code as usize] {
                    return Err(Error::MismatchedSolution(format!(
                        "layer {i}: block order {order:?} is not a permutation"
                    )));
                }
                seen[code as usize] = true;
            }
        }
        Ok(())
    }
}

/// Per-layer block orders in code order (the table's input order).
pub fn identity_orders(g: &GroupedTable) -> Vec<Vec<u32>> {
    g.ks().iter().map(|&k| (0..k as u32).collect()).collect()
}

pub(crate) fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

/// A block color: blocks sharing `community` are rendered alike; `variant`
/// disambiguates blocks of one community inside a single layer so that the
/// per-layer labels stay distinct. Two labels match only if both fields agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColorLabel {
    pub community: u32,
    pub variant: u32,
}

/// Per-layer block → color maps plus the matched weight they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorAssignment {
    /// `colors[layer][block code]`.
    pub colors: Vec<Vec<ColorLabel>>,
    pub matched_weight: f64,
}

impl ColorAssignment {
    /// Labels must be pairwise distinct within every layer.
    pub fn validate_for(&self, g: &GroupedTable) -> Result<()> {
        if self.colors.len() != g.m() {
            return Err(Error::MismatchedSolution(format!(
                "{} color layers for {} table layers",
                self.colors.len(),
                g.m()
            )));
        }
        for (i, layer) in self.colors.iter().enumerate() {
            if layer.len() != g.k(i) {
                return Err(Error::MismatchedSolution(format!(
                    "layer {i}: {} colors for {} blocks",
                    layer.len(),
                    g.k(i)
                )));
            }
            let mut seen = std::collections::BTreeSet::new();
            for label in layer {
                if !seen.insert(*label) {
                    return Err(Error::MismatchedSolution(format!(
                        "layer {i}: duplicate color label {label:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Instance sizes and permutation-space counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    /// Original observation count.
    pub n: u64,
    /// Layer count.
    pub m: usize,
    /// Distinct combo count after collapsing.
    pub n_bar: usize,
    /// Blocks per layer.
    pub k: Vec<usize>,
    /// Σ kᵢ.
    pub k_sum: usize,
    /// Π kᵢ.
    pub k_prod: BigUint,
    /// Π kᵢ! — block permutations with layers fixed.
    pub s_p: BigUint,
    /// m!·Π kᵢ! — block and layer permutations.
    pub s_total: BigUint,
    /// Π (kᵢ!·Π_j n̄ᵢⱼ!) — element permutations that preserve block structure.
    pub s_valid: BigUint,
}

fn factorial(n: usize) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 2..=n {
        acc *= BigUint::from(i);
    }
    acc
}

/// Instance statistics per the counting formulas. `n` is the original row
/// count (for grouped inputs, the weight total when weights are counts).
pub fn compute_stats(g: &GroupedTable, n: u64) -> DatasetStats {
    let m = g.m();
    let k = g.ks();
    let k_sum = k.iter().sum();
    let mut k_prod = BigUint::from(1u32);
    let mut s_p = BigUint::from(1u32);
    for &ki in &k {
        k_prod *= BigUint::from(ki);
        s_p *= factorial(ki);
    }
    let s_total = factorial(m) * &s_p;
    // combos per (layer, block)
    let mut s_valid = BigUint::from(1u32);
    for (layer, &ki) in k.iter().enumerate() {
        let mut per_block = vec![0usize; ki];
        for combo in &g.combos {
            per_block[combo.blocks[layer] as usize] += 1;
        }
        s_valid *= factorial(ki);
        for count in per_block {
            s_valid *= factorial(count);
        }
    }
    DatasetStats {
        n,
        m,
        n_bar: g.n_bar(),
        k,
        k_sum,
        k_prod,
        s_p,
        s_total,
        s_valid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_5_4() -> GroupedTable {
        // 5 × 4 block two-layer instance with 8 alluvia and 27 observations.
        GroupedTable::from_codes(
            &[5, 4],
            &[
                (vec![0, 0], 4.0),
                (vec![0, 3], 2.0),
                (vec![1, 1], 5.0),
                (vec![2, 1], 3.0),
                (vec![2, 2], 4.0),
                (vec![3, 2], 3.0),
                (vec![4, 3], 5.0),
                (vec![4, 0], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn stats_two_layer_5_4() {
        let stats = compute_stats(&table_5_4(), 27);
        assert_eq!(stats.n, 27);
        assert_eq!(stats.m, 2);
        assert_eq!(stats.n_bar, 8);
        assert_eq!(stats.k, vec![5, 4]);
        assert_eq!(stats.k_sum, 9);
        assert_eq!(stats.k_prod, BigUint::from(20u32));
        assert_eq!(stats.s_p, BigUint::from(2880u32));
        assert_eq!(stats.s_total, BigUint::from(5760u32));
    }

    #[test]
    fn stats_single_block_layers() {
        let g = GroupedTable::from_codes(&[1, 1], &[(vec![0, 0], 3.0)]).unwrap();
        let stats = compute_stats(&g, 3);
        assert_eq!(stats.k_sum, 2);
        assert_eq!(stats.k_prod, BigUint::from(1u32));
        assert_eq!(stats.s_p, BigUint::from(1u32));
        assert_eq!(stats.s_total, BigUint::from(2u32));
    }

    #[test]
    fn stats_three_layers() {
        let g = GroupedTable::from_codes(
            &[3, 2, 2],
            &[
                (vec![0, 0, 0], 1.0),
                (vec![1, 1, 0], 1.0),
                (vec![2, 0, 1], 1.0),
                (vec![2, 1, 1], 1.0),
            ],
        )
        .unwrap();
        let stats = compute_stats(&g, 4);
        assert_eq!(stats.k_sum, 7);
        assert_eq!(stats.k_prod, BigUint::from(12u32));
        assert_eq!(stats.s_p, BigUint::from(24u32));
        assert_eq!(stats.s_total, BigUint::from(144u32));
    }

    #[test]
    fn s_valid_counts_within_block_orders() {
        // layer 0: block 0 holds 2 combos, block 1 holds 1; layer 1: 2 and 1.
        let g = GroupedTable::from_codes(
            &[2, 2],
            &[(vec![0, 0], 1.0), (vec![0, 1], 1.0), (vec![1, 0], 1.0)],
        )
        .unwrap();
        let stats = compute_stats(&g, 3);
        // per layer: k! * Π n̄_{i,j}! = 2!·(2!·1!) = 4, so 4·4 = 16
        assert_eq!(stats.s_valid, BigUint::from(16u32));
    }

    #[test]
    fn from_codes_merges_duplicates() {
        let g = GroupedTable::from_codes(
            &[2, 2],
            &[(vec![0, 1], 2.0), (vec![0, 1], 3.0), (vec![1, 0], 1.0)],
        )
        .unwrap();
        assert_eq!(g.n_bar(), 2);
        assert_eq!(g.total_weight(), 6.0);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn validate_rejects_bad_tables() {
        assert!(GroupedTable::from_codes(&[2], &[(vec![0], 1.0)]).is_err());
        assert!(GroupedTable::from_codes(&[2, 2], &[]).is_err());
        assert!(GroupedTable::from_codes(&[2, 2], &[(vec![0, 2], 1.0)]).is_err());
        assert!(GroupedTable::from_codes(&[2, 2], &[(vec![0, 0], 0.0)]).is_err());
        assert!(GroupedTable::from_codes(&[2, 2], &[(vec![0, 0], -1.0)]).is_err());

        // unused block code
        let g = GroupedTable {
            combos: vec![Combo {
                blocks: vec![0, 0],
                weight: 1.0,
            }],
            layer_names: vec!["a".into(), "b".into()],
            block_labels: vec![vec!["x".into(), "y".into()], vec!["u".into()]],
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn permute_layers_reorders_codes() {
        let g = GroupedTable::from_codes(&[2, 3], &[(vec![1, 2], 1.0), (vec![0, 0], 1.0)]).unwrap();
        let p = g.permute_layers(&[1, 0]).unwrap();
        assert_eq!(p.ks(), vec![3, 2]);
        assert_eq!(p.combos[0].blocks, vec![0, 0]);
        assert_eq!(p.combos[1].blocks, vec![2, 1]);
        assert!(g.permute_layers(&[0, 0]).is_err());
    }

    #[test]
    fn n_bar_bounds_hold() {
        let g = table_5_4();
        let stats = compute_stats(&g, 27);
        let max_k = *stats.k.iter().max().unwrap();
        assert!(stats.n_bar >= max_k);
        assert!(BigUint::from(stats.n_bar) <= stats.k_prod.clone().min(BigUint::from(stats.n)));
    }

    #[test]
    fn solution_validation() {
        let g = table_5_4();
        let sol = LayoutSolution::identity(&g);
        assert!(sol.validate_for(&g).is_ok());

        let mut bad = sol.clone();
        bad.block_orders[0] = vec![0, 1, 2, 3, 3];
        assert!(bad.validate_for(&g).is_err());

        let mut bad = sol;
        bad.layer_order = vec![0, 0];
        assert!(bad.validate_for(&g).is_err());
    }
}
