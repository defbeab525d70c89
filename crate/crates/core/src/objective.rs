//! The weighted crossing objective: per-pair counting with a Fenwick tree,
//! crossing-edge enumeration, and the weighted Adjusted Rand Index.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fenwick::Fenwick;
use crate::model::{GroupedTable, LayoutSolution};

/// One aggregated edge between adjacent layers: display ranks on both sides
/// plus the total weight flowing between those two blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEdge {
    pub y1: u32,
    pub y2: u32,
    pub weight: f64,
}

/// Aggregated edges of one adjacent layer pair. Two edges cross when their
/// ranks strictly invert: `sign(y1_e - y1_f) * sign(y2_e - y2_f) == -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPairView {
    pub edges: Vec<PairEdge>,
}

impl LayerPairView {
    /// Aggregate duplicate `(y1, y2)` pairs; output sorted by `(y1, y2)`.
    pub fn from_edges(raw: impl IntoIterator<Item = (u32, u32, f64)>) -> LayerPairView {
        let mut merged: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (y1, y2, w) in raw {
            *merged.entry((y1, y2)).or_insert(0.0) += w;
        }
        LayerPairView {
            edges: merged
                .into_iter()
                .map(|((y1, y2), weight)| PairEdge { y1, y2, weight })
                .collect(),
        }
    }

    /// View of layers `(a, b)` of `g` under the given block orders.
    pub fn from_table(
        g: &GroupedTable,
        layer_a: usize,
        layer_b: usize,
        order_a: &[u32],
        order_b: &[u32],
    ) -> LayerPairView {
        let rank_a = rank_table(order_a);
        let rank_b = rank_table(order_b);
        LayerPairView::from_edges(g.combos.iter().map(|c| {
            (
                rank_a[c.blocks[layer_a] as usize],
                rank_b[c.blocks[layer_b] as usize],
                c.weight,
            )
        }))
    }
}

/// `rank[code] = display position` for a block order.
pub(crate) fn rank_table(order: &[u32]) -> Vec<u32> {
    let mut rank = vec![0u32; order.len()];
    for (pos, &code) in order.iter().enumerate() {
        rank[code as usize] = pos as u32;
    }
    rank
}

/// Weighted crossing count of one layer pair: Σ over strictly inverted edge
/// pairs of the product of their weights. O(E log E).
pub fn pair_objective(view: &LayerPairView) -> f64 {
    let mut edges = view.edges.clone();
    edges.sort_by_key(|e| (e.y1, e.y2));

    // dense-rank y2
    let mut y2s: Vec<u32> = edges.iter().map(|e| e.y2).collect();
    y2s.sort_unstable();
    y2s.dedup();
    let rank_of = |y2: u32| y2s.binary_search(&y2).unwrap();

    let mut fen = Fenwick::new(y2s.len());
    let mut objective = 0.0;
    let mut i = 0;
    while i < edges.len() {
        let mut j = i;
        while j < edges.len() && edges[j].y1 == edges[i].y1 {
            j += 1;
        }
        // query the whole same-y1 batch before inserting any of it, so edges
        // sharing a source block never count against each other
        for e in &edges[i..j] {
            objective += e.weight * fen.above(rank_of(e.y2));
        }
        for e in &edges[i..j] {
            fen.add(rank_of(e.y2), e.weight);
        }
        i = j;
    }
    objective
}

/// Indices of all strictly inverted edge pairs, by brute-force enumeration.
pub fn crossing_edges(view: &LayerPairView) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..view.edges.len() {
        for j in (i + 1)..view.edges.len() {
            let e = &view.edges[i];
            let f = &view.edges[j];
            let s1 = (e.y1 as i64 - f.y1 as i64).signum();
            let s2 = (e.y2 as i64 - f.y2 as i64).signum();
            if s1 * s2 == -1 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Total objective of a layout: the pair objective summed over the `m - 1`
/// adjacent layer pairs in display order.
pub fn total_objective(g: &GroupedTable, sol: &LayoutSolution) -> Result<f64> {
    sol.validate_for(g)?;
    let mut total = 0.0;
    for r in 0..g.m() - 1 {
        let a = sol.layer_order[r];
        let b = sol.layer_order[r + 1];
        let view =
            LayerPairView::from_table(g, a, b, &sol.block_orders[a], &sol.block_orders[b]);
        total += pair_objective(&view);
    }
    Ok(total)
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Weighted Adjusted Rand Index between two layers' partitions, treating
/// weights as multiplicities in the pair-count formula.
pub fn compute_ari(g: &GroupedTable, layer_a: usize, layer_b: usize) -> Result<f64> {
    if layer_a == layer_b || layer_a >= g.m() || layer_b >= g.m() {
        return Err(Error::InvalidConfig(format!(
            "ARI needs two distinct layers, got {layer_a} and {layer_b}"
        )));
    }
    let ka = g.k(layer_a);
    let kb = g.k(layer_b);
    let mut contingency = vec![0.0f64; ka * kb];
    for combo in &g.combos {
        contingency[combo.blocks[layer_a] as usize * kb + combo.blocks[layer_b] as usize] +=
            combo.weight;
    }
    let mut row_sums = vec![0.0f64; ka];
    let mut col_sums = vec![0.0f64; kb];
    for i in 0..ka {
        for j in 0..kb {
            row_sums[i] += contingency[i * kb + j];
            col_sums[j] += contingency[i * kb + j];
        }
    }
    let total: f64 = row_sums.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyInput("zero total weight".into()));
    }
    let sum_cells: f64 = contingency.iter().map(|&x| comb2(x)).sum();
    let sum_rows: f64 = row_sums.iter().map(|&x| comb2(x)).sum();
    let sum_cols: f64 = col_sums.iter().map(|&x| comb2(x)).sum();
    let expected = sum_rows * sum_cols / comb2(total);
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max_index - expected))
}
