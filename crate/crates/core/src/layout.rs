//! The block-sorting pipeline: build the block distance matrix, compute a
//! cycle (NeighborNet or TSP), scan every cycle starting point, optionally
//! reorder the layers, and keep the layout with the smallest objective.
//! Also houses the two-layer greedy baselines and the random/input-order
//! fallbacks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layer_order::{build_layer_matrix, tsp_order, tsp_tour, LayerMetric};
use crate::model::{identity_orders, GroupedTable, LayoutSolution};
use crate::neighbornet::{build_distance_matrix, neighbornet_cycle, Cycle};
use crate::objective::{pair_objective, total_objective, LayerPairView, PairEdge};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortMethod {
    /// NeighborNet cycle over the block distance matrix, all starts scanned.
    Neighbornet,
    /// Same scan, but the cycle comes from the TSP heuristic.
    TspCycle,
    /// Two layers only: left layer fixed, right layer aligned to it.
    GreedyWolf,
    /// Two layers only: alternate greedy passes until stable.
    GreedyWblf,
    /// Seeded shuffle of every layer's blocks.
    Random,
    /// Keep the table's input order.
    InputOrder,
}

impl SortMethod {
    pub fn parse(s: &str) -> Result<SortMethod> {
        match s {
            "neighbornet" => Ok(SortMethod::Neighbornet),
            "tsp" => Ok(SortMethod::TspCycle),
            "greedy_wolf" => Ok(SortMethod::GreedyWolf),
            "greedy_wblf" => Ok(SortMethod::GreedyWblf),
            "random" => Ok(SortMethod::Random),
            "none" => Ok(SortMethod::InputOrder),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SortMethod::Neighbornet => "neighbornet",
            SortMethod::TspCycle => "tsp",
            SortMethod::GreedyWolf => "greedy_wolf",
            SortMethod::GreedyWblf => "greedy_wblf",
            SortMethod::Random => "random",
            SortMethod::InputOrder => "none",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SortConfig {
    pub method: SortMethod,
    /// Reorder layers with the TSP heuristic.
    pub optimize_layers: bool,
    /// Recompute the layer order at every cycle start instead of caching the
    /// first one. The optimum rarely changes with the start, so this is off
    /// by default.
    pub layer_order_every_start: bool,
    pub c_scale: f64,
    /// Required by [`SortMethod::Random`].
    pub seed: Option<u64>,
}

impl Default for SortConfig {
    fn default() -> Self {
        SortConfig {
            method: SortMethod::Neighbornet,
            optimize_layers: false,
            layer_order_every_start: false,
            c_scale: 1.0,
            seed: None,
        }
    }
}

/// Rotate the cycle to begin at position `start`, then extract each layer's
/// blocks as a subsequence of the rotated cycle.
pub fn split_cycle(cycle: &Cycle, start: usize, g: &GroupedTable) -> Result<Vec<Vec<u32>>> {
    let k_sum = g.k_sum();
    if cycle.order.len() != k_sum {
        return Err(Error::MismatchedSolution(format!(
            "cycle covers {} nodes, table has {k_sum} blocks",
            cycle.order.len()
        )));
    }
    if start >= k_sum {
        return Err(Error::InvalidConfig(format!(
            "start {start} out of range for cycle of length {k_sum}"
        )));
    }
    let ks = g.ks();
    let mut offsets = Vec::with_capacity(g.m());
    let mut acc = 0usize;
    for &k in &ks {
        offsets.push(acc);
        acc += k;
    }
    let mut orders: Vec<Vec<u32>> = ks.iter().map(|&k| Vec::with_capacity(k)).collect();
    for i in 0..k_sum {
        let node = cycle.order[(start + i) % k_sum];
        if node >= k_sum {
            return Err(Error::MismatchedSolution(format!(
                "cycle node {node} out of range"
            )));
        }
        let layer = match offsets.binary_search(&node) {
            Ok(l) => l,
            Err(l) => l - 1,
        };
        orders[layer].push((node - offsets[layer]) as u32);
    }
    for (layer, order) in orders.iter().enumerate() {
        if order.len() != ks[layer] {
            return Err(Error::MismatchedSolution(format!(
                "cycle does not cover every block of layer {layer}"
            )));
        }
    }
    Ok(orders)
}

/// Solve the block (and optionally layer) ordering problem for `g`.
pub fn solve(g: &GroupedTable, cfg: &SortConfig) -> Result<LayoutSolution> {
    g.validate()?;
    match cfg.method {
        SortMethod::Neighbornet | SortMethod::TspCycle => solve_cycle_scan(g, cfg),
        SortMethod::GreedyWolf => {
            require_bipartite(g, cfg.method)?;
            let sigma0: Vec<u32> = (0..g.k(0) as u32).collect();
            let sigma1 = wolf_pass(g, 0, &sigma0, 1);
            finish(g, cfg, vec![sigma0, sigma1])
        }
        SortMethod::GreedyWblf => {
            require_bipartite(g, cfg.method)?;
            let mut orders = identity_orders(g);
            for _ in 0..20 {
                let new1 = wolf_pass(g, 0, &orders[0], 1);
                let changed1 = new1 != orders[1];
                orders[1] = new1;
                let new0 = wolf_pass(g, 1, &orders[1], 0);
                let changed0 = new0 != orders[0];
                orders[0] = new0;
                if !changed0 && !changed1 {
                    break;
                }
            }
            finish(g, cfg, orders)
        }
        SortMethod::Random => {
            let seed = cfg
                .seed
                .ok_or_else(|| Error::InvalidConfig("method=random requires a seed".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut orders = identity_orders(g);
            for order in &mut orders {
                order.shuffle(&mut rng);
            }
            finish(g, cfg, orders)
        }
        SortMethod::InputOrder => finish(g, cfg, identity_orders(g)),
    }
}

fn require_bipartite(g: &GroupedTable, method: SortMethod) -> Result<()> {
    if g.m() != 2 {
        return Err(Error::InvalidConfig(format!(
            "method {} requires exactly 2 layers, table has {}",
            method.name(),
            g.m()
        )));
    }
    Ok(())
}

/// Wrap block orders into a solution, applying the optional layer ordering.
fn finish(g: &GroupedTable, cfg: &SortConfig, orders: Vec<Vec<u32>>) -> Result<LayoutSolution> {
    let layer_order = if cfg.optimize_layers {
        let ldm = build_layer_matrix(g, &orders, LayerMetric::Objective, cfg.c_scale)?;
        tsp_order(&ldm)
    } else {
        (0..g.m()).collect()
    };
    let mut sol = LayoutSolution {
        layer_order,
        block_orders: orders,
        objective: 0.0,
    };
    sol.objective = total_objective(g, &sol)?;
    Ok(sol)
}

/// Aggregated `(code_lo, code_hi, weight)` edges of one layer pair.
type AggregatedEdges = Vec<(u32, u32, f64)>;

/// Lazily built block-level edge lists per unordered layer pair. The
/// aggregation is independent of block orders, so the start-point scan can
/// reuse it instead of re-collapsing all combos at every start.
struct PairAggregates {
    cache: BTreeMap<(usize, usize), AggregatedEdges>,
}

impl PairAggregates {
    fn new() -> Self {
        PairAggregates {
            cache: BTreeMap::new(),
        }
    }

    /// Aggregated `(code_lo, code_hi, weight)` edges between layers
    /// `lo < hi`, grouped exactly like a per-combo pass would group them.
    fn get(&mut self, g: &GroupedTable, lo: usize, hi: usize) -> &[(u32, u32, f64)] {
        self.cache.entry((lo, hi)).or_insert_with(|| {
            let mut merged: BTreeMap<(u32, u32), f64> = BTreeMap::new();
            for combo in &g.combos {
                *merged
                    .entry((combo.blocks[lo], combo.blocks[hi]))
                    .or_insert(0.0) += combo.weight;
            }
            merged
                .into_iter()
                .map(|((a, b), w)| (a, b, w))
                .collect()
        })
    }

    /// Total objective of `(mu, ranks)`; identical to [`total_objective`] on
    /// the corresponding solution, without touching the combos again.
    fn objective(&mut self, g: &GroupedTable, mu: &[usize], ranks: &[Vec<u32>]) -> f64 {
        let mut total = 0.0;
        for r in 0..mu.len() - 1 {
            let a = mu[r];
            let b = mu[r + 1];
            let (lo, hi) = (a.min(b), a.max(b));
            let edges = self
                .get(g, lo, hi)
                .iter()
                .map(|&(c_lo, c_hi, weight)| {
                    let (ca, cb) = if a == lo { (c_lo, c_hi) } else { (c_hi, c_lo) };
                    PairEdge {
                        y1: ranks[a][ca as usize],
                        y2: ranks[b][cb as usize],
                        weight,
                    }
                })
                .collect();
            total += pair_objective(&LayerPairView { edges });
        }
        total
    }
}

fn rank_tables(orders: &[Vec<u32>]) -> Vec<Vec<u32>> {
    orders
        .iter()
        .map(|order| {
            let mut rank = vec![0u32; order.len()];
            for (pos, &code) in order.iter().enumerate() {
                rank[code as usize] = pos as u32;
            }
            rank
        })
        .collect()
}

fn solve_cycle_scan(g: &GroupedTable, cfg: &SortConfig) -> Result<LayoutSolution> {
    let dm = build_distance_matrix(g, cfg.c_scale, None)?;
    let cycle = match cfg.method {
        SortMethod::Neighbornet => neighbornet_cycle(&dm)?,
        _ => Cycle {
            order: tsp_tour(&dm.d),
        },
    };
    let k_sum = g.k_sum();
    let identity_mu: Vec<usize> = (0..g.m()).collect();
    let mut aggregates = PairAggregates::new();
    let mut cached_mu: Option<Vec<usize>> = None;
    let mut best: Option<(f64, Vec<usize>, Vec<Vec<u32>>)> = None;
    for start in 0..k_sum {
        let orders = split_cycle(&cycle, start, g)?;
        let mu = if cfg.optimize_layers {
            if cached_mu.is_none() || cfg.layer_order_every_start {
                let ldm = build_layer_matrix(g, &orders, LayerMetric::Objective, cfg.c_scale)?;
                let mu = tsp_order(&ldm);
                if cached_mu.is_none() {
                    cached_mu = Some(mu.clone());
                }
                mu
            } else {
                cached_mu.clone().unwrap()
            }
        } else {
            identity_mu.clone()
        };
        let objective = aggregates.objective(g, &mu, &rank_tables(&orders));
        // strict comparison keeps the smallest start index on ties
        if best.as_ref().is_none_or(|(b, _, _)| objective < *b) {
            best = Some((objective, mu, orders));
        }
    }
    let (scanned_min, mu, orders) =
        best.ok_or_else(|| Error::EmptyInput("no cycle starts scanned".into()))?;
    let mut sol = LayoutSolution {
        layer_order: mu,
        block_orders: orders,
        objective: 0.0,
    };
    sol.objective = total_objective(g, &sol)?;
    debug_assert_eq!(sol.objective, scanned_min);
    Ok(sol)
}

/// Order the free layer's blocks by the display rank of the fixed-layer
/// block they share the thickest edge with; blocks tied on the same anchor
/// order by descending shared weight, then block code.
fn wolf_pass(g: &GroupedTable, fixed: usize, fixed_order: &[u32], free: usize) -> Vec<u32> {
    let k_fixed = g.k(fixed);
    let k_free = g.k(free);
    let mut fixed_rank = vec![0u32; k_fixed];
    for (pos, &code) in fixed_order.iter().enumerate() {
        fixed_rank[code as usize] = pos as u32;
    }
    // shared weight between each free block and each fixed block
    let mut shared = vec![0.0f64; k_free * k_fixed];
    for combo in &g.combos {
        shared[combo.blocks[free] as usize * k_fixed + combo.blocks[fixed] as usize] +=
            combo.weight;
    }
    let mut keyed: Vec<(u32, f64, u32)> = (0..k_free as u32)
        .map(|b| {
            let row = &shared[b as usize * k_fixed..(b as usize + 1) * k_fixed];
            let mut anchor = 0u32;
            let mut weight = f64::NEG_INFINITY;
            // scan anchors in display order; strict > keeps the earliest rank
            for pos in 0..k_fixed as u32 {
                let code = fixed_order[pos as usize];
                let w = row[code as usize];
                if w > weight {
                    weight = w;
                    anchor = pos;
                }
            }
            (anchor, weight, b)
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
    });
    keyed.into_iter().map(|(_, _, b)| b).collect()
}
