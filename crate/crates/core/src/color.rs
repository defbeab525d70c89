//! Block coloring: overlap scores between blocks of different layers, a
//! clustering scheme (deterministic Louvain over the overlap graph) and a
//! reference-layer scheme. Both maximize the weight of flow that keeps its
//! color between adjacent layers.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{ColorAssignment, ColorLabel, GroupedTable};

/// Overlap between one parent block and one child block: the raw
/// intersection weight and the score normalized by the child block's weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEntry {
    pub parent_layer: usize,
    pub child_layer: usize,
    pub parent_block: u32,
    pub child_block: u32,
    pub weight: f64,
    /// `weight / child block weight`, in (0, 1].
    pub score: f64,
}

/// Sparse pairwise block overlaps for every ordered layer pair.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    /// Sorted by `(parent_layer, child_layer, child_block, parent_block)`.
    pub entries: Vec<OverlapEntry>,
    /// Total weight per block, `block_weights[layer][code]`.
    pub block_weights: Vec<Vec<f64>>,
    ranges: BTreeMap<(usize, usize), (usize, usize)>,
}

impl OverlapMatrix {
    pub fn m(&self) -> usize {
        self.block_weights.len()
    }

    pub fn k(&self, layer: usize) -> usize {
        self.block_weights[layer].len()
    }

    pub fn k_sum(&self) -> usize {
        self.block_weights.iter().map(|b| b.len()).sum()
    }

    /// Entries with the given parent and child layers.
    pub fn between(&self, parent_layer: usize, child_layer: usize) -> &[OverlapEntry] {
        match self.ranges.get(&(parent_layer, child_layer)) {
            Some(&(lo, hi)) => &self.entries[lo..hi],
            None => &[],
        }
    }
}

/// Intersection weights for every ordered layer pair and co-occurring block
/// pair, normalized by the child block's total weight.
pub fn overlap_matrix(g: &GroupedTable) -> OverlapMatrix {
    let m = g.m();
    let block_weights: Vec<Vec<f64>> = (0..m)
        .map(|layer| {
            let mut w = vec![0.0; g.k(layer)];
            for combo in &g.combos {
                w[combo.blocks[layer] as usize] += combo.weight;
            }
            w
        })
        .collect();

    let mut raw: BTreeMap<(usize, usize, u32, u32), f64> = BTreeMap::new();
    for combo in &g.combos {
        for parent in 0..m {
            for child in 0..m {
                if parent == child {
                    continue;
                }
                *raw.entry((parent, child, combo.blocks[child], combo.blocks[parent]))
                    .or_insert(0.0) += combo.weight;
            }
        }
    }

    let mut entries = Vec::with_capacity(raw.len());
    let mut ranges = BTreeMap::new();
    for ((parent_layer, child_layer, child_block, parent_block), weight) in raw {
        let entry = OverlapEntry {
            parent_layer,
            child_layer,
            parent_block,
            child_block,
            weight,
            score: weight / block_weights[child_layer][child_block as usize],
        };
        ranges
            .entry((parent_layer, child_layer))
            .and_modify(|(_, hi): &mut (usize, usize)| *hi = entries.len() + 1)
            .or_insert((entries.len(), entries.len() + 1));
        entries.push(entry);
    }
    OverlapMatrix {
        entries,
        block_weights,
        ranges,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorMode {
    #[default]
    Cluster,
    Reference,
}

/// Which layer anchors the reference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceSpec {
    #[default]
    Leftmost,
    Rightmost,
    /// Sweep left to right, each layer colored from its left neighbor.
    RollingLeft,
    /// Sweep right to left, each layer colored from its right neighbor.
    RollingRight,
    Layer(usize),
}

#[derive(Debug, Clone)]
pub struct ColorScheme {
    pub mode: ColorMode,
    pub cluster_resolution: f64,
    pub reference: ReferenceSpec,
    /// Minimum parent score required to inherit a color; below it the block
    /// gets a fresh color.
    pub min_parent_score: f64,
}

impl Default for ColorScheme {
    fn default() -> Self {
        ColorScheme {
            mode: ColorMode::Cluster,
            cluster_resolution: 1.0,
            reference: ReferenceSpec::Leftmost,
            min_parent_score: 0.0,
        }
    }
}

impl ColorScheme {
    fn validate(&self) -> Result<()> {
        if self.cluster_resolution <= 0.0 || !self.cluster_resolution.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "cluster_resolution must be positive, got {}",
                self.cluster_resolution
            )));
        }
        if !(0.0..=1.0).contains(&self.min_parent_score) {
            return Err(Error::InvalidConfig(format!(
                "min_parent_score must be in [0, 1], got {}",
                self.min_parent_score
            )));
        }
        Ok(())
    }
}

/// Matched weight: flow between adjacent layers whose two endpoint blocks
/// carry the same color label.
pub fn matched_weight(om: &OverlapMatrix, colors: &[Vec<ColorLabel>]) -> f64 {
    let mut total = 0.0;
    for i in 0..om.m().saturating_sub(1) {
        for e in om.between(i, i + 1) {
            if colors[i][e.parent_block as usize] == colors[i + 1][e.child_block as usize] {
                total += e.weight;
            }
        }
    }
    total
}

fn global_ids(om: &OverlapMatrix) -> (Vec<usize>, usize) {
    let mut offsets = vec![0usize; om.m()];
    for i in 1..om.m() {
        offsets[i] = offsets[i - 1] + om.k(i - 1);
    }
    let k_sum = om.k_sum();
    (offsets, k_sum)
}

/// Cluster scheme: blocks whose overlap graph communities coincide share a
/// color. Communities come from a deterministic greedy modularity pass.
pub fn assign_colors_cluster(om: &OverlapMatrix, scheme: &ColorScheme) -> Result<ColorAssignment> {
    if scheme.mode != ColorMode::Cluster {
        return Err(Error::InvalidConfig(
            "assign_colors_cluster requires mode=cluster".into(),
        ));
    }
    scheme.validate()?;
    let (offsets, k_sum) = global_ids(om);
    if k_sum == 0 {
        return Err(Error::EmptyInput("no blocks to color".into()));
    }

    // undirected block graph; edge weight is the larger of the two
    // directional scores, which preserves containment signals
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for e in &om.entries {
        if e.parent_layer < e.child_layer {
            let a = offsets[e.parent_layer] + e.parent_block as usize;
            let b = offsets[e.child_layer] + e.child_block as usize;
            let mirror = e.weight / om.block_weights[e.parent_layer][e.parent_block as usize];
            edges.push((a, b, e.score.max(mirror)));
        }
    }
    let communities = louvain_communities(k_sum, &edges, scheme.cluster_resolution);

    let mut colors: Vec<Vec<ColorLabel>> = Vec::with_capacity(om.m());
    let mut variants: BTreeMap<(usize, u32), u32> = BTreeMap::new();
    for layer in 0..om.m() {
        let labels = (0..om.k(layer))
            .map(|code| {
                let community = communities[offsets[layer] + code];
                let variant = variants.entry((layer, community)).or_insert(0);
                let label = ColorLabel {
                    community,
                    variant: *variant,
                };
                *variant += 1;
                label
            })
            .collect();
        colors.push(labels);
    }
    let m_weight = matched_weight(om, &colors);
    Ok(ColorAssignment {
        colors,
        matched_weight: m_weight,
    })
}

/// Reference scheme: the reference layer's blocks get distinct colors and
/// every other layer inherits, per block, the color of the parent block
/// with the highest overlap score (or a fresh color below the threshold).
pub fn assign_colors_reference(
    om: &OverlapMatrix,
    scheme: &ColorScheme,
) -> Result<ColorAssignment> {
    if scheme.mode != ColorMode::Reference {
        return Err(Error::InvalidConfig(
            "assign_colors_reference requires mode=reference".into(),
        ));
    }
    scheme.validate()?;
    let m = om.m();
    // (layer to color, its parent layer), in sweep order
    let (reference, plan): (usize, Vec<(usize, usize)>) = match scheme.reference {
        ReferenceSpec::Leftmost => (0, (1..m).map(|l| (l, 0)).collect()),
        ReferenceSpec::Rightmost => (m - 1, (0..m - 1).rev().map(|l| (l, m - 1)).collect()),
        ReferenceSpec::RollingLeft => (0, (1..m).map(|l| (l, l - 1)).collect()),
        ReferenceSpec::RollingRight => (m - 1, (0..m - 1).rev().map(|l| (l, l + 1)).collect()),
        ReferenceSpec::Layer(r) => {
            if r >= m {
                return Err(Error::InvalidConfig(format!(
                    "reference layer {r} out of range for {m} layers"
                )));
            }
            (r, (0..m).filter(|&l| l != r).map(|l| (l, r)).collect())
        }
    };

    let mut colors: Vec<Vec<ColorLabel>> = (0..m).map(|_| Vec::new()).collect();
    colors[reference] = (0..om.k(reference) as u32)
        .map(|community| ColorLabel {
            community,
            variant: 0,
        })
        .collect();
    let mut next_community = om.k(reference) as u32;

    for (layer, parent) in plan {
        // best-scoring parent block per child block; ties on score go to the
        // lowest parent block code
        let mut best: Vec<Option<(f64, u32)>> = vec![None; om.k(layer)];
        for e in om.between(parent, layer) {
            let slot = &mut best[e.child_block as usize];
            let replace = match slot {
                None => true,
                Some((score, block)) => {
                    e.score > *score + 1e-15 || ((e.score - *score).abs() <= 1e-15 && e.parent_block < *block)
                }
            };
            if replace {
                *slot = Some((e.score, e.parent_block));
            }
        }
        // desired label per block, then resolve collisions: the strongest
        // claim keeps the parent's label, the rest bump the variant
        let mut desires: Vec<(u32, f64, ColorLabel)> = Vec::with_capacity(om.k(layer));
        for code in 0..om.k(layer) as u32 {
            match best[code as usize] {
                Some((score, parent_block)) if score >= scheme.min_parent_score => {
                    desires.push((code, score, colors[parent][parent_block as usize]));
                }
                _ => {
                    desires.push((
                        code,
                        0.0,
                        ColorLabel {
                            community: next_community,
                            variant: 0,
                        },
                    ));
                    next_community += 1;
                }
            }
        }
        desires.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut used: BTreeSet<ColorLabel> = BTreeSet::new();
        let mut assigned = vec![
            ColorLabel {
                community: 0,
                variant: 0
            };
            om.k(layer)
        ];
        for (code, _, desired) in desires {
            let mut label = desired;
            while used.contains(&label) {
                label.variant += 1;
            }
            used.insert(label);
            assigned[code as usize] = label;
        }
        colors[layer] = assigned;
    }

    let m_weight = matched_weight(om, &colors);
    Ok(ColorAssignment {
        colors,
        matched_weight: m_weight,
    })
}

/// Greedy modularity communities with fixed visitation order: nodes are
/// visited ascending, ties go to the lowest community id, and levels repeat
/// until no node moves. Bit-stable for identical inputs.
fn louvain_communities(n: usize, edges: &[(usize, usize, f64)], resolution: f64) -> Vec<u32> {
    // node → community, composed across levels
    let mut membership: Vec<usize> = (0..n).collect();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        if a == b {
            continue;
        }
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut self_loops = vec![0.0f64; n];

    loop {
        let nc = adj.len();
        let degree: Vec<f64> = (0..nc)
            .map(|v| adj[v].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self_loops[v])
            .collect();
        let m2: f64 = degree.iter().sum();
        if m2 <= 0.0 {
            break;
        }
        let mut comm: Vec<usize> = (0..nc).collect();
        let mut tot = degree.clone();
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for v in 0..nc {
                let old = comm[v];
                let mut weight_to: BTreeMap<usize, f64> = BTreeMap::new();
                for &(u, w) in &adj[v] {
                    *weight_to.entry(comm[u]).or_insert(0.0) += w;
                }
                tot[old] -= degree[v];
                let gain = |c: usize| {
                    weight_to.get(&c).copied().unwrap_or(0.0)
                        - resolution * tot[c] * degree[v] / m2
                };
                let mut best_comm = old;
                let mut best_gain = gain(old);
                for &c in weight_to.keys() {
                    if c == old {
                        continue;
                    }
                    let g = gain(c);
                    if g > best_gain + 1e-12 || ((g - best_gain).abs() <= 1e-12 && c < best_comm) {
                        best_gain = g;
                        best_comm = c;
                    }
                }
                tot[best_comm] += degree[v];
                if best_comm != old {
                    comm[v] = best_comm;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        if !moved_any {
            break;
        }

        // renumber communities by first appearance
        let mut renumber: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &comm {
            let next = renumber.len();
            renumber.entry(c).or_insert(next);
        }
        let new_count = renumber.len();
        for slot in membership.iter_mut() {
            *slot = renumber[&comm[*slot]];
        }
        if new_count == nc {
            break;
        }

        // aggregate into the super-graph
        let mut new_loops = vec![0.0f64; new_count];
        let mut new_edge_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for v in 0..nc {
            let cv = renumber[&comm[v]];
            new_loops[cv] += self_loops[v];
            for &(u, w) in &adj[v] {
                if u < v {
                    continue; // each undirected edge once
                }
                let cu = renumber[&comm[u]];
                if cv == cu {
                    new_loops[cv] += w;
                } else {
                    let key = (cv.min(cu), cv.max(cu));
                    *new_edge_map.entry(key).or_insert(0.0) += w;
                }
            }
        }
        let mut new_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); new_count];
        for ((a, b), w) in new_edge_map {
            new_adj[a].push((b, w));
            new_adj[b].push((a, w));
        }
        adj = new_adj;
        self_loops = new_loops;
    }

    // compact final ids by first appearance over node order
    let mut renumber: BTreeMap<usize, u32> = BTreeMap::new();
    membership
        .iter()
        .map(|&c| {
            let next = renumber.len() as u32;
            *renumber.entry(c).or_insert(next)
        })
        .collect()
}
