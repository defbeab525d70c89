//! Block dissimilarity matrix construction and the NeighborNet circular
//! ordering (Bryant & Moulton's agglomerative scheme).
//!
//! Blocks that share a lot of flow get a small distance (`c · -log w`), so
//! the circular ordering NeighborNet produces places heavily connected
//! blocks next to each other. The cycle is later split into per-layer block
//! orders by the layout pipeline.

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::model::GroupedTable;

/// Absent block pairs behave like an edge this many times weaker than the
/// weakest observed pair. Keeping the background distance a bounded margin
/// above the real signal matters: a vastly larger constant (say `-log 1e-12`)
/// swamps the agglomeration criteria and visibly degrades the cycles it
/// produces on chain-structured data.
pub const ABSENT_WEIGHT_RATIO: f64 = 1e-3;

const EPS: f64 = 1e-12;

/// Symmetric `K_sum × K_sum` block distance matrix. Node `i` is
/// `node_index[i] = (layer, block code)`, flattened layer-major.
#[derive(Debug, Clone)]
pub struct BlockDistanceMatrix {
    pub d: SymMatrix,
    pub node_index: Vec<(usize, u32)>,
    pub c_scale: f64,
    /// Effective distance of unconnected cross-layer pairs (after the
    /// uniform non-negativity shift).
    pub big_value: f64,
    /// Effective distance of same-layer pairs, when configured.
    pub same_layer_value: Option<f64>,
    /// Uniform offset added to every off-diagonal entry so the minimum is 0.
    pub shift: f64,
}

impl BlockDistanceMatrix {
    pub fn size(&self) -> usize {
        self.d.n()
    }
}

/// Pairwise block weights: for every combo, each unordered pair of its
/// blocks accumulates the combo weight. Distances are `c_scale · -log(w)`,
/// capped at `big_value`, with unconnected and same-layer pairs defaulted.
pub fn build_distance_matrix(
    g: &GroupedTable,
    c_scale: f64,
    same_layer_value: Option<f64>,
) -> Result<BlockDistanceMatrix> {
    if c_scale <= 0.0 || !c_scale.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "c_scale must be positive, got {c_scale}"
        )));
    }
    g.validate()?;
    let m = g.m();
    let ks = g.ks();
    let k_sum: usize = ks.iter().sum();
    let mut offsets = Vec::with_capacity(m);
    let mut acc = 0usize;
    for &k in &ks {
        offsets.push(acc);
        acc += k;
    }

    let mut weights = SymMatrix::zeros(k_sum);
    let mut min_weight = f64::INFINITY;
    for combo in &g.combos {
        for i in 0..m {
            let a = offsets[i] + combo.blocks[i] as usize;
            for (j, &offset) in offsets.iter().enumerate().skip(i + 1) {
                let b = offset + combo.blocks[j] as usize;
                let w = weights.get(a, b) + combo.weight;
                weights.set_sym(a, b, w);
            }
        }
    }
    for a in 0..k_sum {
        for b in (a + 1)..k_sum {
            let w = weights.get(a, b);
            if w > 0.0 {
                min_weight = min_weight.min(w);
            }
        }
    }
    if !min_weight.is_finite() {
        min_weight = 1.0;
    }

    let raw_big = c_scale * -(ABSENT_WEIGHT_RATIO * min_weight).ln();
    let raw_same = same_layer_value.unwrap_or(raw_big);
    let mut node_index = Vec::with_capacity(k_sum);
    for (layer, &k) in ks.iter().enumerate() {
        for code in 0..k {
            node_index.push((layer, code as u32));
        }
    }

    let mut d = SymMatrix::zeros(k_sum);
    for a in 0..k_sum {
        for b in (a + 1)..k_sum {
            let v = if node_index[a].0 == node_index[b].0 {
                raw_same
            } else {
                let w = weights.get(a, b);
                if w > 0.0 {
                    (c_scale * -w.ln()).min(raw_big)
                } else {
                    raw_big
                }
            };
            d.set_sym(a, b, v);
        }
    }

    // NeighborNet expects a dissimilarity; weights above 1 make -log(w)
    // negative, so shift everything up uniformly
    let min = if k_sum > 1 { d.min_off_diagonal() } else { 0.0 };
    let shift = if min < 0.0 { -min } else { 0.0 };
    if shift > 0.0 {
        d.shift_off_diagonal(shift);
    }

    Ok(BlockDistanceMatrix {
        d,
        node_index,
        c_scale,
        big_value: raw_big + shift,
        same_layer_value: same_layer_value.map(|v| v + shift),
        shift,
    })
}

/// A circular ordering of all block nodes; `order` is read cyclically.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub order: Vec<usize>,
}

/// NeighborNet circular ordering of the blocks of `dm`.
pub fn neighbornet_cycle(dm: &BlockDistanceMatrix) -> Result<Cycle> {
    Ok(Cycle {
        order: circular_order(&dm.d)?,
    })
}

/// NeighborNet agglomeration/expansion on a symmetric dissimilarity matrix.
///
/// Clusters start as singletons. Each step picks the cluster pair minimizing
/// the neighbor-joining criterion `(N-2)·d(A,B) - Σ d(A,·) - Σ d(B,·)` over
/// cluster-averaged distances, then the node pair inside those clusters by
/// the analogous node-level criterion. A chain x–y–z collapses to two nodes
/// u, v with
///
/// ```text
/// d(u,s) = 2/3·d(x,s) + 1/3·d(y,s)
/// d(v,s) = 2/3·d(z,s) + 1/3·d(y,s)
/// d(u,v) = (d(x,y) + d(x,z) + d(y,z)) / 3
/// ```
///
/// Expansion replays the collapses in reverse to produce the full cycle.
/// Ties break toward the lowest node-index pair, so the output is
/// deterministic. O(n³) time.
pub fn circular_order(dist: &SymMatrix) -> Result<Vec<usize>> {
    dist.validate_dissimilarity()?;
    let n = dist.n();
    if n == 0 {
        return Err(Error::EmptyInput("empty distance matrix".into()));
    }
    if n <= 3 {
        return Ok((0..n).collect());
    }
    let mut state = Agglomerator::new(dist);
    state.run()?;
    state.expand()
}

#[derive(Debug, Clone, Default)]
struct NetNode {
    next: Option<usize>,
    prev: Option<usize>,
    /// Cluster partner; linked pairs form one cluster.
    nbr: Option<usize>,
    ch1: Option<usize>,
    ch2: Option<usize>,
    sx: f64,
    rx: f64,
}

struct Agglomerator {
    n: usize,
    cap: usize,
    d: Vec<f64>,
    nodes: Vec<NetNode>,
    head: Option<usize>,
    joins: Vec<usize>,
    num_active: usize,
    num_clusters: usize,
}

impl Agglomerator {
    fn new(dist: &SymMatrix) -> Agglomerator {
        let n = dist.n();
        let cap = 3 * n + 2;
        let mut d = vec![0.0; cap * cap];
        for i in 0..n {
            for j in 0..n {
                d[i * cap + j] = dist.get(i, j);
            }
        }
        let mut nodes: Vec<NetNode> = (0..n).map(|_| NetNode::default()).collect();
        for (i, node) in nodes.iter_mut().enumerate() {
            node.next = if i + 1 < n { Some(i + 1) } else { None };
            node.prev = if i > 0 { Some(i - 1) } else { None };
        }
        Agglomerator {
            n,
            cap,
            d,
            nodes,
            head: Some(0),
            joins: Vec::new(),
            num_active: n,
            num_clusters: n,
        }
    }

    #[inline]
    fn dist(&self, a: usize, b: usize) -> f64 {
        self.d[a * self.cap + b]
    }

    #[inline]
    fn set_dist(&mut self, a: usize, b: usize, v: f64) {
        self.d[a * self.cap + b] = v;
        self.d[b * self.cap + a] = v;
    }

    fn actives(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.num_active);
        let mut cur = self.head;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].next;
        }
        out
    }

    /// Average distance between the clusters containing `p` and `q`.
    fn avg_cluster_dist(&self, p: usize, q: usize) -> f64 {
        match (self.nodes[p].nbr, self.nodes[q].nbr) {
            (None, None) => self.dist(p, q),
            (Some(pb), None) => 0.5 * (self.dist(p, q) + self.dist(pb, q)),
            (None, Some(qb)) => 0.5 * (self.dist(p, q) + self.dist(p, qb)),
            (Some(pb), Some(qb)) => {
                0.25 * (self.dist(p, q) + self.dist(p, qb) + self.dist(pb, q) + self.dist(pb, qb))
            }
        }
    }

    fn run(&mut self) -> Result<()> {
        while self.num_active > 3 {
            if self.num_active == 4 && self.num_clusters == 2 {
                let actives = self.actives();
                let p = actives[0];
                let q = if self.nodes[p].nbr != Some(actives[1]) {
                    actives[1]
                } else {
                    actives[2]
                };
                let pn = self.nodes[p].nbr.ok_or_else(internal)?;
                let qn = self.nodes[q].nbr.ok_or_else(internal)?;
                let straight = self.dist(p, q) + self.dist(pn, qn);
                let crossed = self.dist(p, qn) + self.dist(pn, q);
                if straight < crossed {
                    self.join3(p, q, qn)?;
                } else {
                    self.join3(p, qn, q)?;
                }
                break;
            }

            self.compute_sx();
            let (cx, cy) = self.select_clusters()?;
            let (x, y) = self.select_nodes(cx, cy);

            match (self.nodes[x].nbr, self.nodes[y].nbr, self.num_active) {
                (None, None, _) => {
                    self.nodes[x].nbr = Some(y);
                    self.nodes[y].nbr = Some(x);
                    self.num_clusters -= 1;
                }
                (None, Some(yb), _) => {
                    self.join3(x, y, yb)?;
                    self.num_active -= 1;
                    self.num_clusters -= 1;
                }
                (Some(xb), None, _) | (Some(xb), _, 4) => {
                    self.join3(y, x, xb)?;
                    self.num_active -= 1;
                    self.num_clusters -= 1;
                }
                (Some(xb), Some(yb), _) => {
                    let u = self.join3(xb, x, y)?;
                    let v = self.nodes[u].nbr.ok_or_else(internal)?;
                    self.join3(u, v, yb)?;
                    self.num_active -= 2;
                    self.num_clusters -= 1;
                }
            }
        }
        Ok(())
    }

    /// For every node, the sum over other clusters of the average distance
    /// from its own cluster.
    fn compute_sx(&mut self) {
        let actives = self.actives();
        for &p in &actives {
            self.nodes[p].sx = 0.0;
        }
        for (pi, &p) in actives.iter().enumerate() {
            let eval_p = self.nodes[p].nbr.is_none_or(|nb| nb > p);
            if !eval_p {
                continue;
            }
            for &q in &actives[pi + 1..] {
                let eval_q = match self.nodes[q].nbr {
                    None => true,
                    Some(nb) => nb > q && nb != p,
                };
                if !eval_q {
                    continue;
                }
                let dpq = self.avg_cluster_dist(p, q);
                self.nodes[p].sx += dpq;
                if let Some(pb) = self.nodes[p].nbr {
                    self.nodes[pb].sx += dpq;
                }
                self.nodes[q].sx += dpq;
                if let Some(qb) = self.nodes[q].nbr {
                    self.nodes[qb].sx += dpq;
                }
            }
        }
    }

    /// Representative pair of the two clusters minimizing the cluster-level
    /// criterion; ties go to the lowest node-index pair.
    fn select_clusters(&self) -> Result<(usize, usize)> {
        let actives = self.actives();
        let mut best: Option<(usize, usize, f64)> = None;
        for (pi, &p) in actives.iter().enumerate() {
            if self.nodes[p].nbr.is_some_and(|nb| nb < p) {
                continue;
            }
            for &q in &actives[..pi] {
                if self.nodes[q].nbr.is_some_and(|nb| nb < q) {
                    continue;
                }
                if self.nodes[q].nbr == Some(p) {
                    continue;
                }
                let dpq = self.avg_cluster_dist(p, q);
                let qpq =
                    (self.num_clusters as f64 - 2.0) * dpq - self.nodes[p].sx - self.nodes[q].sx;
                let replace = match best {
                    None => true,
                    Some((bx, by, bq)) => {
                        qpq - bq < -EPS
                            || ((qpq - bq).abs() <= EPS && pair_key(p, q) < pair_key(bx, by))
                    }
                };
                if replace {
                    best = Some((p, q, qpq));
                }
            }
        }
        best.map(|(p, q, _)| (p, q)).ok_or_else(internal)
    }

    /// Node pair inside the chosen clusters minimizing the node-level
    /// criterion.
    fn select_nodes(&mut self, cx: usize, cy: usize) -> (usize, usize) {
        if self.nodes[cx].nbr.is_some() || self.nodes[cy].nbr.is_some() {
            self.nodes[cx].rx = self.compute_rx(cx, cx, cy);
            if let Some(cxb) = self.nodes[cx].nbr {
                self.nodes[cxb].rx = self.compute_rx(cxb, cx, cy);
            }
            self.nodes[cy].rx = self.compute_rx(cy, cx, cy);
            if let Some(cyb) = self.nodes[cy].nbr {
                self.nodes[cyb].rx = self.compute_rx(cyb, cx, cy);
            }
        }

        let mut m = self.num_clusters;
        if self.nodes[cx].nbr.is_some() {
            m += 1;
        }
        if self.nodes[cy].nbr.is_some() {
            m += 1;
        }
        let score = |a: usize, b: usize| {
            (m as f64 - 2.0) * self.dist(a, b) - self.nodes[a].rx - self.nodes[b].rx
        };

        let (mut x, mut y) = (cx, cy);
        let mut best = score(cx, cy);
        if let Some(cxb) = self.nodes[cx].nbr {
            let q = score(cxb, cy);
            if q - best < -EPS {
                best = q;
                x = cxb;
                y = cy;
            }
        }
        if let Some(cyb) = self.nodes[cy].nbr {
            let q = score(cx, cyb);
            if q - best < -EPS {
                best = q;
                x = cx;
                y = cyb;
            }
        }
        if let (Some(cxb), Some(cyb)) = (self.nodes[cx].nbr, self.nodes[cy].nbr) {
            let q = score(cxb, cyb);
            if q - best < -EPS {
                x = cxb;
                y = cyb;
            }
        }
        (x, y)
    }

    fn compute_rx(&self, z: usize, cx: usize, cy: usize) -> f64 {
        let mut rx = 0.0;
        let mut cur = self.head;
        while let Some(p) = cur {
            let full = p == cx
                || self.nodes[cx].nbr == Some(p)
                || p == cy
                || self.nodes[cy].nbr == Some(p)
                || self.nodes[p].nbr.is_none();
            let term = self.dist(z, p);
            rx += if full { term } else { term / 2.0 };
            cur = self.nodes[p].next;
        }
        rx
    }

    fn replace_in_list(&mut self, old: usize, new: usize) {
        self.nodes[new].next = self.nodes[old].next;
        self.nodes[new].prev = self.nodes[old].prev;
        if let Some(nx) = self.nodes[new].next {
            self.nodes[nx].prev = Some(new);
        }
        if let Some(pv) = self.nodes[new].prev {
            self.nodes[pv].next = Some(new);
        } else {
            self.head = Some(new);
        }
    }

    fn remove_from_list(&mut self, node: usize) {
        let (prev, next) = (self.nodes[node].prev, self.nodes[node].next);
        if let Some(nx) = next {
            self.nodes[nx].prev = prev;
        }
        if let Some(pv) = prev {
            self.nodes[pv].next = next;
        } else {
            self.head = next;
        }
    }

    /// Collapse the chain x–y–z into fresh nodes u (for x,y) and v (for y,z).
    fn join3(&mut self, x: usize, y: usize, z: usize) -> Result<usize> {
        let u = self.nodes.len();
        let v = u + 1;
        if v >= self.cap {
            return Err(internal());
        }
        self.nodes.push(NetNode {
            nbr: Some(v),
            ch1: Some(x),
            ch2: Some(y),
            ..Default::default()
        });
        self.nodes.push(NetNode {
            nbr: Some(u),
            ch1: Some(y),
            ch2: Some(z),
            ..Default::default()
        });

        self.replace_in_list(x, u);
        self.replace_in_list(z, v);
        self.remove_from_list(y);

        let mut cur = self.head;
        while let Some(p) = cur {
            if p != u && p != v {
                self.set_dist(u, p, (2.0 / 3.0) * self.dist(x, p) + (1.0 / 3.0) * self.dist(y, p));
                self.set_dist(v, p, (2.0 / 3.0) * self.dist(z, p) + (1.0 / 3.0) * self.dist(y, p));
            }
            cur = self.nodes[p].next;
        }
        let duv = (self.dist(x, y) + self.dist(x, z) + self.dist(y, z)) / 3.0;
        self.set_dist(u, v, duv);

        self.joins.push(u);
        Ok(u)
    }

    /// Replay the collapses in reverse, splicing children back into the
    /// ring, then read the leaves off in canonical orientation.
    fn expand(&mut self) -> Result<Vec<usize>> {
        let actives = self.actives();
        if actives.len() != 3 || self.joins.is_empty() {
            return Err(internal());
        }
        let (x0, z0) = (actives[0], actives[2]);
        self.nodes[z0].next = Some(x0);
        self.nodes[x0].prev = Some(z0);

        let mut cursor = x0;
        while let Some(u0) = self.joins.pop() {
            let mut u = u0;
            let mut v = self.nodes[u].nbr.ok_or_else(internal)?;
            let mut x1 = self.nodes[u].ch1.ok_or_else(internal)?;
            let y1 = self.nodes[u].ch2.ok_or_else(internal)?;
            let mut z1 = self.nodes[v].ch2.ok_or_else(internal)?;

            if self.nodes[v].next == Some(u) {
                std::mem::swap(&mut u, &mut v);
                std::mem::swap(&mut x1, &mut z1);
            } else if self.nodes[u].next != Some(v) {
                return Err(internal());
            }

            let uprev = self.nodes[u].prev.ok_or_else(internal)?;
            let vnext = self.nodes[v].next.ok_or_else(internal)?;
            self.nodes[uprev].next = Some(x1);
            self.nodes[x1].prev = Some(uprev);
            self.nodes[x1].next = Some(y1);
            self.nodes[y1].prev = Some(x1);
            self.nodes[y1].next = Some(z1);
            self.nodes[z1].prev = Some(y1);
            self.nodes[z1].next = Some(vnext);
            self.nodes[vnext].prev = Some(z1);
            cursor = x1;
        }

        // walk to leaf 0
        let mut at = cursor;
        loop {
            if at == 0 {
                break;
            }
            at = self.nodes[at].next.ok_or_else(internal)?;
            if at == cursor {
                return Err(internal());
            }
        }

        // canonical orientation: go whichever way reaches a smaller leaf first
        let fwd = self.next_leaf(at, true)?;
        let bwd = self.next_leaf(at, false)?;
        let forward = fwd <= bwd;

        let mut cycle = Vec::with_capacity(self.n);
        let mut p = at;
        while cycle.len() < self.n {
            if p < self.n {
                cycle.push(p);
            }
            p = if forward {
                self.nodes[p].next.ok_or_else(internal)?
            } else {
                self.nodes[p].prev.ok_or_else(internal)?
            };
        }
        Ok(cycle)
    }

    fn next_leaf(&self, start: usize, forward: bool) -> Result<usize> {
        let mut p = start;
        loop {
            p = if forward {
                self.nodes[p].next.ok_or_else(internal)?
            } else {
                self.nodes[p].prev.ok_or_else(internal)?
            };
            if p < self.n {
                return Ok(p);
            }
            if p == start {
                return Err(internal());
            }
        }
    }
}

#[inline]
fn pair_key(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn internal() -> Error {
    Error::Internal("neighbornet ring invariant violated".into())
}
