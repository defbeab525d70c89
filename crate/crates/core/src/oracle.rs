//! Exact brute-force solvers for small instances. These are the ground
//! truth the heuristics are tested against; they enumerate the full
//! permutation space and are guarded by explicit size caps.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::model::{ColorAssignment, ColorLabel, GroupedTable, LayoutSolution};
use crate::objective::total_objective;

#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    /// Cap on the ordering search space `m!·Π kᵢ!` (or `Π kᵢ!` when the
    /// layer order is fixed).
    pub max_s: u64,
    /// Cap on the coloring search space `Π kᵢ!`.
    pub max_color_space: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_s: 5_000_000,
            max_color_space: 5_000_000,
        }
    }
}

fn factorial_big(n: usize) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 2..=n {
        acc *= BigUint::from(i);
    }
    acc
}

/// `m!·Π kᵢ!`, or `Π kᵢ!` when `fix_layer_order`.
pub fn layout_search_space(g: &GroupedTable, fix_layer_order: bool) -> BigUint {
    let mut space = if fix_layer_order {
        BigUint::from(1u32)
    } else {
        factorial_big(g.m())
    };
    for k in g.ks() {
        space *= factorial_big(k);
    }
    space
}

/// `Π kᵢ!`: per-layer bijections into a shared palette.
pub fn coloring_search_space(g: &GroupedTable) -> BigUint {
    let mut space = BigUint::from(1u32);
    for k in g.ks() {
        space *= factorial_big(k);
    }
    space
}

/// All permutations of `0..n` in lexicographic order.
fn all_permutations(n: usize) -> Vec<Vec<u32>> {
    fn rec(rest: &mut Vec<u32>, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest.is_empty() {
            out.push(acc.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            acc.push(v);
            rec(rest, acc, out);
            acc.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..n as u32).collect(), &mut Vec::new(), &mut out);
    out
}

fn check_cap(space: &BigUint, cap: u64) -> Result<()> {
    if space > &BigUint::from(cap) {
        return Err(Error::OracleCapExceeded {
            space: space.to_string(),
            cap,
        });
    }
    Ok(())
}

/// Exact minimizer of the crossing objective over every layer permutation
/// (unless fixed) and every per-layer block permutation. Candidates are
/// visited in lexicographic `(μ, σ₁, …, σₘ)` order and the first strict
/// minimum is kept, so the witness is the lexicographically smallest one.
pub fn brute_force_layout(
    g: &GroupedTable,
    fix_layer_order: bool,
    limits: &OracleLimits,
) -> Result<LayoutSolution> {
    g.validate()?;
    check_cap(&layout_search_space(g, fix_layer_order), limits.max_s)?;
    let m = g.m();
    let layer_orders: Vec<Vec<usize>> = if fix_layer_order {
        vec![(0..m).collect()]
    } else {
        all_permutations(m)
            .into_iter()
            .map(|p| p.into_iter().map(|v| v as usize).collect())
            .collect()
    };
    let block_perms: Vec<Vec<Vec<u32>>> = g.ks().into_iter().map(all_permutations).collect();

    let mut best: Option<LayoutSolution> = None;
    for mu in &layer_orders {
        // odometer over per-layer permutation indices, last layer fastest
        let mut idx = vec![0usize; m];
        loop {
            let candidate = LayoutSolution {
                layer_order: mu.clone(),
                block_orders: (0..m).map(|i| block_perms[i][idx[i]].clone()).collect(),
                objective: 0.0,
            };
            let objective = total_objective(g, &candidate)?;
            if best.as_ref().is_none_or(|b| objective < b.objective) {
                best = Some(LayoutSolution {
                    objective,
                    ..candidate
                });
            }
            // advance
            let mut pos = m;
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < block_perms[pos].len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX {
                break;
            }
        }
    }
    best.ok_or_else(|| Error::EmptyInput("nothing enumerated".into()))
}

/// Matched weight of a candidate coloring where block `b` of layer `i` has
/// color `rank_of[i][b]`.
fn matched_weight_of(g: &GroupedTable, ranks: &[Vec<u32>]) -> f64 {
    let mut total = 0.0;
    for combo in &g.combos {
        for r in 0..g.m() - 1 {
            if ranks[r][combo.blocks[r] as usize] == ranks[r + 1][combo.blocks[r + 1] as usize] {
                total += combo.weight;
            }
        }
    }
    total
}

/// Exact maximizer of the matched weight over per-layer color bijections
/// into a shared palette: each layer's blocks are permuted and the block at
/// position `p` takes palette color `p`. Larger palettes cannot help because
/// colors unused by a neighbor match nothing.
pub fn brute_force_coloring(g: &GroupedTable, limits: &OracleLimits) -> Result<ColorAssignment> {
    g.validate()?;
    check_cap(&coloring_search_space(g), limits.max_color_space)?;
    let m = g.m();
    let block_perms: Vec<Vec<Vec<u32>>> = g.ks().into_iter().map(all_permutations).collect();

    // rank tables per candidate: rank[i][code] = color of that block
    let mut best: Option<(f64, Vec<Vec<u32>>)> = None;
    let mut idx = vec![0usize; m];
    loop {
        let ranks: Vec<Vec<u32>> = (0..m)
            .map(|i| {
                let perm = &block_perms[i][idx[i]];
                let mut rank = vec![0u32; perm.len()];
                for (pos, &code) in perm.iter().enumerate() {
                    rank[code as usize] = pos as u32;
                }
                rank
            })
            .collect();
        let weight = matched_weight_of(g, &ranks);
        if best.as_ref().is_none_or(|(w, _)| weight > *w) {
            best = Some((weight, ranks));
        }
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < block_perms[pos].len() {
                break;
            }
            idx[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }
    let (weight, ranks) = best.ok_or_else(|| Error::EmptyInput("nothing enumerated".into()))?;
    Ok(ColorAssignment {
        colors: ranks
            .into_iter()
            .map(|layer| {
                layer
                    .into_iter()
                    .map(|community| ColorLabel {
                        community,
                        variant: 0,
                    })
                    .collect()
            })
            .collect(),
        matched_weight: weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Combo;

    fn e1_instance() -> GroupedTable {
        GroupedTable::from_codes(
            &[2, 2],
            &[(vec![0, 0], 1.0), (vec![0, 1], 1.0), (vec![1, 0], 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn e1_minimum_is_zero() {
        let sol = brute_force_layout(&e1_instance(), false, &OracleLimits::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        // lexicographically smallest witness: identity layer order first
        assert_eq!(sol.layer_order, vec![0, 1]);
    }

    #[test]
    fn planted_reversal_minimum_is_zero() {
        let g = GroupedTable::from_codes(
            &[3, 3],
            &[(vec![0, 2], 1.0), (vec![1, 1], 1.0), (vec![2, 0], 1.0)],
        )
        .unwrap();
        let sol = brute_force_layout(&g, false, &OracleLimits::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn search_space_formulas() {
        let combos: Vec<(Vec<u32>, f64)> = (0..5)
            .map(|a| (vec![a, a.min(3)], 1.0))
            .collect();
        let g = GroupedTable::from_codes(&[5, 4], &combos).unwrap();
        assert_eq!(layout_search_space(&g, false), BigUint::from(5760u32));
        assert_eq!(layout_search_space(&g, true), BigUint::from(2880u32));

        let g32 = GroupedTable::from_codes(
            &[3, 2],
            &[(vec![0, 0], 1.0), (vec![1, 1], 1.0), (vec![2, 0], 1.0)],
        )
        .unwrap();
        assert_eq!(coloring_search_space(&g32), BigUint::from(12u32));
    }

    #[test]
    fn table_s1_sized_instance_enumerates() {
        // k = [5, 4], |S| = 5760 candidates
        let g = GroupedTable::from_codes(
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
        .unwrap();
        let identity = total_objective(&g, &LayoutSolution::identity(&g)).unwrap();
        let sol = brute_force_layout(&g, false, &OracleLimits::default()).unwrap();
        assert!(sol.objective <= identity);
        sol.validate_for(&g).unwrap();
    }

    #[test]
    fn cap_is_enforced() {
        let g = e1_instance();
        let limits = OracleLimits {
            max_s: 3,
            max_color_space: 3,
        };
        assert!(matches!(
            brute_force_layout(&g, false, &limits),
            Err(Error::OracleCapExceeded { .. })
        ));
        assert!(matches!(
            brute_force_coloring(&g, &limits),
            Err(Error::OracleCapExceeded { .. })
        ));
    }

    #[test]
    fn combo_order_does_not_change_optimum() {
        let g = GroupedTable::from_codes(
            &[3, 2],
            &[(vec![0, 1], 2.0), (vec![1, 0], 3.0), (vec![2, 1], 1.0)],
        )
        .unwrap();
        let mut shuffled = g.clone();
        shuffled.combos.reverse();
        let a = brute_force_layout(&g, false, &OracleLimits::default()).unwrap();
        let b = brute_force_layout(&shuffled, false, &OracleLimits::default()).unwrap();
        assert_eq!(a.objective, b.objective);
        let ca = brute_force_coloring(&g, &OracleLimits::default()).unwrap();
        let cb = brute_force_coloring(&shuffled, &OracleLimits::default()).unwrap();
        assert_eq!(ca.matched_weight, cb.matched_weight);
    }

    #[test]
    fn coloring_identical_layers_match_everything() {
        let g = GroupedTable::from_codes(
            &[2, 2],
            &[(vec![0, 0], 2.0), (vec![1, 1], 5.0)],
        )
        .unwrap();
        let ca = brute_force_coloring(&g, &OracleLimits::default()).unwrap();
        assert_eq!(ca.matched_weight, g.total_weight());
        ca.validate_for(&g).unwrap();
    }

    #[test]
    fn coloring_unique_perfect_matching() {
        let g = GroupedTable::from_codes(
            &[3, 3],
            &[(vec![0, 1], 4.0), (vec![1, 2], 2.0), (vec![2, 0], 7.0)],
        )
        .unwrap();
        let ca = brute_force_coloring(&g, &OracleLimits::default()).unwrap();
        assert_eq!(ca.matched_weight, g.total_weight());
        // assignment follows the matching
        assert_eq!(ca.colors[0][0], ca.colors[1][1]);
        assert_eq!(ca.colors[0][1], ca.colors[1][2]);
        assert_eq!(ca.colors[0][2], ca.colors[1][0]);
    }

    #[test]
    fn fix_layer_order_keeps_identity_mu() {
        let mut g = e1_instance();
        g.combos.push(Combo {
            blocks: vec![1, 1],
            weight: 2.0,
        });
        let sol = brute_force_layout(&g, true, &OracleLimits::default()).unwrap();
        assert_eq!(sol.layer_order, vec![0, 1]);
    }
}
