//! Deterministic SVG rendering of an optimized alluvial diagram: columns in
//! display order, blocks stacked per block order with heights proportional
//! to weight, and one cubic ribbon per alluvium per adjacent column gap.

use alluvium_core::{ColorAssignment, Error, GroupedTable, LayoutSolution, Result};

/// Canvas and styling knobs.
#[derive(Debug, Clone)]
pub struct RenderSpec {
    pub width: f64,
    pub height: f64,
    /// Horizontal gap between columns.
    pub layer_gap: f64,
    /// Vertical gap between blocks in a column.
    pub block_gap: f64,
    /// Hex colors cycled by community index.
    pub palette: Vec<String>,
    pub ribbon_opacity: f64,
    pub font_size: f64,
    pub show_labels: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            width: 960.0,
            height: 600.0,
            layer_gap: 72.0,
            block_gap: 0.0,
            palette: vec![
                "#4e79a7".into(),
                "#f28e2b".into(),
                "#e15759".into(),
                "#76b7b2".into(),
                "#59a14f".into(),
                "#edc948".into(),
                "#b07aa1".into(),
                "#ff9da7".into(),
                "#9c755f".into(),
                "#bab0ac".into(),
                "#86bcb6".into(),
                "#d37295".into(),
            ],
            ribbon_opacity: 0.45,
            font_size: 12.0,
            show_labels: true,
        }
    }
}

impl RenderSpec {
    fn validate(&self) -> Result<()> {
        if !self.width.is_finite() || self.width <= 0.0 || !self.height.is_finite() || self.height <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "canvas dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.block_gap < 0.0 || self.layer_gap < 0.0 {
            return Err(Error::InvalidConfig("gaps must be non-negative".into()));
        }
        if self.palette.is_empty() {
            return Err(Error::InvalidConfig("palette must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BlockGeom {
    /// Original layer index.
    pub layer: usize,
    pub code: u32,
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub community: u32,
}

/// One alluvium's ribbon between display columns `gap` and `gap + 1`.
#[derive(Debug, Clone)]
pub struct RibbonGeom {
    pub combo: usize,
    pub gap: usize,
    pub x0: f64,
    pub y0_top: f64,
    pub x1: f64,
    pub y1_top: f64,
    pub thickness: f64,
    pub community: u32,
}

impl RibbonGeom {
    pub fn y0_center(&self) -> f64 {
        self.y0_top + self.thickness / 2.0
    }
    pub fn y1_center(&self) -> f64 {
        self.y1_top + self.thickness / 2.0
    }
}

#[derive(Debug, Clone)]
pub struct Geometry {
    pub blocks: Vec<BlockGeom>,
    pub ribbons: Vec<RibbonGeom>,
    pub column_x: Vec<f64>,
    pub column_width: f64,
    pub weight_scale: f64,
    top_margin: f64,
}

/// Pure layout pass shared by the SVG writer and the geometry tests.
pub fn compute_geometry(
    g: &GroupedTable,
    sol: &LayoutSolution,
    colors: &ColorAssignment,
    spec: &RenderSpec,
) -> Result<Geometry> {
    spec.validate()?;
    sol.validate_for(g)?;
    colors.validate_for(g)?;
    let total = g.total_weight();
    if total <= 0.0 {
        return Err(Error::EmptyInput("zero-weight dataset".into()));
    }
    let m = g.m();
    let top_margin = spec.font_size * 2.0 + 8.0;
    let bottom_margin = 16.0;
    let side_margin = 24.0;

    let gaps_total = spec.layer_gap * (m - 1) as f64;
    let column_width = ((spec.width - 2.0 * side_margin - gaps_total) / m as f64).max(2.0);
    let column_x: Vec<f64> = (0..m)
        .map(|p| side_margin + p as f64 * (column_width + spec.layer_gap))
        .collect();

    let max_k = g.ks().into_iter().max().unwrap_or(1);
    let usable = spec.height - top_margin - bottom_margin - spec.block_gap * (max_k - 1) as f64;
    if usable <= 0.0 {
        return Err(Error::InvalidConfig(
            "canvas too small for the configured gaps".into(),
        ));
    }
    let weight_scale = usable / total;

    // display rank of each block, per original layer
    let rank: Vec<Vec<u32>> = sol
        .block_orders
        .iter()
        .map(|order| {
            let mut r = vec![0u32; order.len()];
            for (pos, &code) in order.iter().enumerate() {
                r[code as usize] = pos as u32;
            }
            r
        })
        .collect();

    // block tops per original layer, following each column's block order
    let mut block_top: Vec<Vec<f64>> = g.ks().iter().map(|&k| vec![0.0; k]).collect();
    let mut blocks = Vec::new();
    for (p, &x) in column_x.iter().enumerate() {
        let layer = sol.layer_order[p];
        let mut y = top_margin;
        for &code in &sol.block_orders[layer] {
            let h = g.block_weight(layer, code) * weight_scale;
            block_top[layer][code as usize] = y;
            blocks.push(BlockGeom {
                layer,
                code,
                x,
                y,
                width: column_width,
                height: h,
                community: colors.colors[layer][code as usize].community,
            });
            y += h + spec.block_gap;
        }
    }

    // within-block stacking: order alluvia by their block's rank in the next
    // column, then the previous column, then input index
    let sort_key = |p: usize, combo_idx: usize| -> (u32, u32, usize) {
        let combo = &g.combos[combo_idx];
        let next = if p + 1 < m {
            let l = sol.layer_order[p + 1];
            rank[l][combo.blocks[l] as usize]
        } else {
            0
        };
        let prev = if p > 0 {
            let l = sol.layer_order[p - 1];
            rank[l][combo.blocks[l] as usize]
        } else {
            0
        };
        (next, prev, combo_idx)
    };

    // per display column, per combo: top offset of its slot
    let mut slot_top = vec![vec![0.0f64; g.n_bar()]; m];
    for (p, slots) in slot_top.iter_mut().enumerate() {
        let layer = sol.layer_order[p];
        for &code in &sol.block_orders[layer] {
            let mut members: Vec<usize> = (0..g.n_bar())
                .filter(|&ci| g.combos[ci].blocks[layer] == code)
                .collect();
            members.sort_by_key(|&ci| sort_key(p, ci));
            let mut y = block_top[layer][code as usize];
            for ci in members {
                slots[ci] = y;
                y += g.combos[ci].weight * weight_scale;
            }
        }
    }

    let mut ribbons = Vec::new();
    for p in 0..m.saturating_sub(1) {
        let src_layer = sol.layer_order[p];
        for (ci, combo) in g.combos.iter().enumerate() {
            ribbons.push(RibbonGeom {
                combo: ci,
                gap: p,
                x0: column_x[p] + column_width,
                y0_top: slot_top[p][ci],
                x1: column_x[p + 1],
                y1_top: slot_top[p + 1][ci],
                thickness: combo.weight * weight_scale,
                community: colors.colors[src_layer][combo.blocks[src_layer] as usize].community,
            });
        }
    }

    Ok(Geometry {
        blocks,
        ribbons,
        column_x,
        column_width,
        weight_scale,
        top_margin,
    })
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Render the diagram as standalone SVG 1.1 text; byte-stable for fixed
/// inputs.
pub fn render_svg(
    g: &GroupedTable,
    sol: &LayoutSolution,
    colors: &ColorAssignment,
    spec: &RenderSpec,
) -> Result<String> {
    let geom = compute_geometry(g, sol, colors, spec)?;
    let palette = &spec.palette;
    let color_of = |community: u32| &palette[community as usize % palette.len()];

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = px(spec.width),
        h = px(spec.height)
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        px(spec.width),
        px(spec.height)
    ));

    out.push_str("<g class=\"ribbons\">\n");
    for r in &geom.ribbons {
        let xm = (r.x0 + r.x1) / 2.0;
        let y0b = r.y0_top + r.thickness;
        let y1b = r.y1_top + r.thickness;
        out.push_str(&format!(
            "<path d=\"M {x0} {y0t} C {xm} {y0t}, {xm} {y1t}, {x1} {y1t} L {x1} {y1b} C {xm} {y1b}, {xm} {y0b}, {x0} {y0b} Z\" fill=\"{fill}\" fill-opacity=\"{op}\"/>\n",
            x0 = px(r.x0),
            y0t = px(r.y0_top),
            xm = px(xm),
            y1t = px(r.y1_top),
            x1 = px(r.x1),
            y1b = px(y1b),
            y0b = px(y0b),
            fill = color_of(r.community),
            op = px(spec.ribbon_opacity),
        ));
    }
    out.push_str("</g>\n");

    out.push_str("<g class=\"blocks\">\n");
    for b in &geom.blocks {
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#3b3b3b\" stroke-width=\"0.5\"/>\n",
            px(b.x),
            px(b.y),
            px(b.width),
            px(b.height),
            color_of(b.community),
        ));
    }
    out.push_str("</g>\n");

    out.push_str("<g class=\"labels\">\n");
    for (p, &x) in geom.column_x.iter().enumerate() {
        let layer = sol.layer_order[p];
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"{}\">{}</text>\n",
            px(x + geom.column_width / 2.0),
            px(geom.top_margin - spec.font_size),
            px(spec.font_size),
            escape(&g.layer_names[layer]),
        ));
    }
    if spec.show_labels {
        for b in &geom.blocks {
            if b.height >= spec.font_size + 2.0 {
                out.push_str(&format!(
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"{}\">{}</text>\n",
                    px(b.x + b.width / 2.0),
                    px(b.y + b.height / 2.0 + spec.font_size * 0.35),
                    px(spec.font_size * 0.85),
                    escape(&g.block_labels[b.layer][b.code as usize]),
                ));
            }
        }
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alluvium_core::color::{assign_colors_cluster, overlap_matrix, ColorScheme};
    use alluvium_core::layout::{solve, SortConfig};
    use alluvium_core::GroupedTable;

    fn colored(g: &GroupedTable) -> ColorAssignment {
        assign_colors_cluster(&overlap_matrix(g), &ColorScheme::default()).unwrap()
    }

    #[test]
    fn single_combo_spans_full_height() {
        let g = GroupedTable::from_codes(&[1, 1, 1], &[(vec![0, 0, 0], 5.0)]).unwrap();
        let sol = LayoutSolution::identity(&g);
        let spec = RenderSpec::default();
        let geom = compute_geometry(&g, &sol, &colored(&g), &spec).unwrap();
        assert_eq!(geom.ribbons.len(), 2);
        for b in &geom.blocks {
            assert!((b.height - 5.0 * geom.weight_scale).abs() < 1e-9);
        }
        for r in &geom.ribbons {
            assert!((r.thickness - 5.0 * geom.weight_scale).abs() < 1e-9);
        }
    }

    #[test]
    fn parallel_combos_stack_without_overlap() {
        let g2 = GroupedTable::from_codes(
            &[2, 2],
            &[(vec![0, 0], 2.0), (vec![1, 1], 2.0)],
        )
        .unwrap();
        let sol = LayoutSolution::identity(&g2);
        let geom = compute_geometry(&g2, &sol, &colored(&g2), &RenderSpec::default()).unwrap();
        assert_eq!(geom.ribbons.len(), 2);
        let (a, b) = (&geom.ribbons[0], &geom.ribbons[1]);
        assert!((a.thickness - b.thickness).abs() < 1e-9);
        // equal heights, disjoint vertical extents
        let a_bot = a.y0_top + a.thickness;
        assert!(a_bot <= b.y0_top + 1e-9 || b.y0_top + b.thickness <= a.y0_top + 1e-9);
    }

    #[test]
    fn optimized_e1_has_no_geometric_crossings() {
        let g = GroupedTable::from_codes(
            &[2, 2],
            &[(vec![0, 0], 1.0), (vec![0, 1], 1.0), (vec![1, 0], 1.0)],
        )
        .unwrap();
        let sol = solve(&g, &SortConfig::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        let geom = compute_geometry(&g, &sol, &colored(&g), &RenderSpec::default()).unwrap();
        for i in 0..geom.ribbons.len() {
            for j in (i + 1)..geom.ribbons.len() {
                let (a, b) = (&geom.ribbons[i], &geom.ribbons[j]);
                if a.gap != b.gap {
                    continue;
                }
                let d0 = a.y0_center() - b.y0_center();
                let d1 = a.y1_center() - b.y1_center();
                assert!(d0 * d1 >= 0.0, "ribbons {i} and {j} cross");
            }
        }
    }

    #[test]
    fn column_heights_sum_to_scaled_total() {
        let g = GroupedTable::from_codes(
            &[3, 2],
            &[
                (vec![0, 0], 1.5),
                (vec![1, 0], 2.25),
                (vec![2, 1], 4.0),
                (vec![0, 1], 1.0),
            ],
        )
        .unwrap();
        let sol = LayoutSolution::identity(&g);
        for block_gap in [0.0, 4.0] {
            let spec = RenderSpec {
                block_gap,
                ..Default::default()
            };
            let geom = compute_geometry(&g, &sol, &colored(&g), &spec).unwrap();
            let expected = g.total_weight() * geom.weight_scale;
            for layer in 0..g.m() {
                let sum: f64 = geom
                    .blocks
                    .iter()
                    .filter(|b| b.layer == layer)
                    .map(|b| b.height)
                    .sum();
                assert!(
                    (sum - expected).abs() < 0.5,
                    "gap {block_gap}, layer {layer}: {sum} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn svg_output_is_byte_stable_and_escaped() {
        let mut g = GroupedTable::from_codes(
            &[2, 2],
            &[(vec![0, 0], 3.0), (vec![1, 1], 2.0), (vec![0, 1], 1.0)],
        )
        .unwrap();
        g.block_labels[0][0] = "A & B <\"C\">".into();
        let sol = solve(&g, &SortConfig::default()).unwrap();
        let colors = colored(&g);
        let spec = RenderSpec::default();
        let a = render_svg(&g, &sol, &colors, &spec).unwrap();
        let b = render_svg(&g, &sol, &colors, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("A &amp; B &lt;&quot;C&quot;&gt;"));
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn rejects_zero_weight_and_bad_spec() {
        let g = GroupedTable::from_codes(&[1, 1], &[(vec![0, 0], 1.0)]).unwrap();
        let sol = LayoutSolution::identity(&g);
        let colors = colored(&g);
        let bad = RenderSpec {
            width: 0.0,
            ..Default::default()
        };
        assert!(compute_geometry(&g, &sol, &colors, &bad).is_err());
        let bad = RenderSpec {
            block_gap: -1.0,
            ..Default::default()
        };
        assert!(compute_geometry(&g, &sol, &colors, &bad).is_err());
    }
}
