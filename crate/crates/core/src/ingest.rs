//! Reads raw tabular data (per-row or pre-grouped), cleans it, and produces
//! a [`GroupedTable`] with dense block codes assigned per the configured
//! default sorting.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Combo, Dataset, GroupedTable, Row};

/// How block codes are assigned within each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DefaultSorting {
    #[default]
    Alphabetical,
    ReverseAlphabetical,
    /// Ascending total block weight.
    Increasing,
    /// Descending total block weight.
    Decreasing,
    /// Seeded shuffle; requires `seed`.
    Random,
}

impl DefaultSorting {
    pub fn parse(s: &str) -> Result<DefaultSorting> {
        match s {
            "alphabetical" => Ok(DefaultSorting::Alphabetical),
            "reverse_alphabetical" => Ok(DefaultSorting::ReverseAlphabetical),
            "increasing" => Ok(DefaultSorting::Increasing),
            "decreasing" => Ok(DefaultSorting::Decreasing),
            "random" => Ok(DefaultSorting::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown default_sorting {other:?}"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DefaultSorting::Alphabetical => "alphabetical",
            DefaultSorting::ReverseAlphabetical => "reverse_alphabetical",
            DefaultSorting::Increasing => "increasing",
            DefaultSorting::Decreasing => "decreasing",
            DefaultSorting::Random => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// Name of the weight column; when unset the shape is auto-detected.
    pub weight_column: Option<String>,
    pub default_sorting: DefaultSorting,
    /// Label substituted for empty and "NA" category values.
    pub missing_label: String,
    /// Required when `default_sorting` is [`DefaultSorting::Random`].
    pub seed: Option<u64>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            weight_column: None,
            default_sorting: DefaultSorting::Alphabetical,
            missing_label: "Missing".into(),
            seed: None,
        }
    }
}

/// Header plus string cells, straight from a delimited file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

/// Read a UTF-8 CSV or TSV file; `.tsv`/`.tab` extensions select tabs.
pub fn read_table(path: &Path) -> Result<RawTable> {
    let delimiter = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    };
    let file = std::fs::File::open(path)?;
    read_table_from(file, delimiter)
}

pub fn read_table_from<R: Read>(reader: R, delimiter: u8) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(record.iter().map(|c| c.to_string()).collect());
    }
    if header.is_empty() || rows.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    Ok(RawTable { header, rows })
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Clean a raw table into a [`Dataset`]: trims cells, substitutes the
/// missing label, and resolves the weight column (explicit, or the last
/// column when it parses as numeric on every row).
pub fn resolve_dataset(raw: &RawTable, cfg: &IngestConfig) -> Result<Dataset> {
    if raw.rows.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    let ncols = raw.header.len();
    let weight_idx: Option<usize> = match &cfg.weight_column {
        Some(name) => Some(
            raw.header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        ),
        None => {
            let last = ncols.checked_sub(1);
            let all_numeric = last.is_some_and(|li| {
                raw.rows
                    .iter()
                    .all(|r| r.get(li).is_some_and(|c| c.trim().parse::<f64>().is_ok()))
            });
            if ncols > 2 && all_numeric {
                last
            } else {
                None
            }
        }
    };
    let layer_cols: Vec<usize> = (0..ncols).filter(|i| Some(*i) != weight_idx).collect();
    if layer_cols.len() < 2 {
        return Err(Error::TooFewLayers {
            found: layer_cols.len(),
        });
    }
    let mut rows = Vec::with_capacity(raw.rows.len());
    for (rowno, raw_row) in raw.rows.iter().enumerate() {
        if raw_row.len() != ncols {
            return Err(Error::MismatchedSolution(format!(
                "row {rowno} has {} cells, header has {ncols}",
                raw_row.len()
            )));
        }
        let weight = match weight_idx {
            Some(wi) => {
                let cell = raw_row[wi].trim();
                let w: f64 = cell.parse().map_err(|_| Error::InvalidWeight {
                    row: rowno,
                    value: cell.to_string(),
                })?;
                if w <= 0.0 || !w.is_finite() {
                    return Err(Error::InvalidWeight {
                        row: rowno,
                        value: cell.to_string(),
                    });
                }
                w
            }
            None => 1.0,
        };
        let values = layer_cols
            .iter()
            .map(|&ci| {
                let cell = raw_row[ci].trim();
                if is_missing(cell) {
                    cfg.missing_label.clone()
                } else {
                    cell.to_string()
                }
            })
            .collect();
        rows.push(Row { values, weight });
    }
    let layer_names = layer_cols
        .iter()
        .map(|&ci| raw.header[ci].clone())
        .collect();
    Ok(Dataset { rows, layer_names })
}

/// Collapse a clean [`Dataset`] into the grouped form, assigning block codes
/// per `cfg.default_sorting`.
pub fn group_dataset(ds: &Dataset, cfg: &IngestConfig) -> Result<GroupedTable> {
    ds.validate()?;
    let m = ds.layer_names.len();

    let mut grouped: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for row in &ds.rows {
        *grouped.entry(row.values.clone()).or_insert(0.0) += row.weight;
    }

    // per-layer label → total weight
    let mut label_weights: Vec<BTreeMap<&str, f64>> = vec![BTreeMap::new(); m];
    for (values, weight) in &grouped {
        for (layer, value) in values.iter().enumerate() {
            *label_weights[layer].entry(value.as_str()).or_insert(0.0) += *weight;
        }
    }

    let mut block_labels: Vec<Vec<String>> = Vec::with_capacity(m);
    let mut code_maps: Vec<BTreeMap<&str, u32>> = Vec::with_capacity(m);
    let mut rng = match cfg.default_sorting {
        DefaultSorting::Random => {
            let seed = cfg.seed.ok_or_else(|| {
                Error::InvalidConfig("default_sorting=random requires a seed".into())
            })?;
            Some(ChaCha8Rng::seed_from_u64(seed))
        }
        _ => None,
    };
    for weights in &label_weights {
        // BTreeMap iteration gives the alphabetical base order
        let mut labels: Vec<&str> = weights.keys().copied().collect();
        match cfg.default_sorting {
            DefaultSorting::Alphabetical => {}
            DefaultSorting::ReverseAlphabetical => labels.reverse(),
            DefaultSorting::Increasing => {
                labels.sort_by(|a, b| weights[a].total_cmp(&weights[b]).then(a.cmp(b)))
            }
            DefaultSorting::Decreasing => {
                labels.sort_by(|a, b| weights[b].total_cmp(&weights[a]).then(a.cmp(b)))
            }
            DefaultSorting::Random => labels.shuffle(rng.as_mut().unwrap()),
        }
        let map = labels
            .iter()
            .enumerate()
            .map(|(code, &label)| (label, code as u32))
            .collect();
        code_maps.push(map);
        block_labels.push(labels.into_iter().map(String::from).collect());
    }

    let mut coded: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (values, weight) in &grouped {
        let blocks: Vec<u32> = values
            .iter()
            .enumerate()
            .map(|(layer, value)| code_maps[layer][value.as_str()])
            .collect();
        *coded.entry(blocks).or_insert(0.0) += *weight;
    }

    let table = GroupedTable {
        combos: coded
            .into_iter()
            .map(|(blocks, weight)| Combo { blocks, weight })
            .collect(),
        layer_names: ds.layer_names.clone(),
        block_labels,
    };
    table.validate()?;
    Ok(table)
}

/// Full preprocessing: shape detection, cleaning, grouping, coding.
pub fn data_preprocess(raw: &RawTable, cfg: &IngestConfig) -> Result<GroupedTable> {
    let ds = resolve_dataset(raw, cfg)?;
    group_dataset(&ds, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(header: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    #[test]
    fn per_row_grouping_collapses_duplicates() {
        let raw = raw(
            &["tissue", "cluster"],
            &[&["T CELL", "4"], &["T CELL", "4"], &["B CELL", "4"]],
        );
        let g = data_preprocess(&raw, &IngestConfig::default()).unwrap();
        assert_eq!(g.n_bar(), 2);
        assert_eq!(g.total_weight(), 3.0);
        let b = g.block_labels[0].iter().position(|l| l == "B CELL").unwrap();
        let t = g.block_labels[0].iter().position(|l| l == "T CELL").unwrap();
        let wb = g.block_weight(0, b as u32);
        let wt = g.block_weight(0, t as u32);
        assert_eq!((wb, wt), (1.0, 2.0));
    }

    #[test]
    fn missing_values_get_default_label() {
        let raw = raw(
            &["organ", "cluster", "count"],
            &[&["BRAIN", "2", "5"], &["HEART", "NA", "3"], &["LIVER", "", "1"]],
        );
        let g = data_preprocess(&raw, &IngestConfig::default()).unwrap();
        assert!(g.block_labels[1].iter().any(|l| l == "Missing"));
        let missing_code = g.block_labels[1].iter().position(|l| l == "Missing").unwrap();
        assert_eq!(g.block_weight(1, missing_code as u32), 4.0);
    }

    #[test]
    fn alphabetical_codes() {
        let raw = raw(&["x", "y"], &[&["b", "p"], &["a", "p"], &["c", "q"]]);
        let g = data_preprocess(&raw, &IngestConfig::default()).unwrap();
        assert_eq!(g.block_labels[0], vec!["a", "b", "c"]);
        let cfg = IngestConfig {
            default_sorting: DefaultSorting::ReverseAlphabetical,
            ..Default::default()
        };
        let g = data_preprocess(&raw, &cfg).unwrap();
        assert_eq!(g.block_labels[0], vec!["c", "b", "a"]);
    }

    #[test]
    fn weight_orderings() {
        // weights: a=1, b=3, c=2
        let raw = raw(
            &["x", "y", "n"],
            &[&["a", "p", "1"], &["b", "p", "3"], &["c", "q", "2"]],
        );
        let cfg = IngestConfig {
            default_sorting: DefaultSorting::Increasing,
            ..Default::default()
        };
        let g = data_preprocess(&raw, &cfg).unwrap();
        assert_eq!(g.block_labels[0], vec!["a", "c", "b"]);
        let cfg = IngestConfig {
            default_sorting: DefaultSorting::Decreasing,
            ..Default::default()
        };
        let g = data_preprocess(&raw, &cfg).unwrap();
        assert_eq!(g.block_labels[0], vec!["b", "c", "a"]);
    }

    #[test]
    fn explicit_weight_column_and_duplicate_grouped_rows() {
        let raw = raw(
            &["n", "x", "y"],
            &[&["2", "a", "p"], &["3", "a", "p"], &["1", "b", "q"]],
        );
        let cfg = IngestConfig {
            weight_column: Some("n".into()),
            ..Default::default()
        };
        let g = data_preprocess(&raw, &cfg).unwrap();
        assert_eq!(g.n_bar(), 2);
        assert_eq!(g.total_weight(), 6.0);
    }

    #[test]
    fn two_columns_never_auto_detect_weights() {
        // both columns categorical even though the second is numeric
        let raw = raw(&["tissue", "cluster"], &[&["A", "1"], &["B", "2"]]);
        let g = data_preprocess(&raw, &IngestConfig::default()).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.total_weight(), 2.0);
    }

    #[test]
    fn trailing_numeric_column_is_weight() {
        let raw = raw(
            &["x", "y", "count"],
            &[&["a", "p", "2.5"], &["b", "q", "1.5"]],
        );
        let g = data_preprocess(&raw, &IngestConfig::default()).unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(g.total_weight(), 4.0);
    }

    #[test]
    fn errors_on_bad_input() {
        let empty = RawTable {
            header: vec!["a".into(), "b".into()],
            rows: vec![],
        };
        assert!(matches!(
            data_preprocess(&empty, &IngestConfig::default()),
            Err(Error::EmptyInput(_))
        ));

        let one_col = raw(&["a", "n"], &[&["x", "1"]]);
        let cfg = IngestConfig {
            weight_column: Some("n".into()),
            ..Default::default()
        };
        assert!(matches!(
            data_preprocess(&one_col, &cfg),
            Err(Error::TooFewLayers { found: 1 })
        ));

        let bad_weight = raw(&["x", "y", "n"], &[&["a", "p", "0"], &["b", "q", "1"]]);
        let cfg = IngestConfig {
            weight_column: Some("n".into()),
            ..Default::default()
        };
        assert!(matches!(
            data_preprocess(&bad_weight, &cfg),
            Err(Error::InvalidWeight { row: 0, .. })
        ));

        let nan_weight = raw(&["x", "y", "n"], &[&["a", "p", "abc"]]);
        let cfg = IngestConfig {
            weight_column: Some("n".into()),
            ..Default::default()
        };
        assert!(matches!(
            data_preprocess(&nan_weight, &cfg),
            Err(Error::InvalidWeight { row: 0, .. })
        ));

        assert!(matches!(
            data_preprocess(
                &raw(&["x", "y"], &[&["a", "p"]]),
                &IngestConfig {
                    weight_column: Some("nope".into()),
                    ..Default::default()
                }
            ),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn cells_are_trimmed_and_case_preserved() {
        let raw = raw(&["x", "y"], &[&[" a ", "p"], &["a", "q"], &["A", "q"]]);
        let g = data_preprocess(&raw, &IngestConfig::default()).unwrap();
        assert_eq!(g.block_labels[0], vec!["A", "a"]);
    }

    #[test]
    fn random_sorting_is_seed_stable() {
        let raw = raw(
            &["x", "y"],
            &[&["a", "p"], &["b", "q"], &["c", "p"], &["d", "q"], &["e", "p"]],
        );
        let cfg = IngestConfig {
            default_sorting: DefaultSorting::Random,
            seed: Some(7),
            ..Default::default()
        };
        let g1 = data_preprocess(&raw, &cfg).unwrap();
        let g2 = data_preprocess(&raw, &cfg).unwrap();
        assert_eq!(g1, g2);

        let cfg_no_seed = IngestConfig {
            default_sorting: DefaultSorting::Random,
            seed: None,
            ..Default::default()
        };
        assert!(data_preprocess(&raw, &cfg_no_seed).is_err());
    }

    #[test]
    fn tsv_reader() {
        let data = "x\ty\na\tp\nb\tq\n";
        let t = read_table_from(data.as_bytes(), b'\t').unwrap();
        assert_eq!(t.header, vec!["x", "y"]);
        assert_eq!(t.row_count(), 2);
    }

    #[test]
    fn quoted_cells_keep_embedded_delimiters() {
        let data = "x,y\n\"a, with comma\",p\nb,\"q\"\"quoted\"\n";
        let t = read_table_from(data.as_bytes(), b',').unwrap();
        let g = data_preprocess(&t, &IngestConfig::default()).unwrap();
        assert!(g.block_labels[0].iter().any(|l| l == "a, with comma"));
        assert!(g.block_labels[1].iter().any(|l| l == "q\"quoted"));
    }

    proptest! {
        #[test]
        fn total_weight_preserved(rows in proptest::collection::vec(
            (0u8..5, 0u8..4, 1u32..100), 1..60
        )) {
            let raw_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|(a, b, w)| vec![format!("a{a}"), format!("b{b}"), w.to_string()])
                .collect();
            let raw = RawTable {
                header: vec!["x".into(), "y".into(), "n".into()],
                rows: raw_rows,
            };
            let cfg = IngestConfig { weight_column: Some("n".into()), ..Default::default() };
            let g = data_preprocess(&raw, &cfg).unwrap();
            let total_in: f64 = rows.iter().map(|(_, _, w)| *w as f64).sum();
            prop_assert_eq!(g.total_weight(), total_in);
            let max_k = g.ks().into_iter().max().unwrap();
            prop_assert!(g.n_bar() >= max_k);
            prop_assert!(g.n_bar() <= rows.len());
        }

        #[test]
        fn total_weight_preserved_real_weights(rows in proptest::collection::vec(
            (0u8..5, 0u8..4, 0.001f64..50.0), 1..60
        )) {
            let raw_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|(a, b, w)| vec![format!("a{a}"), format!("b{b}"), w.to_string()])
                .collect();
            let raw = RawTable {
                header: vec!["x".into(), "y".into(), "n".into()],
                rows: raw_rows,
            };
            let cfg = IngestConfig { weight_column: Some("n".into()), ..Default::default() };
            let g = data_preprocess(&raw, &cfg).unwrap();
            // weights round-trip through decimal text, so compare to the
            // reparsed values
            let total_in: f64 = rows
                .iter()
                .map(|(_, _, w)| w.to_string().parse::<f64>().unwrap())
                .sum();
            prop_assert!((g.total_weight() - total_in).abs() <= 1e-9 * total_in);
        }

        #[test]
        fn regrouping_is_idempotent(rows in proptest::collection::vec(
            (0u8..4, 0u8..4, 1u32..9), 1..40
        )) {
            let raw_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|(a, b, w)| vec![format!("a{a}"), format!("b{b}"), w.to_string()])
                .collect();
            let raw = RawTable {
                header: vec!["x".into(), "y".into(), "n".into()],
                rows: raw_rows,
            };
            let cfg = IngestConfig { weight_column: Some("n".into()), ..Default::default() };
            let g1 = data_preprocess(&raw, &cfg).unwrap();

            // re-emit g1 as a grouped raw table and preprocess again
            let re_rows: Vec<Vec<String>> = g1
                .combos
                .iter()
                .map(|c| {
                    vec![
                        g1.block_labels[0][c.blocks[0] as usize].clone(),
                        g1.block_labels[1][c.blocks[1] as usize].clone(),
                        c.weight.to_string(),
                    ]
                })
                .collect();
            let raw2 = RawTable { header: vec!["x".into(), "y".into(), "n".into()], rows: re_rows };
            let g2 = data_preprocess(&raw2, &cfg).unwrap();
            prop_assert_eq!(g1, g2);
        }
    }
}
