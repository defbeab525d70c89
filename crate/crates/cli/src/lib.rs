//! Command-line pipeline: preprocess → sort → color → emit JSON / SVG.
//!
//! Exit codes: 0 success, 2 usage errors (bad flags or flag combinations),
//! 1 data errors (unreadable or invalid input).

pub mod render;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use alluvium_core::color::{
    assign_colors_cluster, assign_colors_reference, overlap_matrix, ColorMode, ColorScheme,
    ReferenceSpec,
};
use alluvium_core::ingest::{data_preprocess, read_table, DefaultSorting, IngestConfig};
use alluvium_core::layout::{solve, SortConfig, SortMethod};
use alluvium_core::model::LayoutSolution;
use alluvium_core::neighbornet::build_distance_matrix;
use alluvium_core::objective::{pair_objective, total_objective, LayerPairView};
use alluvium_core::oracle::{
    brute_force_coloring, brute_force_layout, coloring_search_space, layout_search_space, OracleLimits,
};
use alluvium_core::{compute_stats, ColorAssignment, DatasetStats, Error, GroupedTable};

use render::{render_svg, RenderSpec};

#[derive(Parser)]
#[command(
    name = "alluvium",
    version,
    about = "Order and color the layers, blocks, and flows of alluvial diagrams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Instance sizes and permutation-space counts.
    Stats {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Crossing objective of the input order, per adjacent layer pair.
    Objective {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Optimize block (and optionally layer) order.
    Sort {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sort: SortArgs,
    },
    /// Optimize order, then assign block colors.
    Colors {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sort: SortArgs,
        #[command(flatten)]
        colors: ColorArgs,
    },
    /// Exact brute-force solution for small instances.
    Oracle {
        #[command(flatten)]
        input: InputArgs,
        /// Which problem to solve exactly.
        #[arg(long, default_value = "layout", value_parser = ["layout", "coloring"])]
        target: String,
        /// Keep the layer order fixed while enumerating block orders.
        #[arg(long)]
        fix_layer_order: bool,
    },
    /// Full pipeline plus an SVG of the optimized diagram.
    Render {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        sort: SortArgs,
        #[command(flatten)]
        colors: ColorArgs,
        /// Where to write the SVG.
        #[arg(long)]
        svg: PathBuf,
        #[arg(long, default_value_t = 960.0)]
        width: f64,
        #[arg(long, default_value_t = 600.0)]
        height: f64,
    },
}

#[derive(Args)]
struct InputArgs {
    /// CSV or TSV file, UTF-8, first row is the header.
    #[arg(long)]
    input: PathBuf,
    /// Weight column name; when omitted, a trailing all-numeric column is
    /// used (inputs with only two columns are always treated as per-row).
    #[arg(long = "weight-col")]
    weight_col: Option<String>,
    /// alphabetical | reverse_alphabetical | increasing | decreasing | random
    #[arg(long = "default-sorting", default_value = "alphabetical")]
    default_sorting: String,
    /// Seed for default-sorting=random and --method random.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SortArgs {
    /// neighbornet | tsp | greedy_wolf | greedy_wblf | random | none
    #[arg(long, default_value = "neighbornet")]
    method: String,
    /// Also optimize the layer order.
    #[arg(long = "optimize-layers")]
    optimize_layers: bool,
    /// Recompute the layer order at every cycle start (slow, for verification).
    #[arg(long = "layer-order-every-start")]
    layer_order_every_start: bool,
    /// Scalar multiplier on the block distance matrix.
    #[arg(long = "c-scale", default_value_t = 1.0)]
    c_scale: f64,
    /// Debug dump of the block distance matrix as CSV.
    #[arg(long = "dump-distance-matrix")]
    dump_distance_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct ColorArgs {
    /// cluster | reference
    #[arg(long = "color-mode", default_value = "cluster")]
    color_mode: String,
    /// leftmost | rightmost | rolling_left | rolling_right | <layer index>
    #[arg(long = "reference-layer", default_value = "leftmost")]
    reference_layer: String,
    /// Minimum overlap score required to inherit a reference color.
    #[arg(long = "min-parent-score", default_value_t = 0.0)]
    min_parent_score: f64,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

/// Run the CLI against explicit arguments and return the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (also for --help/--version)
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stats { input } => {
            let (g, ctx) = ingest(&input)?;
            let doc = StatsOutput {
                schema: SCHEMA_VERSION,
                version: env!("CARGO_PKG_VERSION").into(),
                command: "stats".into(),
                input: ctx.input_name.clone(),
                stats: stats_doc(&compute_stats(&g, inferred_n(&g))),
                layer_names: g.layer_names.clone(),
                block_labels: g.block_labels.clone(),
            };
            emit(&input.out, &to_json(&doc))
        }
        Command::Objective { input } => {
            let (g, ctx) = ingest(&input)?;
            let sol = LayoutSolution::identity(&g);
            let pairs: Vec<PairObjectiveDoc> = (0..g.m() - 1)
                .map(|r| {
                    let view = LayerPairView::from_table(
                        &g,
                        r,
                        r + 1,
                        &sol.block_orders[r],
                        &sol.block_orders[r + 1],
                    );
                    PairObjectiveDoc {
                        layers: [r, r + 1],
                        objective: pair_objective(&view),
                    }
                })
                .collect();
            let doc = ObjectiveOutput {
                schema: SCHEMA_VERSION,
                version: env!("CARGO_PKG_VERSION").into(),
                command: "objective".into(),
                input: ctx.input_name.clone(),
                objective: pairs.iter().map(|p| p.objective).sum(),
                pairs,
            };
            emit(&input.out, &to_json(&doc))
        }
        Command::Sort { input, sort } => {
            let run = pipeline(&input, &sort, None)?;
            emit(&input.out, &to_json(&run.doc))
        }
        Command::Colors {
            input,
            sort,
            colors,
        } => {
            let run = pipeline(&input, &sort, Some(&colors))?;
            emit(&input.out, &to_json(&run.doc))
        }
        Command::Oracle {
            input,
            target,
            fix_layer_order,
        } => {
            let (g, ctx) = ingest(&input)?;
            let limits = OracleLimits::default();
            let doc = match target.as_str() {
                "coloring" => {
                    let ca = brute_force_coloring(&g, &limits)?;
                    OracleOutput {
                        schema: SCHEMA_VERSION,
                        version: env!("CARGO_PKG_VERSION").into(),
                        command: "oracle".into(),
                        input: ctx.input_name.clone(),
                        target,
                        search_space: coloring_search_space(&g).to_string(),
                        solution: None,
                        colors: Some(colors_doc(&ca, "oracle")),
                    }
                }
                _ => {
                    let sol = brute_force_layout(&g, fix_layer_order, &limits)?;
                    OracleOutput {
                        schema: SCHEMA_VERSION,
                        version: env!("CARGO_PKG_VERSION").into(),
                        command: "oracle".into(),
                        input: ctx.input_name.clone(),
                        target,
                        search_space: layout_search_space(&g, fix_layer_order).to_string(),
                        solution: Some(solution_doc(&sol)),
                        colors: None,
                    }
                }
            };
            emit(&input.out, &to_json(&doc))
        }
        Command::Render {
            input,
            sort,
            colors,
            svg,
            width,
            height,
        } => {
            let run = pipeline(&input, &sort, Some(&colors))?;
            let assignment = run.assignment.as_ref().expect("render always colors");
            let spec = RenderSpec {
                width,
                height,
                ..Default::default()
            };
            let svg_text = render_svg(&run.table, &run.solution, assignment, &spec)?;
            std::fs::write(&svg, svg_text)
                .map_err(|e| CliError::Data(format!("{}: {e}", svg.display())))?;
            emit(&input.out, &to_json(&run.doc))
        }
    }
}

struct IngestContext {
    input_name: String,
    default_sorting: DefaultSorting,
}

fn ingest(input: &InputArgs) -> Result<(GroupedTable, IngestContext), CliError> {
    let default_sorting = DefaultSorting::parse(&input.default_sorting)?;
    if default_sorting == DefaultSorting::Random && input.seed.is_none() {
        return Err(CliError::Usage(
            "--default-sorting random requires --seed".into(),
        ));
    }
    let cfg = IngestConfig {
        weight_column: input.weight_col.clone(),
        default_sorting,
        missing_label: "Missing".into(),
        seed: input.seed,
    };
    let raw = read_table(&input.input)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.input.display())))?;
    let g = data_preprocess(&raw, &cfg)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.input.display())))?;
    Ok((
        g,
        IngestContext {
            input_name: input.input.display().to_string(),
            default_sorting,
        },
    ))
}

struct PipelineRun {
    doc: ResultDocument,
    table: GroupedTable,
    solution: LayoutSolution,
    /// In original layer indexing, like `doc.colors`.
    assignment: Option<ColorAssignment>,
}

fn pipeline(
    input: &InputArgs,
    sort: &SortArgs,
    colors: Option<&ColorArgs>,
) -> Result<PipelineRun, CliError> {
    let method = SortMethod::parse(&sort.method)?;
    if method == SortMethod::Random && input.seed.is_none() {
        return Err(CliError::Usage("--method random requires --seed".into()));
    }
    if sort.c_scale <= 0.0 || !sort.c_scale.is_finite() {
        return Err(CliError::Usage(format!(
            "--c-scale must be positive, got {}",
            sort.c_scale
        )));
    }
    let (g, ctx) = ingest(input)?;

    if let Some(path) = &sort.dump_distance_matrix {
        let dm = build_distance_matrix(&g, sort.c_scale, None)?;
        let mut csv_text = String::from("node");
        let label = |i: usize| {
            let (layer, code) = dm.node_index[i];
            format!("{}:{}", g.layer_names[layer], g.block_labels[layer][code as usize])
        };
        for i in 0..dm.size() {
            let _ = write!(csv_text, ",{}", label(i));
        }
        csv_text.push('\n');
        for i in 0..dm.size() {
            let _ = write!(csv_text, "{}", label(i));
            for j in 0..dm.size() {
                let _ = write!(csv_text, ",{}", dm.d.get(i, j));
            }
            csv_text.push('\n');
        }
        std::fs::write(path, csv_text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }

    let cfg = SortConfig {
        method,
        optimize_layers: sort.optimize_layers,
        layer_order_every_start: sort.layer_order_every_start,
        c_scale: sort.c_scale,
        seed: input.seed,
    };
    let objective_before = total_objective(&g, &LayoutSolution::identity(&g))?;
    let sol = solve(&g, &cfg)?;

    let colored = match colors {
        Some(color_args) => Some(color_pipeline(&g, &sol, color_args)?),
        None => None,
    };
    let (assignment, colors_doc_value) = match colored {
        Some((assignment, doc)) => (Some(assignment), Some(doc)),
        None => (None, None),
    };

    let doc = ResultDocument {
        schema: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").into(),
        command: if colors.is_some() { "colors" } else { "sort" }.into(),
        input: ctx.input_name.clone(),
        method: MethodDoc {
            method: method.name().into(),
            default_sorting: ctx.default_sorting.name().into(),
            optimize_layers: sort.optimize_layers,
            layer_order_every_start: sort.layer_order_every_start,
            c_scale: sort.c_scale,
            seed: input.seed,
        },
        stats: stats_doc(&compute_stats(&g, inferred_n(&g))),
        layer_names: g.layer_names.clone(),
        block_labels: g.block_labels.clone(),
        objective_before,
        objective_after: sol.objective,
        solution: solution_doc(&sol),
        colors: colors_doc_value,
    };
    Ok(PipelineRun {
        doc,
        table: g,
        solution: sol,
        assignment,
    })
}

/// Color the table as displayed: bake the layer order in, color, then map
/// the labels back to original layer indices.
fn color_pipeline(
    g: &GroupedTable,
    sol: &LayoutSolution,
    args: &ColorArgs,
) -> Result<(ColorAssignment, ColorsDoc), CliError> {
    let mode = match args.color_mode.as_str() {
        "cluster" => ColorMode::Cluster,
        "reference" => ColorMode::Reference,
        other => {
            return Err(CliError::Usage(format!("unknown color mode {other:?}")));
        }
    };
    let reference = match args.reference_layer.as_str() {
        "leftmost" => ReferenceSpec::Leftmost,
        "rightmost" => ReferenceSpec::Rightmost,
        "rolling_left" => ReferenceSpec::RollingLeft,
        "rolling_right" => ReferenceSpec::RollingRight,
        other => match other.parse::<usize>() {
            Ok(idx) => ReferenceSpec::Layer(idx),
            Err(_) => {
                return Err(CliError::Usage(format!(
                    "unknown reference layer {other:?}"
                )));
            }
        },
    };
    let scheme = ColorScheme {
        mode,
        cluster_resolution: 1.0,
        reference,
        min_parent_score: args.min_parent_score,
    };
    let display = g.permute_layers(&sol.layer_order)?;
    let om = overlap_matrix(&display);
    let assignment = match mode {
        ColorMode::Cluster => assign_colors_cluster(&om, &scheme)?,
        ColorMode::Reference => assign_colors_reference(&om, &scheme)?,
    };
    // colors[p] belongs to original layer sol.layer_order[p]
    let mut per_original: Vec<Vec<alluvium_core::ColorLabel>> =
        (0..g.m()).map(|_| Vec::new()).collect();
    for (p, layer_colors) in assignment.colors.iter().enumerate() {
        per_original[sol.layer_order[p]] = layer_colors.clone();
    }
    let reindexed = ColorAssignment {
        colors: per_original,
        matched_weight: assignment.matched_weight,
    };
    let doc = colors_doc(&reindexed, &args.color_mode);
    Ok((reindexed, doc))
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsDoc {
    pub n: u64,
    pub m: usize,
    pub n_bar: usize,
    pub k: Vec<usize>,
    pub k_sum: usize,
    pub k_prod: String,
    pub s_p: String,
    pub s_total: String,
    pub s_valid: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub layer_order: Vec<usize>,
    pub block_orders: Vec<Vec<u32>>,
    pub objective: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ColorLabelDoc {
    pub community: u32,
    pub variant: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ColorsDoc {
    pub mode: String,
    pub matched_weight: f64,
    /// Per original layer, indexed by block code.
    pub layers: Vec<Vec<ColorLabelDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MethodDoc {
    pub method: String,
    pub default_sorting: String,
    pub optimize_layers: bool,
    pub layer_order_every_start: bool,
    pub c_scale: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema: u32,
    pub version: String,
    pub command: String,
    pub input: String,
    pub method: MethodDoc,
    pub stats: StatsDoc,
    pub layer_names: Vec<String>,
    pub block_labels: Vec<Vec<String>>,
    pub objective_before: f64,
    pub objective_after: f64,
    pub solution: SolutionDoc,
    pub colors: Option<ColorsDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsOutput {
    pub schema: u32,
    pub version: String,
    pub command: String,
    pub input: String,
    pub stats: StatsDoc,
    pub layer_names: Vec<String>,
    pub block_labels: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairObjectiveDoc {
    pub layers: [usize; 2],
    pub objective: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ObjectiveOutput {
    pub schema: u32,
    pub version: String,
    pub command: String,
    pub input: String,
    pub objective: f64,
    pub pairs: Vec<PairObjectiveDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OracleOutput {
    pub schema: u32,
    pub version: String,
    pub command: String,
    pub input: String,
    pub target: String,
    pub search_space: String,
    pub solution: Option<SolutionDoc>,
    pub colors: Option<ColorsDoc>,
}

fn stats_doc(stats: &DatasetStats) -> StatsDoc {
    StatsDoc {
        n: stats.n,
        m: stats.m,
        n_bar: stats.n_bar,
        k: stats.k.clone(),
        k_sum: stats.k_sum,
        k_prod: stats.k_prod.to_string(),
        s_p: stats.s_p.to_string(),
        s_total: stats.s_total.to_string(),
        s_valid: stats.s_valid.to_string(),
    }
}

fn solution_doc(sol: &LayoutSolution) -> SolutionDoc {
    SolutionDoc {
        layer_order: sol.layer_order.clone(),
        block_orders: sol.block_orders.clone(),
        objective: sol.objective,
    }
}

fn colors_doc(ca: &ColorAssignment, mode: &str) -> ColorsDoc {
    ColorsDoc {
        mode: mode.into(),
        matched_weight: ca.matched_weight,
        layers: ca
            .colors
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|c| ColorLabelDoc {
                        community: c.community,
                        variant: c.variant,
                    })
                    .collect()
            })
            .collect(),
    }
}

/// Observation count to report: the weight total when all weights are
/// counts, the number of distinct combos otherwise.
pub fn inferred_n(g: &GroupedTable) -> u64 {
    let integral = g
        .combos
        .iter()
        .all(|c| (c.weight - c.weight.round()).abs() < 1e-9);
    if integral {
        g.total_weight().round() as u64
    } else {
        g.n_bar() as u64
    }
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("documents always serialize");
    text.push('\n');
    text
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
