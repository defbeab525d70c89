//! Ordering and coloring optimization for alluvial (multipartite flow) diagrams.
//!
//! An alluvial diagram shows `m` categorical variables as columns of stacked
//! blocks, with each unique combination of categories drawn as a weighted
//! ribbon threading one block per column. How readable the diagram is depends
//! almost entirely on two choices this crate optimizes:
//!
//! * the order of the columns and of the blocks inside each column, chosen to
//!   minimize the total weighted number of ribbon crossings
//!   ([`layout::solve`]), and
//! * the assignment of colors to blocks, chosen to maximize the weight of
//!   flow that keeps its color between adjacent columns ([`color`]).
//!
//! The crossing-minimization pipeline builds a block dissimilarity matrix
//! from co-occurrence weights, runs the NeighborNet agglomeration on it to
//! get a circular ordering of all blocks, and scans every starting point of
//! that cycle for the layout with the smallest objective. Column order is
//! chosen by a traveling-salesman heuristic over pairwise layer
//! dissimilarities. Exact brute-force solvers for small instances live in
//! [`oracle`] and back the test suite.
//!
//! ```
//! use alluvium_core::{GroupedTable, layout};
//!
//! // three alluvia over two 2-block layers; the input order has 1 crossing
//! let table = GroupedTable::from_codes(
//!     &[2, 2],
//!     &[(vec![0, 0], 1.0), (vec![0, 1], 1.0), (vec![1, 0], 1.0)],
//! )?;
//! let solution = layout::solve(&table, &layout::SortConfig::default())?;
//! assert_eq!(solution.objective, 0.0);
//! # Ok::<(), alluvium_core::Error>(())
//! ```

pub mod color;
pub mod error;
pub mod ingest;
pub mod layer_order;
pub mod layout;
pub mod model;
pub mod neighbornet;
pub mod objective;
pub mod oracle;
pub mod synth;

mod fenwick;
mod matrix;

pub use error::{Error, Result};
pub use matrix::SymMatrix;
pub use model::{
    compute_stats, ColorAssignment, ColorLabel, Combo, Dataset, DatasetStats, GroupedTable,
    LayoutSolution,
};
