//! Exact machinery for small instances: exhaustive tree enumeration, the
//! mixed-integer model of the clustering-tree problem, its LP-file export,
//! and a checker that validates a tree against the model.

mod enumerate;
mod lp;
mod mio;

pub use enumerate::{enumerate_optimal, tree_count, MAX_ENUMERATED_TREES};
pub use lp::{export_lp, write_lp};
pub use mio::{
    build_mio_model, check_feasibility, default_big_m, derive_solution, evaluate_solution, fill_side_table,
    FeasibilityReport, LinearRow, MioMetadata, MioModel, NonlinearRow, RowFamily, Sense, Solution,
    VarKind, Variable, Violation, MAX_MIO_DEPTH, MAX_MIO_OBSERVATIONS,
};
