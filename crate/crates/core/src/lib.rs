//! Stability-driven clustering of observed decisions.
//!
//! Each observation is a decision taken by a decision-maker who (approximately)
//! solves a linear program `min c'x s.t. A x >= b` with their own feasible
//! region. The crate groups observations into clusters and infers one shared,
//! L1-normalized cost vector per cluster so that the worst-case distance between
//! any observation and the optimal face of its own linear program under the
//! cluster's cost vector is as small as possible.
//!
//! The building blocks are a dense simplex ([`lp`]), a binary branch-and-bound
//! ([`mip`]), the domain model ([`model`]), the instability measure
//! ([`instability`]), k-means ([`kmeans`]), the lower/upper-bound MIP
//! formulations ([`formulation`]), the end-to-end methods ([`pipeline`]),
//! instance generators ([`datagen`]) and exhaustive reference solvers for tiny
//! instances ([`oracle`]).

pub mod datagen;
pub mod error;
pub mod formulation;
mod incumbent;
pub mod instability;
pub mod kmeans;
pub mod lp;
pub mod mip;
pub mod model;
pub mod pipeline;
pub mod oracle;
mod simplex;

pub use error::{Error, Result};
pub use lp::{row_max, solve_lp, LpModel, LpSolution, LpStatus, Row, RowSense, Tolerances};
pub use mip::{
    export_lp_file, solve_mip, validate_big_m, BigMEntry, BigMWarning, BnbConfig, Branching, MipModel, MipSolution,
    MipStats, MipStatus, NodeOrder,
};
pub use model::{
    forward_solve, normalize_rows, preflight, Certificate, ClusterSolution, CostVector, DataItem, Dataset, Dmp,
    NormKind, PreflightReport, Provenance,
};
pub use instability::{evaluate, worst_case_distance, InstabilityReport};
pub use kmeans::{kmeans, KmeansResult};
pub use formulation::{
    build_sc_lb, build_sc_ub, compute_big_m, extract_solution, strict_cone_check, AlphaHat, BigMConfig, BigMStrategy,
    ScVariableMap,
};
pub use pipeline::{
    compare, run_ci, run_ic, run_sc, warm_start_assemble, BoundSide, BoundSolve, ComparisonReport, HeuristicOutcome,
    MethodReport, PipelineConfig, ScOutcome,
};
pub use datagen::{box_example, embedded_diet_table, gen_diet, gen_synthetic, DietSpec, DietTable, SyntheticSpec};
