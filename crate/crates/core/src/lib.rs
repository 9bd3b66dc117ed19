//! Diverse stochastic planning for finite average-reward MDPs.
//!
//! Computes a small set of k diverse, near-optimal stationary stochastic
//! policies by maximizing a reward-plus-diversity objective over the product
//! of occupancy-measure polytopes. Diversity between two policies is the
//! Jensen-Shannon divergence between their state-action occupancy measures.
//!
//! The crate is organized around the pipeline:
//!
//! * [`mdp`] — the MDP data model, occupancy measures, policies, and
//!   conversions between them;
//! * [`polytope`] — the occupancy-measure polytope in standard form and
//!   linear programs over it (optimal policies, the Frank-Wolfe oracle);
//! * [`simplex`] — a dense two-phase revised simplex engine;
//! * [`objective`] — KL/JSD primitives, the compound objective, its analytic
//!   gradient, and the Lipschitz bound for the restricted polytope;
//! * [`solvers`] — Frank-Wolfe with backtracking line search, projected
//!   gradient ascent with Euclidean projection, and convergence monitors;
//! * [`gridworld`] — procedural four-room / nine-room benchmark worlds;
//! * [`render`] — SVG rendering of worlds and occupancy heatmaps.

pub mod gridworld;
pub mod mdp;
pub mod objective;
pub mod polytope;
pub mod render;
pub mod simplex;
pub mod solvers;

pub use mdp::{MdpModel, OccupancyMeasure, OccupancySet, StationaryPolicy};
pub use objective::{ObjectiveConfig, ObjectiveEval};
pub use polytope::{LpOracle, PolytopeSpec};
pub use simplex::{LpSolution, LpStatus};
pub use solvers::{SolveReport, SolverConfig};
