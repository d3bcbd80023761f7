//! Dual bounds and primal heuristics for zero-forcing SDMA/OFDMA resource
//! allocation with minimum-rate constraints.
//!
//! [`dual::solve_dual`] yields an upper bound on the weighted sum rate,
//! [`recovery::recover_feasible`] and [`weights::weight_adjust`] produce
//! feasible allocations (lower bounds), and [`oracle::exact_enumeration`]
//! solves small instances exactly.

pub mod dual;
pub mod error;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod precompute;
pub mod recovery;
pub mod weights;

pub use dual::{
    eval_dual, power_allocation_fixed, set_score, solve_dual, user_power, DualEvalResult, DualParams, DualPoint,
    DualSolution,
};
pub use error::{Error, Result};
pub use model::{Allocation, ChannelTensor, ProblemInstance, ScenarioConfig};
pub use oracle::{exact_enumeration, OracleParams};
pub use precompute::{enumerate_sdma_sets, precompute_all, SdmaSet, SetPrecompute};
pub use recovery::{gap_percent, recover_feasible, RecoveryParams};
pub use weights::{weight_adjust, WeightParams};
