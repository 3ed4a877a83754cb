//! Response-space partitions, the covariate grid, and tuning schedules.

mod epp;
mod partition;
mod schedule;
mod xgrid;

pub use epp::{check_epp_prob, epp_offset, epp_partition, EppPartition};
pub use partition::{grid_partition, int_root_ceil, Domain, Partition};
pub use schedule::{default_schedule, probe_grid, validate_schedule, Param, RatioTrace, Schedule, Sigma0Check, ValidationReport};
pub use xgrid::{x_grid, XGrid};
