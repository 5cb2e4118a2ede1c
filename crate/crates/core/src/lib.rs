//! Constrained random-walk rounding of fractional points with exact matroid
//! and laminar preservation.

pub mod baselines;
pub mod io;
pub mod matroid;
pub mod numeric;
pub mod schedules;
pub mod walk;
