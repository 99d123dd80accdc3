//! Cramér-Rao bounds and antenna placement for collocated MIMO radar arrays
//! observing targets that straddle range-resolution cells.

pub mod scenario;
pub mod signal;
pub mod fim;
pub mod placement;
pub mod sdp;
pub mod mc;
pub mod report;
pub mod cli;
