//! Conditional entropy bounds and capacity regions of discrete degraded
//! broadcast channels.

pub mod capacity;
pub mod channel;
pub mod closed_form;
pub mod encode;
pub mod fstar;
pub mod hull;
pub mod io;
pub mod oracle;
pub mod error;
pub mod format;
pub mod lp;
pub mod par;
pub mod prob;
pub mod symmetry;

pub use error::{DbcError, Result};
pub use par::Exec;
pub use prob::{ProbVector, SimplexGrid, StochasticMatrix, TransmissionStrategy};
