//! LDGM quantization codes for MSE quantization of `R^n`.

pub mod beq;
pub mod bounds;
pub mod bp;
pub mod codes;
pub mod de;
pub mod error;
pub mod exit_ea;
pub mod lp;
pub mod messages;
pub mod numeric;
pub mod pacing;
pub mod rng;
pub mod tcq;

pub use bounds::{ShapingReport, SourceModel};
pub use codes::{DegreeDistribution, GrayMap, LdgmCode};
pub use error::{Error, Result};
pub use messages::{Message, QuantizedDensity};
