//! Network structure: slots, valuations, the operation-node contract, and
//! structural validation.

mod egdn;
mod error;
mod operator;
mod slot;
mod valuation;

pub use egdn::{build_network, EditRecord, Egdn, EgdnBuilder, OpNode, Origin};
pub use error::NetworkError;
pub use operator::{
    NodeClass, OpError, Operator, Ports, Properties, SlotDeltas, UpdateInput,
};
#[allow(unused_imports)]
pub(crate) use operator::all_outputs;
pub use slot::{OpId, Slot, SlotId, SlotKind, SlotTable};
pub use valuation::Valuation;
