//! Built-in operation nodes.

mod common;
mod composite;
pub mod expr;
mod group;
mod input;
mod join;
mod numeric;
mod pattern;
mod restrict;
mod sync_bi;
mod sync_uni;

pub use composite::Composite;
pub use group::{Expression, GroupCount, GroupExpr, GroupSum};
pub use input::{EdgeInput, NodeInput};
pub use join::{AntiJoin, Join};
pub use numeric::ExactSum;
pub use pattern::{Dependency, PatternEdge, PatternMatch, PatternSpec};
pub use restrict::Restrict;
pub use sync_bi::{BiMapping, SyncBi};
pub use sync_uni::{
    ElemRef, ParentLink, SyncRule, SyncRuleSet, SyncUni, TargetEdge, TargetVertex, LINK_SOURCE,
    LINK_TARGET, LINK_TYPE,
};
