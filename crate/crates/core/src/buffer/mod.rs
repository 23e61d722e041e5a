//! The in-memory layer: budget split, the two input buffers, and per-worker
//! output shares.

mod cache;
mod former;
mod output;
mod plan;
mod stats;

pub use cache::{LatterCache, PinnedBlock, RowView};
pub use former::FormerSlot;
pub use output::{OutputShare, Segment, StageOutcome};
pub use plan::{minimum_capacity, output_buffer_bytes, plan_buffers, BufferPlan};
pub(crate) use stats::bump;
pub use stats::{IoSnapshot, IoStats};
