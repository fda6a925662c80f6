//! Comparison algorithms: Space-Saving and CM/Count sketches with a min-heap.

mod heap;
pub mod sketch_heap;
pub mod space_saving;

pub use sketch_heap::{CmHeap, CountHeap, CountMinRows, CountRows, SketchHeap, SketchHeapConfig};
pub use space_saving::{SpaceSaving, SS_ENTRY_BYTES};
