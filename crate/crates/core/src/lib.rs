// SPDX-License-Identifier: Apache-2.0

//! Bounding-box suppression with IoU-metric hashing.
//!
//! * [`geometry`]: boxes and IoU.
//! * [`iouhash`]: mapping boxes to discrete cells.
//! * [`bound`]: the minimum IoU of two boxes sharing a cell.
//! * [`suppress`]: NMS, SoftNMS, hashing NMS and the pre-filter pipeline.
//! * [`bench`]: synthetic scenes and timing reports.
//! * [`flat`]: entry points over flat numeric buffers, for foreign bindings.

pub mod bench;
pub mod bound;
pub mod error;
pub mod flat;
pub mod geometry;
pub mod iouhash;
pub mod suppress;

pub use bound::{lower_bound, nonzero_condition, CellOffset, CornerConfig};
pub use error::{Error, Result};
pub use geometry::{iou, BBox, CornerBox};
pub use iouhash::{
    cell_geometry, hash_family, iou_hash, pack_code, unpack_code, CellGeometry, HashCode,
    HashParams,
};
pub use suppress::{
    hnms, multi_hnms, nms, prefilter_pipeline, soft_nms, Detections, KeepResult, PipelineResult,
    SoftDecay, SoftNmsParams, Stage2,
};

/// Version of the JSON and CSV output schemas.
pub const SCHEMA_VERSION: u32 = 1;
