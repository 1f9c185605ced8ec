//! Training-time tricks for object detectors that cost nothing at inference,
//! together with the evaluation tools needed to measure them.
//!
//! Every randomized operation takes an explicit [`RngState`], so any result
//! can be reproduced from its seed.

pub mod augment;
pub mod elephant;
mod error;
pub mod eval;
pub mod geom;
pub mod io;
pub mod mixup;
pub mod raster;
pub mod rng;
pub mod sample;
pub mod schedule;
pub mod syncbn;
pub mod targets;

pub use error::{Error, Result};
pub use geom::{clip_bbox, iou, BBox};
pub use raster::ImageBuffer;
pub use rng::RngState;
pub use sample::{hflip, ObjectLabel, Sample};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
