//! Frame and slice I/O, center-slice extraction, augmentation and dataset
//! manifests.

pub mod augment;
pub mod frames;
pub mod manifest;
pub mod pgm;
pub mod slices;
mod types;

pub use augment::{augment, expand_pool, AugmentSpec, Family, MirrorAxis, Transform};
pub use frames::{load_frames, write_frames, FrameSequence};
pub use manifest::{DatasetManifest, ManifestRow};
pub use pgm::GrayImage;
pub use slices::{extract_center_slices, from_net_output, to_net_input, Provenance, SliceImage};
pub use types::{ClassLabel, Eye, Orientation, Role};
