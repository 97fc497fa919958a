//! Tensor files, dataset manifests, normalization and preprocessing.

mod dataset;
pub mod format;
mod manifest;
mod normalize;
pub mod synthetic;
mod transform;

pub use dataset::{load_dataset, Dataset, FieldSample, Split, SplitKind};
pub use format::{read_any, read_tensor, write_tensor, AnyTensor};
pub use manifest::{DatasetManifest, Windowing, MANIFEST_KEYS};
pub use normalize::{NormPolicy, Normalizer, NORM_EPS};
pub use transform::{append_coords, concat_channels, darcy_subsample, grid_coordinate, ns_windows, select_channels};
