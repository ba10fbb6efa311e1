//! Persistence and ingestion: activation-map archives, score CSVs, run
//! manifests and face images.

pub mod amap;
pub mod image;
pub mod manifest;
pub mod scores;

pub use amap::{encode_amap_archive, read_amap_archive, write_amap_archive};
pub use image::load_face_image;
pub use manifest::{CohortDef, CohortFilter, CohortManifest};
pub use scores::{read_scores_csv, write_scores_csv};
