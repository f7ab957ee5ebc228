//! On-disk artifacts: label/image PNGs, SEGP probability maps, JSONL
//! manifests, overlap resolution and the synthetic dataset generator.

pub mod manifest;
pub mod overlap;
pub mod png_io;
pub mod segp;
pub mod synth;

pub use manifest::{build_manifest, SampleEntry, SampleManifest};
pub use overlap::{rarity_priority, resolve_overlaps, MultiLabelMap};
pub use png_io::{concat_rgbnir, read_image, read_label_map, write_image, write_label_map};
pub use segp::{read_prob_map, write_prob_map};
pub use synth::{generate_synthetic_dataset, SyntheticDataset, SyntheticSpec};
