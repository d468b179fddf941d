//! Image I/O, run configuration, batch processing and run manifests.
//!
//! A batch run enhances every PNG/JPEG in a directory, writes one PNG per
//! input, one JSON manifest line per output and a CSV summary. Each image
//! gets its own seed, `seed ⊕ h(stem)`, so results do not depend on the
//! order or parallelism of the batch, and any manifest line can be replayed
//! bit for bit with [`replay`].

mod batch;
mod config;
mod io;

pub use batch::{
    image_seed, list_images, read_manifest, replay, run_batch, write_manifest, write_summary_csv,
    Replay, RunManifest, TraceSummary,
};
pub use config::{ConfigOverrides, DecomposerKind, RunConfig};
pub use io::{center_crop_resize, load_image, save_image, ResizeRecord};
