//! Configuration files, checkpoints, the run store and plot output.

mod checkpoint;
mod plot;
mod store;

use std::path::Path;

use crate::config::{config_from_str, RunConfig};
use crate::error::Result;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, read_manifest, save_checkpoint, Checkpoint, FieldEntry, Manifest, CHECKPOINT_FORMAT_VERSION};
pub use plot::{emit_plot_data, render_decay_svg, write_diagnostics_csv, write_physical_csv, PlotKind};
pub use store::{read_diagnostics_csv, DiagnosticsWriter, RunDir, RunStore};

/// Read and validate a JSON config file. Unknown keys are rejected and
/// errors name the offending key path.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    config_from_str(&text)
}
