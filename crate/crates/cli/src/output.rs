//! Output helpers: atomic file writes, metadata headers, and the fixed
//! numeric format (17 significant digits, for bit-faithful regression diffs).

use std::io::Write;
use std::path::Path;

use anyhow::Context;

use crate::config::{RunConfig, SCHEMA_VERSION};

pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comment header embedded at the top of every CSV output.
pub fn csv_header(run: &RunConfig, command_line: &str) -> String {
    format!(
        "# schema={SCHEMA_VERSION}\n# seed={}\n# model_hash={}\n# command={}\n",
        run.seed, run.model_hash, command_line
    )
}

/// Writes via a temporary file in the target directory plus a rename, so
/// readers never observe a half-written file.
pub fn atomic_write(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("renaming into place: {}", path.display()))?;
    Ok(())
}

/// Column label for one state: the coordinate tuple joined by underscores.
pub fn state_labels(space: &recombinator::type_space::TypeSpace) -> Vec<String> {
    (0..space.total_size())
        .map(|idx| {
            let coords = space.coords(idx).expect("index in range");
            let mut label = String::from("w");
            for c in coords {
                label.push('_');
                label.push_str(&c.to_string());
            }
            label
        })
        .collect()
}
