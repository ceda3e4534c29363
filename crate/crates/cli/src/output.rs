use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use crate::usage;

/// Creates `dir`, refusing to reuse a non-empty one unless `force`.
pub fn prepare_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(usage(format!(
                "{} exists and is not a directory",
                dir.display()
            )));
        }
        let non_empty = std::fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            return Err(usage(format!(
                "{} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Opens `path` for writing, refusing to replace an existing file unless
/// `force`.
pub fn create_file(path: &Path, force: bool) -> anyhow::Result<BufWriter<File>> {
    if path.exists() && !force {
        return Err(usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writer for an optional output file, or stdout.
pub fn sink(path: Option<&Path>, force: bool) -> anyhow::Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(create_file(p, force)?)),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = create_file(path, true)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn print_json(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}
