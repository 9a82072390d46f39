//! Result files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::run::RunOutput;

/// Renders every output file in memory first so a failed run leaves nothing
/// on disk.
pub fn render(out: &RunOutput) -> Result<Vec<(String, Vec<u8>)>> {
    let r = &out.result;
    let mut files = Vec::new();
    for f in &r.formats {
        files.push((
            format!("{}_{}.csv", r.scenario.name, f.format.name()),
            f.curve.to_csv().into_bytes(),
        ));
    }
    let mut json = serde_json::to_string_pretty(r).context("serializing result")?;
    json.push('\n');
    files.push(("result.json".to_string(), json.into_bytes()));
    Ok(files)
}

pub fn write_outputs(out: &RunOutput, dir: &Path, dumps: bool) -> Result<Vec<PathBuf>> {
    let files = render(out)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let p = dir.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        written.push(p);
    }
    if dumps && !out.dumps.is_empty() {
        let d = dir.join("dumps");
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        for dump in &out.dumps {
            dump.data
                .write(&d, &dump.stem)
                .with_context(|| format!("writing dump {}", dump.stem))?;
        }
        written.push(d);
    }
    Ok(written)
}
