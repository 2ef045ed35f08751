//! Model files: a text header describing the architecture and the named
//! blocks, a line `end`, then every block as little-endian `f64`s.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::arch::ArchitectureDescriptor;
use crate::error::{GanError, Result};
use crate::model::GanModel;

pub const MAGIC: &str = "corrgan-gan-checkpoint";
pub const VERSION: u32 = 1;

pub fn to_bytes(model: &GanModel) -> Vec<u8> {
    let mut header = format!("{MAGIC} {VERSION}\nstep={}\nseed={}\n", model.step(), model.seed());
    header.push_str(&model.arch().to_lines());
    let blocks = model.blocks();
    for b in &blocks {
        header.push_str(&format!("block={} {}\n", b.name, b.len));
    }
    header.push_str("end\n");
    let values = model
        .generator_params()
        .iter()
        .chain(model.discriminator_params())
        .chain(model.generator_state());
    let mut out = header.into_bytes();
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<GanModel> {
    let bad = |msg: String| GanError::Checkpoint { path: origin.to_path_buf(), msg };
    let end = bytes
        .windows(4)
        .position(|w| w == b"end\n")
        .ok_or_else(|| bad("header is not terminated by `end`".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = header.lines();
    let first = lines.next().unwrap_or_default();
    if first != format!("{MAGIC} {VERSION}") {
        return Err(bad(format!("unsupported header {first:?}")));
    }
    let mut fields = HashMap::new();
    let mut declared = Vec::new();
    for line in lines {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed line {line:?}")))?;
        if k == "block" {
            let (name, len) = v.split_once(' ').ok_or_else(|| bad(format!("malformed block {v:?}")))?;
            let len: usize = len.parse().map_err(|_| bad(format!("bad block length {len:?}")))?;
            declared.push((name.to_string(), len));
        } else {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    let num = |k: &str| -> Result<u64> {
        fields
            .get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("missing or bad {k}")))
    };
    let (step, seed) = (num("step")?, num("seed")?);
    let arch = ArchitectureDescriptor::from_fields(&fields)?;

    let body = &bytes[end + 4..];
    if body.len() % 8 != 0 {
        return Err(bad("payload is not a whole number of f64 values".into()));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let template = crate::model::init_model(&arch, 0)?;
    let expected: Vec<(String, usize)> = template.blocks().into_iter().map(|b| (b.name, b.len)).collect();
    if declared != expected {
        return Err(bad("block table does not match the architecture".into()));
    }
    let g = template.generator_params().len();
    let d = template.discriminator_params().len();
    let s = template.generator_state().len();
    if values.len() != g + d + s {
        return Err(bad(format!("expected {} values, found {}", g + d + s, values.len())));
    }
    GanModel::from_parts(
        arch,
        values[..g].to_vec(),
        values[g..g + d].to_vec(),
        values[g + d..].to_vec(),
        step,
        seed,
    )
}

pub fn save_checkpoint(model: &GanModel, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| GanError::io(dir, e))?;
    }
    fs::write(path, to_bytes(model)).map_err(|e| GanError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<GanModel> {
    let bytes = fs::read(path).map_err(|e| GanError::io(path, e))?;
    from_bytes(&bytes, path)
}
