//! Checkpoint file: a text manifest followed by raw parameter values.
//!
//! ```text
//! xtcd-checkpoint 1
//! channels=16,16,32,64,128
//! encoder_depths=2,2,6,2
//! decoder_depths=2,2,2,2
//! heads=4
//! patch_capacity=1024
//! voxel=0.5
//! base_grid=1
//! ti_enabled=true
//! mt_enabled=true
//! param embed.weight 4 16
//! param embed.bias 1 16
//! ...
//! end
//! ```
//!
//! After the `end` line come the values of every listed parameter, in
//! manifest order and row-major within a parameter, as little-endian `f64`.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::keyvalue::{join, parse_array, parse_bool, parse_value, split_pair};

pub const CHECKPOINT_MAGIC: &str = "xtcd-checkpoint 1";

pub fn write_checkpoint(model: &Model, mut w: impl Write) -> std::io::Result<()> {
    let c = &model.config;
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    writeln!(w, "channels={}", join(&c.channels))?;
    writeln!(w, "encoder_depths={}", join(&c.encoder_depths))?;
    writeln!(w, "decoder_depths={}", join(&c.decoder_depths))?;
    writeln!(w, "heads={}", c.heads)?;
    writeln!(w, "patch_capacity={}", c.patch_capacity)?;
    writeln!(w, "voxel={}", c.voxel)?;
    writeln!(w, "base_grid={}", c.base_grid)?;
    writeln!(w, "ti_enabled={}", c.ti_enabled)?;
    writeln!(w, "mt_enabled={}", c.mt_enabled)?;
    for p in model.params.iter() {
        writeln!(w, "param {} {} {}", p.name, p.value.rows(), p.value.cols())?;
    }
    writeln!(w, "end")?;
    for p in model.params.iter() {
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn read_checkpoint(mut r: impl BufRead) -> Result<Model> {
    let mut next_line = || -> Result<String> {
        let mut line = String::new();
        match r.read_line(&mut line) {
            Ok(0) => Err(bad("unexpected end of manifest")),
            Ok(_) => Ok(line.trim_end_matches(['\n', '\r']).to_string()),
            Err(e) => Err(bad(e.to_string())),
        }
    };
    let magic = next_line()?;
    if magic != CHECKPOINT_MAGIC {
        return Err(bad(format!("unknown header {magic:?}")));
    }
    let mut cfg = ModelConfig::desk(1.0);
    let mut seen = Vec::new();
    let mut shapes = Vec::new();
    loop {
        let line = next_line()?;
        if line == "end" {
            break;
        }
        if let Some(rest) = line.strip_prefix("param ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad(format!("malformed param line {line:?}")));
            }
            let rows: usize = parse_value("rows", parts[1])?;
            let cols: usize = parse_value("cols", parts[2])?;
            shapes.push((parts[0].to_string(), rows, cols));
            continue;
        }
        let (k, v) = split_pair(&line)?;
        match k {
            "channels" => cfg.channels = parse_array(k, v)?,
            "encoder_depths" => cfg.encoder_depths = parse_array(k, v)?,
            "decoder_depths" => cfg.decoder_depths = parse_array(k, v)?,
            "heads" => cfg.heads = parse_value(k, v)?,
            "patch_capacity" => cfg.patch_capacity = parse_value(k, v)?,
            "voxel" => cfg.voxel = parse_value(k, v)?,
            "base_grid" => cfg.base_grid = parse_value(k, v)?,
            "ti_enabled" => cfg.ti_enabled = parse_bool(k, v)?,
            "mt_enabled" => cfg.mt_enabled = parse_bool(k, v)?,
            _ => return Err(bad(format!("unknown key {k:?}"))),
        }
        seen.push(k.to_string());
    }
    for key in ["channels", "encoder_depths", "decoder_depths", "heads", "patch_capacity", "voxel", "base_grid", "ti_enabled", "mt_enabled"] {
        if !seen.iter().any(|s| s == key) {
            return Err(bad(format!("missing key {key}")));
        }
    }

    let mut model = Model::new(cfg, 0)?;
    if model.params.len() != shapes.len() {
        return Err(bad(format!("{} parameters listed, configuration has {}", shapes.len(), model.params.len())));
    }
    let ids: Vec<_> = model.params.ids().collect();
    for (id, (name, rows, cols)) in ids.iter().zip(&shapes) {
        let p = model.params.param(*id);
        if &p.name != name || p.value.shape() != (*rows, *cols) {
            return Err(bad(format!(
                "parameter {name} {rows}x{cols} does not match {} {:?}",
                p.name,
                p.value.shape()
            )));
        }
    }
    let mut buf = [0u8; 8];
    for id in ids {
        for v in model.params.value_mut(id).data_mut() {
            r.read_exact(&mut buf).map_err(|_| bad("truncated parameter data"))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    if r.read(&mut buf).map_err(|e| bad(e.to_string()))? != 0 {
        return Err(bad("trailing bytes after parameter data"));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    write_checkpoint(model, &mut bytes).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut cfg = ModelConfig::miniature(0.25);
        cfg.ti_enabled = false;
        let model = Model::new(cfg, 9).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        let back = read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(back.config, model.config);
        assert_eq!(back.params.iter().map(|p| &p.value).collect::<Vec<_>>(), model.params.iter().map(|p| &p.value).collect::<Vec<_>>());
        let mut again = Vec::new();
        write_checkpoint(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn truncation_is_detected() {
        let model = Model::new(ModelConfig::miniature(0.5), 1).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        bytes.push(0);
        assert!(read_checkpoint(&bytes[..]).is_err());
        assert!(read_checkpoint(&b"not a checkpoint\n"[..]).is_err());
    }
}
