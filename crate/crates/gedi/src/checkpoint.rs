//! Flat binary checkpoint container.
//!
//! Layout: the magic string `GEDI1`, then one entry per named matrix:
//! `u32 LE` name length, the UTF-8 name, `u64 LE` rows, `u64 LE` cols, and
//! `rows * cols` little-endian `f64` values in row-major order. Model
//! checkpoints include the batch-norm running statistics and the temperature;
//! a replay buffer rides along under the name `replay_buffer`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{BatchNorm, Encoder, EnergyHead, GediModel, Linear, ProjHead};

const MAGIC: &[u8; 5] = b"GEDI1";

pub fn write_entries(path: &Path, entries: &[(String, &Matrix)]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    for (name, m) in entries {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_entries(path: &Path) -> Result<Vec<(String, Matrix)>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::format(path, "checkpoint", detail);
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("missing GEDI1 magic".into()));
    }
    let mut pos = MAGIC.len();
    let mut entries = Vec::new();
    while pos < bytes.len() {
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::format(path, "checkpoint", "truncated entry".to_string()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let name_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|e| bad(format!("bad entry name: {e}")))?;
        let rows = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| bad(format!("entry {name}: shape overflow")))?;
        let raw = take(&mut pos, count * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.push((name, Matrix::from_vec(rows, cols, data)));
    }
    Ok(entries)
}

fn encoder_entries(prefix: &str, e: &Encoder, out: &mut Vec<(String, Matrix)>) {
    out.push((format!("{prefix}.w1"), e.l1.w.clone()));
    out.push((format!("{prefix}.b1"), e.l1.b.clone()));
    out.push((format!("{prefix}.w2"), e.l2.w.clone()));
    out.push((format!("{prefix}.b2"), e.l2.b.clone()));
    out.push((format!("{prefix}.w3"), e.l3.w.clone()));
    out.push((format!("{prefix}.b3"), e.l3.b.clone()));
}

fn bn_entries(prefix: &str, bn: &BatchNorm, out: &mut Vec<(String, Matrix)>) {
    out.push((format!("{prefix}.gamma"), bn.gamma.clone()));
    out.push((format!("{prefix}.beta"), bn.beta.clone()));
    out.push((format!("{prefix}.running_mean"), bn.running_mean.clone()));
    out.push((format!("{prefix}.running_var"), bn.running_var.clone()));
}

fn proj_entries(prefix: &str, p: &ProjHead, out: &mut Vec<(String, Matrix)>) {
    out.push((format!("{prefix}.w1"), p.l1.w.clone()));
    out.push((format!("{prefix}.b1"), p.l1.b.clone()));
    bn_entries(&format!("{prefix}.bn1"), &p.bn1, out);
    out.push((format!("{prefix}.w2"), p.l2.w.clone()));
    out.push((format!("{prefix}.b2"), p.l2.b.clone()));
    bn_entries(&format!("{prefix}.bn2"), &p.bn2, out);
}

/// Every named tensor of the model, running statistics included.
pub fn model_entries(model: &GediModel) -> Vec<(String, Matrix)> {
    let mut out = Vec::new();
    encoder_entries("enc", &model.enc, &mut out);
    if let Some(e) = &model.enc_gen {
        encoder_entries("enc_gen", e, &mut out);
    }
    proj_entries("proj", &model.proj, &mut out);
    proj_entries("proj_star", &model.proj_star, &mut out);
    out.push(("prototypes".to_string(), model.prototypes.clone()));
    match &model.head {
        EnergyHead::VectorU(u) => out.push(("energy_u".to_string(), u.clone())),
        EnergyHead::Scalar(l) => {
            out.push(("jem.w".to_string(), l.w.clone()));
            out.push(("jem.b".to_string(), l.b.clone()));
        }
    }
    out.push(("tau".to_string(), Matrix::scalar(model.tau)));
    out
}

/// Write a model (and optionally the replay-buffer states) to one file.
pub fn save_model(path: &Path, model: &GediModel, buffer_states: Option<&Matrix>) -> Result<()> {
    let mut entries = model_entries(model);
    if let Some(states) = buffer_states {
        entries.push(("replay_buffer".to_string(), states.clone()));
    }
    let borrowed: Vec<(String, &Matrix)> =
        entries.iter().map(|(n, m)| (n.clone(), m)).collect();
    write_entries(path, &borrowed)
}

/// Reassemble a model (and the buffer states, when present) from a file.
pub fn load_model(path: &Path) -> Result<(GediModel, Option<Matrix>)> {
    let entries = read_entries(path)?;
    let mut find = |name: &str| -> Result<Matrix> {
        entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| Error::format(path, "checkpoint", format!("missing entry {name}")))
    };
    let encoder = |find: &mut dyn FnMut(&str) -> Result<Matrix>, p: &str| -> Result<Encoder> {
        Ok(Encoder {
            l1: Linear { w: find(&format!("{p}.w1"))?, b: find(&format!("{p}.b1"))? },
            l2: Linear { w: find(&format!("{p}.w2"))?, b: find(&format!("{p}.b2"))? },
            l3: Linear { w: find(&format!("{p}.w3"))?, b: find(&format!("{p}.b3"))? },
        })
    };
    let bn = |find: &mut dyn FnMut(&str) -> Result<Matrix>, p: &str| -> Result<BatchNorm> {
        Ok(BatchNorm {
            gamma: find(&format!("{p}.gamma"))?,
            beta: find(&format!("{p}.beta"))?,
            running_mean: find(&format!("{p}.running_mean"))?,
            running_var: find(&format!("{p}.running_var"))?,
        })
    };
    let proj = |find: &mut dyn FnMut(&str) -> Result<Matrix>,
                p: &str,
                normalize: bool|
     -> Result<ProjHead> {
        Ok(ProjHead {
            l1: Linear { w: find(&format!("{p}.w1"))?, b: find(&format!("{p}.b1"))? },
            bn1: bn(find, &format!("{p}.bn1"))?,
            l2: Linear { w: find(&format!("{p}.w2"))?, b: find(&format!("{p}.b2"))? },
            bn2: bn(find, &format!("{p}.bn2"))?,
            normalize,
        })
    };
    let has = |name: &str| entries.iter().any(|(n, _)| n == name);
    let head = if has("jem.w") {
        EnergyHead::Scalar(Linear { w: find("jem.w")?, b: find("jem.b")? })
    } else {
        EnergyHead::VectorU(find("energy_u")?)
    };
    let enc_gen = if has("enc_gen.w1") { Some(encoder(&mut find, "enc_gen")?) } else { None };
    let model = GediModel {
        enc: encoder(&mut find, "enc")?,
        enc_gen,
        proj: proj(&mut find, "proj", true)?,
        proj_star: proj(&mut find, "proj_star", false)?,
        prototypes: find("prototypes")?,
        head,
        tau: find("tau")?.scalar_value(),
    };
    let buffer = if has("replay_buffer") { Some(find("replay_buffer")?) } else { None };
    Ok((model, buffer))
}
