//! `SVAE` model checkpoint container.
//!
//! Layout (little-endian throughout):
//!
//! ```text
//! magic    4 bytes  "SVAE"
//! version  u32      currently 1
//! seed     u64
//! arch     u64 length + JSON bytes (architecture descriptor)
//! sections u64 count, then per section:
//!     name  u64 length + UTF-8 bytes
//!     shape u64 rank + rank × u64 dims
//!     data  f64 × product(dims)
//! ```
//!
//! Sections, in order: `param.<name>` for every parameter in canonical
//! order, `norm.mean`/`norm.std` when normalization stats are attached,
//! `history` as an `[epochs, 4]` block of
//! (train_loss, val_loss, recon, kl) rows (the epoch index is the row
//! number), and `val_scores`. Floats are stored as f64 regardless of
//! the crate's `Real` width, so checkpoints are build-independent.

use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::ChannelStats;
use crate::tensor::{ParamSet, Real, Tensor};

use super::{EpochStats, VaeArchitecture, VaeModel};

const MAGIC: &[u8; 4] = b"SVAE";
const VERSION: u32 = 1;

struct Section {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub fn save_checkpoint(path: &Path, model: &VaeModel) -> Result<()> {
    let mut sections = Vec::new();
    for (name, tensor) in model.params.iter() {
        sections.push(Section {
            name: format!("param.{name}"),
            shape: tensor.shape().to_vec(),
            data: tensor.data().iter().map(|&v| v as f64).collect(),
        });
    }
    if let Some(stats) = &model.norm_stats {
        sections.push(Section {
            name: "norm.mean".into(),
            shape: vec![stats.mean.len()],
            data: stats.mean.clone(),
        });
        sections.push(Section {
            name: "norm.std".into(),
            shape: vec![stats.std.len()],
            data: stats.std.clone(),
        });
    }
    let mut history = Vec::with_capacity(model.history.len() * 4);
    for row in &model.history {
        history.extend_from_slice(&[row.train_loss, row.val_loss, row.val_recon, row.val_kl]);
    }
    sections.push(Section {
        name: "history".into(),
        shape: vec![model.history.len(), 4],
        data: history,
    });
    sections.push(Section {
        name: "val_scores".into(),
        shape: vec![model.val_scores.len()],
        data: model.val_scores.clone(),
    });

    let arch_json = serde_json::to_string(&model.architecture)
        .map_err(|e| Error::Malformed(format!("architecture serialization: {e}")))?;

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut put = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    put(&VERSION.to_le_bytes())?;
    put(&model.seed.to_le_bytes())?;
    put(&(arch_json.len() as u64).to_le_bytes())?;
    put(arch_json.as_bytes())?;
    put(&(sections.len() as u64).to_le_bytes())?;
    for s in &sections {
        put(&(s.name.len() as u64).to_le_bytes())?;
        put(s.name.as_bytes())?;
        put(&(s.shape.len() as u64).to_le_bytes())?;
        for &d in &s.shape {
            put(&(d as u64).to_le_bytes())?;
        }
        for &v in &s.data {
            put(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos.checked_add(n).map_or(true, |end| end > self.buf.len()) {
            return Err(Error::Malformed(format!(
                "{}: truncated SVAE file (wanted {n} bytes at offset {})",
                self.path.display(),
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u64()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| {
            Error::Malformed(format!("{}: invalid UTF-8 in SVAE", self.path.display()))
        })
    }
}

pub fn load_checkpoint(path: &Path) -> Result<VaeModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    std::io::BufReader::new(file)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0, path };

    if r.take(4)? != MAGIC {
        return Err(Error::Malformed(format!(
            "{}: not an SVAE checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Malformed(format!(
            "{}: unsupported SVAE version {version}",
            path.display()
        )));
    }
    let seed = r.u64()?;
    let arch_json = r.string()?;
    let architecture: VaeArchitecture = serde_json::from_str(&arch_json).map_err(|e| {
        Error::Malformed(format!("{}: architecture block: {e}", path.display()))
    })?;

    let count = r.u64()? as usize;
    let mut sections = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u64()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let total: usize = shape.iter().product();
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            data.push(r.f64()?);
        }
        sections.push(Section { name, shape, data });
    }
    if r.pos != buf.len() {
        return Err(Error::Malformed(format!(
            "{}: {} trailing bytes after SVAE payload",
            path.display(),
            buf.len() - r.pos
        )));
    }

    let mut params = ParamSet::new();
    let mut norm_mean: Option<Vec<f64>> = None;
    let mut norm_std: Option<Vec<f64>> = None;
    let mut history_rows: Option<(Vec<usize>, Vec<f64>)> = None;
    let mut val_scores = Vec::new();
    for s in sections {
        if let Some(param_name) = s.name.strip_prefix("param.") {
            let data: Vec<Real> = s.data.iter().map(|&v| v as Real).collect();
            params.insert(param_name, Tensor::new(s.shape, data)?)?;
        } else {
            match s.name.as_str() {
                "norm.mean" => norm_mean = Some(s.data),
                "norm.std" => norm_std = Some(s.data),
                "history" => history_rows = Some((s.shape, s.data)),
                "val_scores" => val_scores = s.data,
                other => {
                    return Err(Error::Malformed(format!(
                        "{}: unknown SVAE section {other:?}",
                        path.display()
                    )))
                }
            }
        }
    }

    // Stored parameters must match the architecture exactly.
    let specs = architecture.param_specs();
    if params.len() != specs.len() {
        return Err(Error::Malformed(format!(
            "{}: checkpoint has {} parameters, architecture expects {}",
            path.display(),
            params.len(),
            specs.len()
        )));
    }
    for (i, (name, shape)) in specs.iter().enumerate() {
        if params.name_at(i) != name || params.tensor_at(i).shape() != &shape[..] {
            return Err(Error::Malformed(format!(
                "{}: parameter {i} is {:?} {:?}, architecture expects {name:?} {shape:?}",
                path.display(),
                params.name_at(i),
                params.tensor_at(i).shape()
            )));
        }
    }

    let norm_stats = match (norm_mean, norm_std) {
        (Some(mean), Some(std)) => Some(ChannelStats { mean, std }),
        (None, None) => None,
        _ => {
            return Err(Error::Malformed(format!(
                "{}: norm.mean and norm.std must appear together",
                path.display()
            )))
        }
    };

    let history = match history_rows {
        Some((shape, data)) => {
            if shape.len() != 2 || shape[1] != 4 || data.len() != shape[0] * 4 {
                return Err(Error::Malformed(format!(
                    "{}: history section must be [epochs, 4], got {shape:?}",
                    path.display()
                )));
            }
            data.chunks_exact(4)
                .enumerate()
                .map(|(epoch, row)| EpochStats {
                    epoch,
                    train_loss: row[0],
                    val_loss: row[1],
                    val_recon: row[2],
                    val_kl: row[3],
                })
                .collect()
        }
        None => {
            return Err(Error::Malformed(format!(
                "{}: missing history section",
                path.display()
            )))
        }
    };

    Ok(VaeModel { architecture, params, history, seed, norm_stats, val_scores })
}
