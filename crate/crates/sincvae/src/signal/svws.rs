//! `SVWS` binary container for preprocessed window sets.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   4 bytes  "SVWS"
//! version u32      currently 1
//! count   u64      windows
//! chans   u64      channels per window
//! wlen    u64      samples per channel
//! fs      f64      sampling rate (Hz)
//! flags   u8       bit 0: labels present, bit 1: phases present
//! data    count × chans × wlen f64
//! starts  count f64
//! labels  count u8  (if flag bit 0)
//! phases  count u8  (if flag bit 1)
//! ```
//!
//! Values are stored as f64 regardless of the crate's `Real` width so
//! artifacts are interchangeable between builds.

use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

use super::{Label, Phase, WindowSet};

const MAGIC: &[u8; 4] = b"SVWS";
const VERSION: u32 = 1;

pub fn write_svws(path: &Path, ws: &WindowSet) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut put = |bytes: &[u8]| out.write_all(bytes).map_err(|e| Error::io(path, e));

    put(MAGIC)?;
    put(&VERSION.to_le_bytes())?;
    put(&(ws.count() as u64).to_le_bytes())?;
    put(&(ws.channel_count() as u64).to_le_bytes())?;
    put(&(ws.window_len() as u64).to_le_bytes())?;
    put(&ws.sampling_rate().to_le_bytes())?;
    let flags = u8::from(ws.labels().is_some()) | (u8::from(ws.phases().is_some()) << 1);
    put(&[flags])?;
    for &v in ws.data().data() {
        put(&(v as f64).to_le_bytes())?;
    }
    for &t in ws.start_times() {
        put(&t.to_le_bytes())?;
    }
    if let Some(labels) = ws.labels() {
        for &l in labels {
            put(&[l.to_byte()])?;
        }
    }
    if let Some(phases) = ws.phases() {
        for &p in phases {
            put(&[p.to_byte()])?;
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
        if self.pos + n > self.buf.len() {
            return Err(Error::Malformed(format!(
                "{}: truncated SVWS file (wanted {n} bytes at offset {}, file has {})",
                self.path.display(),
                self.pos,
                self.buf.len()
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
}

pub fn read_svws(path: &Path) -> Result<WindowSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    std::io::BufReader::new(file)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0, path };

    if r.take(4)? != MAGIC {
        return Err(Error::Malformed(format!(
            "{}: not an SVWS file (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Malformed(format!(
            "{}: unsupported SVWS version {version}",
            path.display()
        )));
    }
    let count = r.u64()? as usize;
    let channels = r.u64()? as usize;
    let window_len = r.u64()? as usize;
    let fs = r.f64()?;
    let flags = r.take(1)?[0];
    if flags & !0b11 != 0 {
        return Err(Error::Malformed(format!(
            "{}: unknown SVWS flag bits {flags:#04x}",
            path.display()
        )));
    }

    let total = count
        .checked_mul(channels)
        .and_then(|v| v.checked_mul(window_len))
        .ok_or_else(|| {
            Error::Malformed(format!("{}: SVWS shape overflows", path.display()))
        })?;
    let mut data = Vec::with_capacity(total);
    for _ in 0..total {
        let v = r.f64()?;
        if !v.is_finite() {
            return Err(Error::Malformed(format!(
                "{}: non-finite sample in SVWS data",
                path.display()
            )));
        }
        data.push(v as Real);
    }
    let mut starts = Vec::with_capacity(count);
    for _ in 0..count {
        starts.push(r.f64()?);
    }
    let labels = if flags & 1 != 0 {
        let bytes = r.take(count)?;
        Some(bytes.iter().map(|&b| Label::from_byte(b)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let phases = if flags & 2 != 0 {
        let bytes = r.take(count)?;
        Some(bytes.iter().map(|&b| Phase::from_byte(b)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    if r.pos != buf.len() {
        return Err(Error::Malformed(format!(
            "{}: {} trailing bytes after SVWS payload",
            path.display(),
            buf.len() - r.pos
        )));
    }

    WindowSet::from_parts(
        Tensor::new(vec![count, channels, window_len], data)?,
        fs,
        starts,
        labels,
        phases,
    )
}
