//! Frame dataset file.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic    8 bytes  "FRAMESET"
//! version  u32      1
//! count    u32
//! height   u32
//! width    u32
//! count × record:
//!   rgb     height·width·3 bytes, row-major, channels interleaved
//!   mask    ceil(height·width / 8) bytes, pixel i at bit (i % 8) of byte i / 8
//!   labels  3 × f64  (δ, x_c, y_c)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_exact, read_f64, read_u32};
use crate::vision::frame::{Frame, Labels};

pub const FRAME_MAGIC: &[u8; 8] = b"FRAMESET";
pub const FRAME_FORMAT_VERSION: u32 = 1;
const KIND: &str = "frame dataset";

pub fn pack_mask(mask: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; mask.len().div_ceil(8)];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_mask(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

/// Writes one frame body (pixels, mask, labels) without a header.
pub fn write_frame_record(w: &mut impl Write, frame: &Frame) -> Result<()> {
    w.write_all(&frame.rgb)?;
    w.write_all(&pack_mask(&frame.mask))?;
    for v in frame.labels().to_array() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one frame body written by [`write_frame_record`], checking the stored
/// labels against the mask.
pub fn read_frame_record(r: &mut impl Read, height: usize, width: usize) -> Result<Frame> {
    let n = height * width;
    let mut rgb = vec![0u8; 3 * n];
    r.read_exact(&mut rgb).map_err(|e| Error::format(KIND, e.to_string()))?;
    let mut bits = vec![0u8; n.div_ceil(8)];
    r.read_exact(&mut bits).map_err(|e| Error::format(KIND, e.to_string()))?;
    let frame = Frame {
        height,
        width,
        rgb,
        mask: unpack_mask(&bits, n),
    };
    let stored = Labels {
        delta: read_f64(r)?,
        x: read_f64(r)?,
        y: read_f64(r)?,
    };
    if stored != frame.labels() {
        return Err(Error::format(KIND, "stored labels disagree with the mask"));
    }
    Ok(frame)
}

pub fn write_frames(w: &mut impl Write, frames: &[Frame]) -> Result<()> {
    let (h, wd) = frames.first().map_or((0, 0), |f| (f.height, f.width));
    if frames.iter().any(|f| f.height != h || f.width != wd) {
        return Err(Error::contract("frames in one dataset must share a size"));
    }
    w.write_all(FRAME_MAGIC)?;
    w.write_all(&FRAME_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(frames.len() as u32).to_le_bytes())?;
    w.write_all(&(h as u32).to_le_bytes())?;
    w.write_all(&(wd as u32).to_le_bytes())?;
    for f in frames {
        write_frame_record(w, f)?;
    }
    Ok(())
}

pub fn read_frames(r: &mut impl Read) -> Result<Vec<Frame>> {
    if &read_exact::<8>(r)? != FRAME_MAGIC {
        return Err(Error::format(KIND, "bad magic"));
    }
    let version = read_u32(r)?;
    if version != FRAME_FORMAT_VERSION {
        return Err(Error::format(KIND, format!("unsupported version {version}")));
    }
    let count = read_u32(r)? as usize;
    let h = read_u32(r)? as usize;
    let w = read_u32(r)? as usize;
    (0..count).map(|_| read_frame_record(r, h, w)).collect()
}

pub fn save_frames(path: &Path, frames: &[Frame]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_frames(&mut f, frames)?;
    f.flush()?;
    Ok(())
}

pub fn load_frames(path: &Path) -> Result<Vec<Frame>> {
    read_frames(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}
