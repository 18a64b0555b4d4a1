//! Demonstration records and their file format.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic    8 bytes  "DEMOSET1"
//! version  u32      1
//! count    u32
//! height   u32      frame height
//! width    u32      frame width
//! count × record:
//!   episode u32, tick u32
//!   action 4 × f64, q_throw 4 × f64, target 2 × f64, object_position 2 × f64
//!   frame   as one frame-dataset record (rgb bytes, mask bitset, labels)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_exact, read_f64, read_u32};
use crate::sim::observation::HUMAN_INPUT_DIM;
use crate::vision::dataset::{read_frame_record, write_frame_record};
use crate::vision::frame::{Frame, FRAME_HEIGHT, FRAME_WIDTH};

pub const DEMO_MAGIC: &[u8; 8] = b"DEMOSET1";
pub const DEMO_FORMAT_VERSION: u32 = 1;
const KIND: &str = "demo dataset";

/// Thrower-side snapshot taken at one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoRecord {
    pub episode: u32,
    pub tick: u32,
    pub action: [f64; 4],
    pub q_throw: [f64; 4],
    pub target: [f64; 2],
    pub object_position: [f64; 2],
    pub frame: Frame,
}

impl DemoRecord {
    /// Human-policy input `(q_throw, target, p_obj)`.
    pub fn human_input(&self) -> [f64; HUMAN_INPUT_DIM] {
        let mut o = [0.0; HUMAN_INPUT_DIM];
        o[..4].copy_from_slice(&self.q_throw);
        o[4..6].copy_from_slice(&self.target);
        o[6..].copy_from_slice(&self.object_position);
        o
    }
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<const N: usize>(r: &mut impl Read) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    for v in &mut out {
        *v = read_f64(r)?;
    }
    Ok(out)
}

pub fn write_demos(w: &mut impl Write, records: &[DemoRecord]) -> Result<()> {
    if records.iter().any(|r| r.frame.height != FRAME_HEIGHT || r.frame.width != FRAME_WIDTH) {
        return Err(Error::contract("demo frames must use the standard frame size"));
    }
    w.write_all(DEMO_MAGIC)?;
    w.write_all(&DEMO_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    w.write_all(&(FRAME_HEIGHT as u32).to_le_bytes())?;
    w.write_all(&(FRAME_WIDTH as u32).to_le_bytes())?;
    for r in records {
        w.write_all(&r.episode.to_le_bytes())?;
        w.write_all(&r.tick.to_le_bytes())?;
        write_f64s(w, &r.action)?;
        write_f64s(w, &r.q_throw)?;
        write_f64s(w, &r.target)?;
        write_f64s(w, &r.object_position)?;
        write_frame_record(w, &r.frame)?;
    }
    Ok(())
}

pub fn read_demos(r: &mut impl Read) -> Result<Vec<DemoRecord>> {
    if &read_exact::<8>(r)? != DEMO_MAGIC {
        return Err(Error::format(KIND, "bad magic"));
    }
    let version = read_u32(r)?;
    if version != DEMO_FORMAT_VERSION {
        return Err(Error::format(KIND, format!("unsupported version {version}")));
    }
    let count = read_u32(r)? as usize;
    let h = read_u32(r)? as usize;
    let w = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        out.push(DemoRecord {
            episode: read_u32(r)?,
            tick: read_u32(r)?,
            action: read_f64s(r)?,
            q_throw: read_f64s(r)?,
            target: read_f64s(r)?,
            object_position: read_f64s(r)?,
            frame: read_frame_record(r, h, w)?,
        });
    }
    Ok(out)
}

pub fn save_demos(path: &Path, records: &[DemoRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_demos(&mut f, records)?;
    f.flush()?;
    Ok(())
}

pub fn load_demos(path: &Path) -> Result<Vec<DemoRecord>> {
    read_demos(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}
