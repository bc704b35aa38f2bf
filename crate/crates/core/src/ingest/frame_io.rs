//! Columnar binary encoding of a [`WellFrame`].
//!
//! Layout (little endian): magic `RTFRAME1`, well id and hole id as
//! u32-length-prefixed UTF-8, grid start (f64), bin count (u64), bit area
//! (f64), then 16 value columns (8 channels followed by 8 within-bin stds)
//! each stored as `n` presence bytes and `n` f64 values (0.0 when absent),
//! and finally `n` label bytes (0, 1, or 255 for missing).

use std::path::Path;

use crate::domain::{DepthGrid, WellFrame};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RTFRAME1";
const NO_LABEL: u8 = 255;

pub fn encode_frame(frame: &WellFrame) -> Vec<u8> {
    let n = frame.n_bins();
    let mut out = Vec::with_capacity(64 + n * (16 * 9 + 1));
    out.extend_from_slice(MAGIC);
    put_str(&mut out, &frame.well_id);
    put_str(&mut out, &frame.hole_id);
    out.extend_from_slice(&frame.grid.start_depth().to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&frame.bit_area.to_le_bytes());
    for col in frame.channels.iter().chain(frame.within_bin_std.iter()) {
        out.extend(col.iter().map(|v| u8::from(v.is_some())));
        for v in col {
            out.extend_from_slice(&v.unwrap_or(0.0).to_le_bytes());
        }
    }
    out.extend(frame.labels.iter().map(|l| l.unwrap_or(NO_LABEL)));
    out
}

pub fn decode_frame(bytes: &[u8]) -> std::result::Result<WellFrame, String> {
    let mut r = Cursor { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let well_id = r.string()?;
    let hole_id = r.string()?;
    let start = r.f64()?;
    let n = r.u64()? as usize;
    let bit_area = r.f64()?;
    let grid = DepthGrid::new(start, n).map_err(|e| e.to_string())?;
    let mut frame = WellFrame::empty(&well_id, &hole_id, grid, bit_area);
    for k in 0..16 {
        let present = r.take(n)?.to_vec();
        let mut col = Vec::with_capacity(n);
        for p in present {
            let v = r.f64()?;
            col.push(match p {
                0 => None,
                1 => Some(v),
                _ => return Err("bad presence flag".into()),
            });
        }
        if k < 8 {
            frame.channels[k] = col;
        } else {
            frame.within_bin_std[k - 8] = col;
        }
    }
    frame.labels = r
        .take(n)?
        .iter()
        .map(|&b| match b {
            0 | 1 => Ok(Some(b)),
            NO_LABEL => Ok(None),
            _ => Err(format!("bad label byte {b}")),
        })
        .collect::<std::result::Result<_, _>>()?;
    if r.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    frame.validate().map_err(|e| e.to_string())?;
    Ok(frame)
}

pub fn write_frame(path: &Path, frame: &WellFrame) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_frame(frame)).map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: &Path) -> Result<WellFrame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_frame(&bytes).map_err(|message| Error::Corrupt {
        path: path.to_owned(),
        message,
    })
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let len = u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| e.to_string())
    }
}
