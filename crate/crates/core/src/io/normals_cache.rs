//! Cached normals file: binary little-endian, header `WNRM` + u32 count,
//! then per point f32x3 normal and u8 validity.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;

use crate::error::{CoreError, Result};
use crate::normals::NormalEstimate;

const MAGIC: &[u8; 4] = b"WNRM";

pub fn write_normals_cache(path: &Path, est: &NormalEstimate) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(est.len() as u32)?;
    for i in 0..est.len() {
        let n = est.normals[i];
        w.write_f32::<LittleEndian>(n.x as f32)?;
        w.write_f32::<LittleEndian>(n.y as f32)?;
        w.write_f32::<LittleEndian>(n.z as f32)?;
        w.write_u8(u8::from(est.valid[i]))?;
    }
    w.flush()?;
    Ok(())
}

/// Neighbor counts are not persisted; loaded estimates report zero and are
/// flagged oriented (caches are written after orientation).
pub fn read_normals_cache(path: &Path) -> Result<NormalEstimate> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Parse {
            path: path.display().to_string(),
            message: format!("bad magic {magic:?}"),
        });
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut normals = Vec::with_capacity(count);
    let mut valid = Vec::with_capacity(count);
    for _ in 0..count {
        let x = r.read_f32::<LittleEndian>()? as f64;
        let y = r.read_f32::<LittleEndian>()? as f64;
        let z = r.read_f32::<LittleEndian>()? as f64;
        normals.push(Vector3::new(x, y, z));
        valid.push(r.read_u8()? != 0);
    }
    Ok(NormalEstimate {
        normals,
        valid,
        neighbor_counts: vec![0; count],
        oriented: true,
    })
}
