//! Descriptor file: binary little-endian, header `WDSC`, u32 count,
//! u32 dim, then per record u64 id, f64 timestamp, f32x3 position,
//! f32x4 quaternion (x, y, z, w), f32 x dim vector. A sidecar JSON maps
//! id ranges to sequence labels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::Pose;
use crate::placerec::DescriptorSet;

const MAGIC: &[u8; 4] = b"WDSC";

/// One sidecar entry: ids in [first_id, last_id] belong to `label`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdRange {
    pub label: String,
    pub first_id: u64,
    pub last_id: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorSidecar {
    pub ranges: Vec<IdRange>,
}

impl DescriptorSidecar {
    pub fn label_of(&self, id: u64) -> Option<&str> {
        self.ranges
            .iter()
            .find(|r| id >= r.first_id && id <= r.last_id)
            .map(|r| r.label.as_str())
    }
}

pub fn write_descriptors(path: &Path, set: &DescriptorSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(set.len() as u32)?;
    w.write_u32::<LittleEndian>(set.dim as u32)?;
    for i in 0..set.len() {
        w.write_u64::<LittleEndian>(set.ids[i])?;
        w.write_f64::<LittleEndian>(set.timestamps[i])?;
        let p = set.poses[i].translation();
        for v in [p.x, p.y, p.z] {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
        let q = set.poses[i].rotation().into_inner();
        for v in [q.i, q.j, q.k, q.w] {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
        for v in set.vector(i) {
            w.write_f32::<LittleEndian>(*v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sidecar(path: &Path, sidecar: &DescriptorSidecar) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, sidecar).map_err(|e| CoreError::InvalidInput(e.to_string()))?;
    Ok(())
}

/// Read a descriptor file; the sidecar supplies per-record sequence labels.
pub fn read_descriptors(path: &Path, sidecar_path: &Path) -> Result<DescriptorSet> {
    let parse_err = |message: String| CoreError::Parse {
        path: path.display().to_string(),
        message,
    };
    let sidecar: DescriptorSidecar = {
        let r = BufReader::new(File::open(sidecar_path)?);
        serde_json::from_reader(r).map_err(|e| CoreError::Parse {
            path: sidecar_path.display().to_string(),
            message: e.to_string(),
        })?
    };

    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(parse_err(format!("bad magic {magic:?}")));
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let dim = r.read_u32::<LittleEndian>()? as usize;
    if dim == 0 && count > 0 {
        return Err(parse_err("descriptor dim is 0".into()));
    }

    let mut ids = Vec::with_capacity(count);
    let mut timestamps = Vec::with_capacity(count);
    let mut poses = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut vectors = vec![0.0f32; count * dim];
    for i in 0..count {
        let id = r.read_u64::<LittleEndian>()?;
        let t = r.read_f64::<LittleEndian>()?;
        let mut p = [0.0f32; 3];
        for v in &mut p {
            *v = r.read_f32::<LittleEndian>()?;
        }
        let mut q = [0.0f32; 4];
        for v in &mut q {
            *v = r.read_f32::<LittleEndian>()?;
        }
        r.read_f32_into::<LittleEndian>(&mut vectors[i * dim..(i + 1) * dim])?;
        let label = sidecar
            .label_of(id)
            .ok_or_else(|| parse_err(format!("id {id} not covered by the sidecar")))?;
        ids.push(id);
        timestamps.push(t);
        poses.push(Pose::from_wxyz(
            q[3] as f64,
            q[0] as f64,
            q[1] as f64,
            q[2] as f64,
            Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64),
            Some(t),
        )?);
        labels.push(label.to_string());
    }
    DescriptorSet::new(ids, vectors, dim, poses, labels, timestamps)
}
