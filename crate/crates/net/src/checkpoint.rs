//! Versioned single-file checkpoint: config header as JSON, then raw
//! little-endian tensor records keyed by hierarchical names.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use lgir_core::Scalar;
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::lgnet::{Lgnet, LgnetConfig};
use crate::optim::{Optimizer, OptimizerKind};
use crate::tensors::{TensorKind, Tensors};
use crate::NetError;

pub const CHECKPOINT_MAGIC: &[u8; 12] = b"LGNET-CKPT-1";

#[derive(Serialize, Deserialize)]
struct Header {
    config: LgnetConfig,
    epoch: u64,
    optimizer_kind: Option<OptimizerKind>,
    optimizer_steps: u64,
    optimizer_weight_decay: f64,
    tensor_count: u32,
    optimizer_entry_count: u32,
}

/// A parsed checkpoint; tensor data is stored at full f64 width so the
/// file round-trips exactly for either precision.
pub struct Checkpoint {
    pub config: LgnetConfig,
    pub epoch: u64,
    pub optimizer_kind: Option<OptimizerKind>,
    pub optimizer_steps: u64,
    pub optimizer_weight_decay: f64,
    pub tensors: Vec<(String, TensorKind, ArrayD<f64>)>,
    pub optimizer_state: Vec<(String, ArrayD<f64>)>,
}

pub fn save<S: Scalar>(
    path: &Path,
    config: &LgnetConfig,
    tensors: &Tensors<S>,
    optimizer: Option<&Optimizer<S>>,
    epoch: u64,
) -> Result<(), NetError> {
    let opt_entries = optimizer.map(|o| o.state_entries(tensors)).unwrap_or_default();
    let header = Header {
        config: config.clone(),
        epoch,
        optimizer_kind: optimizer.map(|o| o.kind()),
        optimizer_steps: optimizer.map(|o| o.step_count()).unwrap_or(0),
        optimizer_weight_decay: optimizer.map(|o| o.weight_decay()).unwrap_or(0.0),
        tensor_count: tensors.len() as u32,
        optimizer_entry_count: opt_entries.len() as u32,
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| NetError::Checkpoint(format!("header encode: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(header_json.len() as u32)?;
    w.write_all(&header_json)?;

    for id in tensors.ids() {
        let kind_byte = match tensors.kind(id) {
            TensorKind::Param => 0u8,
            TensorKind::Buffer => 1u8,
        };
        write_record(&mut w, tensors.name(id), Some(kind_byte), tensors.get(id))?;
    }
    for (name, value) in &opt_entries {
        write_record(&mut w, name, None, value)?;
    }
    w.flush()?;
    Ok(())
}

fn write_record<S: Scalar>(
    w: &mut impl Write,
    name: &str,
    kind: Option<u8>,
    value: &ArrayD<S>,
) -> Result<(), NetError> {
    w.write_u32::<LittleEndian>(name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    if let Some(k) = kind {
        w.write_u8(k)?;
    }
    w.write_u32::<LittleEndian>(value.ndim() as u32)?;
    for &d in value.shape() {
        w.write_u64::<LittleEndian>(d as u64)?;
    }
    for &v in value.iter() {
        w.write_f64::<LittleEndian>(v.to_f64_lossy())?;
    }
    Ok(())
}

fn read_record(r: &mut impl Read, with_kind: bool) -> Result<(String, Option<u8>, ArrayD<f64>), NetError> {
    let name_len = r.read_u32::<LittleEndian>()? as usize;
    let mut name_bytes = vec![0u8; name_len];
    r.read_exact(&mut name_bytes)?;
    let name = String::from_utf8(name_bytes)
        .map_err(|_| NetError::Checkpoint("tensor name is not UTF-8".into()))?;
    let kind = if with_kind { Some(r.read_u8()?) } else { None };
    let ndim = r.read_u32::<LittleEndian>()? as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(r.read_u64::<LittleEndian>()? as usize);
    }
    let len: usize = dims.iter().product();
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(r.read_f64::<LittleEndian>()?);
    }
    let arr = ArrayD::from_shape_vec(IxDyn(&dims), data)
        .map_err(|e| NetError::Checkpoint(format!("tensor {name:?}: {e}")))?;
    Ok((name, kind, arr))
}

pub fn load(path: &Path) -> Result<Checkpoint, NetError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 12];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NetError::Checkpoint(format!(
            "bad magic {:?}; not a checkpoint file",
            String::from_utf8_lossy(&magic)
        )));
    }
    let header_len = r.read_u32::<LittleEndian>()? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| NetError::Checkpoint(format!("header decode: {e}")))?;

    let mut tensors = Vec::with_capacity(header.tensor_count as usize);
    for _ in 0..header.tensor_count {
        let (name, kind, value) = read_record(&mut r, true)?;
        let kind = match kind {
            Some(0) => TensorKind::Param,
            Some(1) => TensorKind::Buffer,
            other => {
                return Err(NetError::Checkpoint(format!(
                    "tensor {name:?} has unknown kind byte {other:?}"
                )))
            }
        };
        tensors.push((name, kind, value));
    }
    let mut optimizer_state = Vec::with_capacity(header.optimizer_entry_count as usize);
    for _ in 0..header.optimizer_entry_count {
        let (name, _, value) = read_record(&mut r, false)?;
        optimizer_state.push((name, value));
    }

    Ok(Checkpoint {
        config: header.config,
        epoch: header.epoch,
        optimizer_kind: header.optimizer_kind,
        optimizer_steps: header.optimizer_steps,
        optimizer_weight_decay: header.optimizer_weight_decay,
        tensors,
        optimizer_state,
    })
}

impl Checkpoint {
    /// Rebuilds the model (and optimizer, if its state was saved) at the
    /// requested precision. Tensor names must match the architecture the
    /// config describes, exactly and exhaustively.
    pub fn restore<S: Scalar>(&self) -> Result<(Lgnet<S>, Option<Optimizer<S>>), NetError> {
        let mut model = Lgnet::<S>::new(self.config.clone())?;
        let t = model.tensors_mut();
        if self.tensors.len() != t.len() {
            return Err(NetError::Checkpoint(format!(
                "checkpoint has {} tensors, architecture expects {}",
                self.tensors.len(),
                t.len()
            )));
        }
        for (name, kind, value) in &self.tensors {
            let id = t
                .find(name)
                .ok_or_else(|| NetError::Checkpoint(format!("unknown tensor {name:?}")))?;
            if t.kind(id) != *kind {
                return Err(NetError::Checkpoint(format!(
                    "tensor {name:?} kind mismatch"
                )));
            }
            if t.get(id).shape() != value.shape() {
                return Err(NetError::Checkpoint(format!(
                    "tensor {name:?}: shape {:?} in file, {:?} in architecture",
                    value.shape(),
                    t.get(id).shape()
                )));
            }
            t.set(id, value.mapv(S::cast_from));
        }

        let optimizer = match self.optimizer_kind {
            None => None,
            Some(kind) => {
                let mut opt = Optimizer::<S>::new(kind, self.optimizer_weight_decay);
                let entries: Vec<(String, ArrayD<S>)> = self
                    .optimizer_state
                    .iter()
                    .map(|(n, v)| (n.clone(), v.mapv(S::cast_from)))
                    .collect();
                opt.load_state(model.tensors(), &entries, self.optimizer_steps)?;
                Some(opt)
            }
        };
        Ok((model, optimizer))
    }
}
