use super::{NnError, Tensor};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    hyper: serde_json::Value,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

/// A parsed checkpoint: arbitrary hyperparameter JSON plus named tensors in
/// header order.
#[derive(Debug)]
pub struct Checkpoint {
    pub hyper: serde_json::Value,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Result<&Tensor<f32>, NnError> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| NnError::BadCheckpoint(format!("missing tensor {name}")))
    }
}

/// Write a single-line JSON header (version, hyperparameters, tensor shapes)
/// followed by each tensor's raw little-endian f32 payload in header order.
pub fn write_checkpoint(
    path: &Path,
    hyper: serde_json::Value,
    tensors: &[(&str, &Tensor<f32>)],
) -> std::io::Result<()> {
    let header = Header {
        version: CHECKPOINT_VERSION,
        hyper,
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorMeta { name: name.to_string(), shape: t.shape().to_vec() })
            .collect(),
    };
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for (_, t) in tensors {
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let file = std::fs::File::open(path)
        .map_err(|e| NnError::BadCheckpoint(format!("{}: {e}", path.display())))?;
    let mut r = BufReader::new(file);

    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)
            .map_err(|_| NnError::BadCheckpoint("truncated header".into()))?;
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| NnError::BadCheckpoint(format!("bad header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(NnError::BadCheckpoint(format!(
            "unsupported version {}",
            header.version
        )));
    }

    let mut tensors = Vec::with_capacity(header.tensors.len());
    for meta in header.tensors {
        let len: usize = meta.shape.iter().product();
        let mut buf = vec![0u8; len * 4];
        r.read_exact(&mut buf)
            .map_err(|_| NnError::BadCheckpoint(format!("truncated payload for {}", meta.name)))?;
        let data: Vec<f32> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push((meta.name, Tensor::new(meta.shape, data)));
    }
    Ok(Checkpoint { hyper: header.hyper, tensors })
}
