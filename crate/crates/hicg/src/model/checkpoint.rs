//! Versioned binary checkpoint container.
//!
//! Layout (little-endian):
//!   magic "HICGCKPT" | u32 version | config block | vocab checksum |
//!   config echo | u32 tensor count | tensors (name, rows, cols, f64 data)
//!
//! Loading validates the magic, the version and every tensor shape against
//! the stored config, and fails naming the offending key. Tensor bytes round
//! trip exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::train::HyperParams;

const MAGIC: &[u8; 8] = b"HICGCKPT";
const VERSION: u32 = 1;

/// Everything a checkpoint stores besides the tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub hyper: HyperParams,
    pub vocab_checksum: String,
    pub config_echo: String,
}

fn write_string<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let len = r
        .read_u32::<LittleEndian>()
        .map_err(|e| Error::data(format!("truncated checkpoint reading {what} length: {e}")))?;
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)
        .map_err(|e| Error::data(format!("truncated checkpoint reading {what}: {e}")))?;
    String::from_utf8(buf).map_err(|_| Error::data(format!("checkpoint {what} is not UTF-8")))
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    meta: &CheckpointMeta,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);

    w.write_all(MAGIC).map_err(io_err)?;
    w.write_u32::<LittleEndian>(VERSION).map_err(io_err)?;

    let cfg = &params.config;
    for v in [cfg.n_items, cfg.n_types, cfg.d, cfg.steps] {
        w.write_u64::<LittleEndian>(v as u64).map_err(io_err)?;
    }
    write_string(&mut w, &serde_json::to_string(&meta.hyper).unwrap()).map_err(io_err)?;
    write_string(&mut w, &meta.vocab_checksum).map_err(io_err)?;
    write_string(&mut w, &meta.config_echo).map_err(io_err)?;

    w.write_u32::<LittleEndian>(params.tensors.len() as u32)
        .map_err(io_err)?;
    for (name, tensor) in &params.tensors {
        write_string(&mut w, name).map_err(io_err)?;
        w.write_u64::<LittleEndian>(tensor.nrows() as u64).map_err(io_err)?;
        w.write_u64::<LittleEndian>(tensor.ncols() as u64).map_err(io_err)?;
        for &x in tensor.iter() {
            w.write_f64::<LittleEndian>(x).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointMeta)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::data(format!("truncated checkpoint reading magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::data("not a checkpoint file (bad magic)".to_string()));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|e| Error::data(format!("truncated checkpoint reading version: {e}")))?;
    if version != VERSION {
        return Err(Error::data(format!(
            "unsupported checkpoint version {version}, expected {VERSION}"
        )));
    }

    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::data(format!("truncated checkpoint reading config: {e}")))?
            as usize;
    }
    let config = ModelConfig {
        n_items: dims[0],
        n_types: dims[1],
        d: dims[2],
        steps: dims[3],
    };

    let hyper_json = read_string(&mut r, "hyperparameters")?;
    let hyper: HyperParams = serde_json::from_str(&hyper_json)
        .map_err(|e| Error::data(format!("bad hyperparameter block: {e}")))?;
    let vocab_checksum = read_string(&mut r, "vocab checksum")?;
    let config_echo = read_string(&mut r, "config echo")?;

    let count = r
        .read_u32::<LittleEndian>()
        .map_err(|e| Error::data(format!("truncated checkpoint reading tensor count: {e}")))?;

    let expected: std::collections::BTreeMap<String, (usize, usize)> =
        config.shapes().into_iter().collect();
    if count as usize != expected.len() {
        return Err(Error::data(format!(
            "checkpoint holds {count} tensors, config implies {}",
            expected.len()
        )));
    }

    let mut tensors = std::collections::BTreeMap::new();
    for _ in 0..count {
        let name = read_string(&mut r, "tensor name")?;
        let rows = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::data(format!("truncated checkpoint reading `{name}` shape: {e}")))?
            as usize;
        let cols = r
            .read_u64::<LittleEndian>()
            .map_err(|e| Error::data(format!("truncated checkpoint reading `{name}` shape: {e}")))?
            as usize;
        let want = expected
            .get(&name)
            .ok_or_else(|| Error::data(format!("unexpected tensor `{name}` in checkpoint")))?;
        if (rows, cols) != *want {
            return Err(Error::data(format!(
                "tensor `{name}` has shape ({rows}, {cols}), expected {want:?}"
            )));
        }
        let mut data = vec![0f64; rows * cols];
        r.read_f64_into::<LittleEndian>(&mut data)
            .map_err(|e| Error::data(format!("truncated checkpoint reading `{name}` data: {e}")))?;
        let tensor = Matrix::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::data(format!("tensor `{name}`: {e}")))?;
        tensors.insert(name, tensor);
    }

    Ok((
        ModelParams { config, tensors },
        CheckpointMeta {
            hyper,
            vocab_checksum,
            config_echo,
        },
    ))
}
