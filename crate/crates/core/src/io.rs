//! On-disk container: a `<name>.json` header next to a raw `<name>.bin` payload.
//!
//! Header: `{"version":1,"shape":[...],"dtype":"complex64"|"uint8","order":"x-fastest"}`
//! plus optional extra fields. Complex payloads are interleaved little-endian
//! `f32` pairs; masks are one byte per location. Axes are stored x fastest,
//! then y, then t; a leading coil axis (shape `[Nc, ...]`) is the slowest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::dictlearn::Dictionary;
use crate::linalg::{CMatrix, C64};
use crate::model::{Dims, DynamicSequence, KtSpaceData, SamplingMask};

pub const FORMAT_VERSION: u32 = 1;
const ORDER: &str = "x-fastest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Complex64,
    Uint8,
}

impl DType {
    fn item_size(self) -> usize {
        match self {
            DType::Complex64 => 8,
            DType::Uint8 => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub shape: Vec<usize>,
    pub dtype: DType,
    pub order: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Complex(Vec<C64>),
    Bytes(Vec<u8>),
}

/// A decoded container, before interpretation as a domain type.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub payload: Payload,
    pub extra: Map<String, Value>,
}

/// `foo`, `foo.json` and `foo.bin` all name the same container.
pub fn container_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut header = base.clone().into_os_string();
    header.push(".json");
    let mut payload = base.into_os_string();
    payload.push(".bin");
    (header.into(), payload.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let (header_path, payload_path) = container_paths(path);
    let (dtype, bytes) = match &tensor.payload {
        Payload::Complex(values) => {
            let mut bytes = Vec::with_capacity(values.len() * 8);
            for z in values {
                bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
                bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            (DType::Complex64, bytes)
        }
        Payload::Bytes(values) => (DType::Uint8, values.clone()),
    };
    let expected: usize = tensor.shape.iter().product::<usize>() * dtype.item_size();
    if expected != bytes.len() {
        return Err(Error::shape(format!(
            "payload of {} bytes does not match shape {:?}",
            bytes.len(),
            tensor.shape
        )));
    }
    let header = Header {
        version: FORMAT_VERSION,
        shape: tensor.shape.clone(),
        dtype,
        order: ORDER.to_string(),
        extra: tensor.extra.clone(),
    };
    if let Some(dir) = header_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&header_path, text).map_err(io_err(&header_path))?;
    fs::write(&payload_path, bytes).map_err(io_err(&payload_path))?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<Header> {
    let (header_path, _) = container_paths(path);
    let text = fs::read_to_string(&header_path).map_err(io_err(&header_path))?;
    let header: Header = serde_json::from_str(&text)
        .map_err(|e| Error::format(&header_path, format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::format(
            &header_path,
            format!("unsupported version {} (expected {FORMAT_VERSION})", header.version),
        ));
    }
    if header.order != ORDER {
        return Err(Error::format(
            &header_path,
            format!("unsupported order {:?} (expected {ORDER:?})", header.order),
        ));
    }
    Ok(header)
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let header = read_header(path)?;
    let (_, payload_path) = container_paths(path);
    let bytes = fs::read(&payload_path).map_err(io_err(&payload_path))?;
    let count: usize = header.shape.iter().product();
    let expected = count * header.dtype.item_size();
    if bytes.len() != expected {
        return Err(Error::format(
            &payload_path,
            format!(
                "payload is {} bytes but header shape {:?} of {:?} needs {expected}",
                bytes.len(),
                header.shape,
                header.dtype
            ),
        ));
    }
    let payload = match header.dtype {
        DType::Complex64 => Payload::Complex(
            bytes
                .chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                    let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                    C64::new(re as f64, im as f64)
                })
                .collect(),
        ),
        DType::Uint8 => Payload::Bytes(bytes),
    };
    Ok(Tensor {
        shape: header.shape,
        payload,
        extra: header.extra,
    })
}

fn expect_complex(path: &Path, tensor: Tensor) -> Result<(Vec<usize>, Vec<C64>, Map<String, Value>)> {
    match tensor.payload {
        Payload::Complex(v) => Ok((tensor.shape, v, tensor.extra)),
        Payload::Bytes(_) => Err(Error::format(path, "expected dtype complex64, found uint8")),
    }
}

fn dims3(path: &Path, shape: &[usize]) -> Result<Dims> {
    match *shape {
        [nx, ny, nt] => Ok(Dims::new(nx, ny, nt)),
        _ => Err(Error::format(path, format!("expected shape [Nx,Ny,Nt], found {shape:?}"))),
    }
}

pub fn write_sequence(path: &Path, seq: &DynamicSequence) -> Result<()> {
    let d = seq.dims();
    write_tensor(
        path,
        &Tensor {
            shape: vec![d.nx, d.ny, d.nt],
            payload: Payload::Complex(seq.as_slice().to_vec()),
            extra: Map::new(),
        },
    )
}

pub fn read_sequence(path: &Path) -> Result<DynamicSequence> {
    let (shape, data, _) = expect_complex(path, read_tensor(path)?)?;
    let dims = dims3(path, &shape)?;
    DynamicSequence::from_vec(dims, data)
}

pub fn write_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    let d = mask.dims();
    let mut extra = Map::new();
    extra.insert("acceleration".into(), Value::from(mask.acceleration()));
    write_tensor(
        path,
        &Tensor {
            shape: vec![d.nx, d.ny, d.nt],
            payload: Payload::Bytes(mask.as_slice().iter().map(|&b| b as u8).collect()),
            extra,
        },
    )
}

pub fn read_mask(path: &Path) -> Result<SamplingMask> {
    let tensor = read_tensor(path)?;
    let bytes = match tensor.payload {
        Payload::Bytes(b) => b,
        Payload::Complex(_) => {
            return Err(Error::format(path, "expected dtype uint8 for a mask, found complex64"))
        }
    };
    let dims = dims3(path, &tensor.shape)?;
    if let Some(bad) = bytes.iter().find(|&&b| b > 1) {
        return Err(Error::format(path, format!("mask entries must be 0 or 1, found {bad}")));
    }
    SamplingMask::new(dims, bytes.into_iter().map(|b| b == 1).collect())
}

/// Writes measurements as `[Nc, Nx, Ny, Nt]` (always with the coil axis).
pub fn write_kt_data(path: &Path, data: &KtSpaceData) -> Result<()> {
    let d = data.dims();
    write_tensor(
        path,
        &Tensor {
            shape: vec![data.coils(), d.nx, d.ny, d.nt],
            payload: Payload::Complex(data.as_slice().to_vec()),
            extra: Map::new(),
        },
    )
}

/// Reads `[Nc, Nx, Ny, Nt]` or single-coil `[Nx, Ny, Nt]` measurements.
pub fn read_kt_data(path: &Path, mask: SamplingMask) -> Result<KtSpaceData> {
    let (shape, data, _) = expect_complex(path, read_tensor(path)?)?;
    let (coils, dims) = match *shape.as_slice() {
        [nc, nx, ny, nt] => (nc, Dims::new(nx, ny, nt)),
        [nx, ny, nt] => (1, Dims::new(nx, ny, nt)),
        _ => {
            return Err(Error::format(
                path,
                format!("expected shape [Nc,Nx,Ny,Nt] or [Nx,Ny,Nt], found {shape:?}"),
            ))
        }
    };
    if dims != mask.dims() {
        return Err(Error::shape(format!(
            "k-t data {dims} does not match mask {}",
            mask.dims()
        )));
    }
    KtSpaceData::new(coils, mask, data)
}

/// Coil maps as `[Nc, Nx, Ny]`.
pub fn write_coil_maps(path: &Path, maps: &crate::sensing::CoilMaps) -> Result<()> {
    write_tensor(
        path,
        &Tensor {
            shape: vec![maps.coils(), maps.nx(), maps.ny()],
            payload: Payload::Complex(maps.as_slice().to_vec()),
            extra: Map::new(),
        },
    )
}

pub fn read_coil_maps(path: &Path) -> Result<crate::sensing::CoilMaps> {
    let (shape, data, _) = expect_complex(path, read_tensor(path)?)?;
    match *shape.as_slice() {
        [nc, nx, ny] => crate::sensing::CoilMaps::new(nc, nx, ny, data),
        _ => Err(Error::format(path, format!("expected shape [Nc,Nx,Ny], found {shape:?}"))),
    }
}

/// Dictionary as `[m, K]` (atom entries fastest) with `atom_rank` and the
/// `reshape` dimensions in the header.
pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    let (spatial, temporal) = dict.reshape_dims();
    let mut extra = Map::new();
    extra.insert("atom_rank".into(), Value::from(dict.atom_rank()));
    extra.insert("reshape".into(), Value::from(vec![spatial, temporal]));
    write_tensor(
        path,
        &Tensor {
            shape: vec![dict.atom_len(), dict.len()],
            payload: Payload::Complex(dict.atoms().as_slice().to_vec()),
            extra,
        },
    )
}

/// Atoms are renormalized after reading to undo the single-precision rounding.
pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    let (shape, data, extra) = expect_complex(path, read_tensor(path)?)?;
    let [m, k] = *shape.as_slice() else {
        return Err(Error::format(path, format!("expected shape [m,K], found {shape:?}")));
    };
    let field = |name: &str| extra.get(name).ok_or_else(|| Error::format(path, format!("missing header field {name:?}")));
    let atom_rank = field("atom_rank")?
        .as_u64()
        .ok_or_else(|| Error::format(path, "atom_rank must be a nonnegative integer"))? as usize;
    let reshape: Vec<usize> = serde_json::from_value(field("reshape")?.clone())
        .map_err(|e| Error::format(path, format!("bad reshape field: {e}")))?;
    let [spatial, temporal] = *reshape.as_slice() else {
        return Err(Error::format(path, format!("reshape must have two entries, found {reshape:?}")));
    };
    let mut atoms = CMatrix::from_column_slice(m, k, &data);
    for (i, mut col) in atoms.column_iter_mut().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::format(path, format!("atom {i} is zero")));
        }
        col /= C64::new(n, 0.0);
    }
    Dictionary::new(atoms, atom_rank, spatial, temporal)
}
