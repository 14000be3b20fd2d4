//! Volume files: NIfTI-1 (`.nii`, `.nii.gz`, float32) and a headered raw
//! format (`.vol`).
//!
//! The raw format is a short text header followed by a little-endian payload:
//!
//! ```text
//! VOLRAW 1
//! dims 64 64 64
//! components 6
//! spacing 1 1 1
//! dtype f64
//! end
//! ```
//!
//! Multi-component data (tensor fields) are stored component-major: each
//! component is a full x-fastest volume, in the order `xx xy xz yy yz zz`.
//! NIfTI tensor files use the same order along the fourth axis.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array3, Array4, IxDyn};
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, ReaderOptions};

use crate::error::{Error, Result};
use crate::linalg::SymMat3;
use crate::volume::{Grid, ScalarVolume, TensorFieldLE};

const RAW_MAGIC: &str = "VOLRAW 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RawDtype {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti,
    NiftiGz,
    Raw,
}

impl VolumeFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path.to_string_lossy();
        if name.ends_with(".nii.gz") {
            Ok(VolumeFormat::NiftiGz)
        } else if name.ends_with(".nii") {
            Ok(VolumeFormat::Nifti)
        } else if name.ends_with(".vol") {
            Ok(VolumeFormat::Raw)
        } else {
            Err(Error::format(path, "unknown volume extension (expected .nii, .nii.gz or .vol)"))
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            VolumeFormat::Nifti => "nii",
            VolumeFormat::NiftiGz => "nii.gz",
            VolumeFormat::Raw => "vol",
        }
    }
}

/// Component-major multi-component volume as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RawVolume {
    pub grid: Grid,
    pub components: usize,
    pub data: Vec<f64>,
}

pub fn write_scalar(path: &Path, v: &ScalarVolume) -> Result<()> {
    let raw = RawVolume {
        grid: *v.grid(),
        components: 1,
        data: v.data().to_vec(),
    };
    write_any(path, &raw)
}

pub fn read_scalar(path: &Path) -> Result<ScalarVolume> {
    let raw = read_any(path)?;
    if raw.components != 1 {
        return Err(Error::format(path, format!("expected 1 component, found {}", raw.components)));
    }
    ScalarVolume::new(raw.grid, raw.data)
}

pub fn write_tensor(path: &Path, tf: &TensorFieldLE) -> Result<()> {
    let n = tf.grid().len();
    let mut data = vec![0.0; 6 * n];
    for (i, t) in tf.data().iter().enumerate() {
        for (c, v) in t.to_array().into_iter().enumerate() {
            data[c * n + i] = v;
        }
    }
    write_any(
        path,
        &RawVolume {
            grid: *tf.grid(),
            components: 6,
            data,
        },
    )
}

pub fn read_tensor(path: &Path) -> Result<TensorFieldLE> {
    let raw = read_any(path)?;
    if raw.components != 6 {
        return Err(Error::format(path, format!("expected 6 components, found {}", raw.components)));
    }
    let n = raw.grid.len();
    let data = (0..n)
        .map(|i| SymMat3::from_array(std::array::from_fn(|c| raw.data[c * n + i])))
        .collect();
    TensorFieldLE::new(raw.grid, data)
}

fn write_any(path: &Path, raw: &RawVolume) -> Result<()> {
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Raw => write_raw(path, raw, RawDtype::F64),
        VolumeFormat::Nifti | VolumeFormat::NiftiGz => write_nifti(path, raw),
    }
}

pub fn read_any(path: &Path) -> Result<RawVolume> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Raw => read_raw(path),
        VolumeFormat::Nifti | VolumeFormat::NiftiGz => read_nifti(path),
    }
}

pub fn write_raw(path: &Path, raw: &RawVolume, dtype: RawDtype) -> Result<()> {
    let g = raw.grid;
    let mut out = Vec::with_capacity(128 + raw.data.len() * 8);
    let dtype_name = match dtype {
        RawDtype::F32 => "f32",
        RawDtype::F64 => "f64",
    };
    let header = format!(
        "{RAW_MAGIC}\ndims {} {} {}\ncomponents {}\nspacing {} {} {}\ndtype {dtype_name}\nend\n",
        g.dims[0], g.dims[1], g.dims[2], raw.components, g.spacing[0], g.spacing[1], g.spacing[2]
    );
    out.extend_from_slice(header.as_bytes());
    for &v in &raw.data {
        match dtype {
            RawDtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            RawDtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: &Path) -> Result<RawVolume> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(f);
    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<fs::File>| -> Result<String> {
        line.clear();
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        Ok(line.trim_end().to_string())
    };
    if next_line(&mut reader)? != RAW_MAGIC {
        return Err(Error::format(path, "missing VOLRAW 1 magic"));
    }
    let mut dims = None;
    let mut spacing = None;
    let mut components = 1usize;
    let mut dtype = RawDtype::F64;
    loop {
        let l = next_line(&mut reader)?;
        let mut parts = l.split_whitespace();
        let key = parts.next().unwrap_or("");
        let vals: Vec<&str> = parts.collect();
        match key {
            "end" => break,
            "dims" => dims = Some(parse3::<usize>(path, &vals)?),
            "spacing" => spacing = Some(parse3::<f64>(path, &vals)?),
            "components" => {
                components = vals
                    .first()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::format(path, "bad components line"))?
            }
            "dtype" => {
                dtype = match vals.first().copied() {
                    Some("f32") => RawDtype::F32,
                    Some("f64") => RawDtype::F64,
                    other => return Err(Error::format(path, format!("unsupported dtype {other:?}"))),
                }
            }
            "" => return Err(Error::format(path, "header ended without `end`")),
            other => return Err(Error::format(path, format!("unknown header key `{other}`"))),
        }
    }
    let dims = dims.ok_or_else(|| Error::format(path, "missing dims"))?;
    let spacing = spacing.unwrap_or([1.0; 3]);
    let grid = Grid::new(dims, spacing)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    let n = grid.len() * components;
    let width = match dtype {
        RawDtype::F32 => 4,
        RawDtype::F64 => 8,
    };
    if payload.len() != n * width {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, expected {}", payload.len(), n * width),
        ));
    }
    let data = payload
        .chunks_exact(width)
        .map(|c| match dtype {
            RawDtype::F32 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
            RawDtype::F64 => f64::from_le_bytes(c.try_into().unwrap()),
        })
        .collect();
    Ok(RawVolume { grid, components, data })
}

fn parse3<T: std::str::FromStr>(path: &Path, vals: &[&str]) -> Result<[T; 3]> {
    if vals.len() != 3 {
        return Err(Error::format(path, "expected three values"));
    }
    let p = |s: &str| s.parse::<T>().map_err(|_| Error::format(path, format!("cannot parse `{s}`")));
    Ok([p(vals[0])?, p(vals[1])?, p(vals[2])?])
}

fn write_nifti(path: &Path, raw: &RawVolume) -> Result<()> {
    let g = raw.grid;
    let [nx, ny, nz] = g.dims;
    let header = NiftiHeader {
        pixdim: [
            1.0,
            g.spacing[0] as f32,
            g.spacing[1] as f32,
            g.spacing[2] as f32,
            1.0,
            1.0,
            1.0,
            1.0,
        ],
        // millimetres
        xyzt_units: 2,
        ..NiftiHeader::default()
    };
    let n = g.len();
    let writer = nifti::writer::WriterOptions::new(path).reference_header(&header);
    let result = if raw.components == 1 {
        let arr = Array3::from_shape_fn((nx, ny, nz), |(i, j, k)| raw.data[g.index(i, j, k)] as f32);
        writer.write_nifti(&arr)
    } else {
        let arr = Array4::from_shape_fn((nx, ny, nz, raw.components), |(i, j, k, c)| {
            raw.data[c * n + g.index(i, j, k)] as f32
        });
        writer.write_nifti(&arr)
    };
    result.map_err(|source| Error::Nifti {
        path: path.to_path_buf(),
        source,
    })
}

fn read_nifti(path: &Path) -> Result<RawVolume> {
    let wrap = |source| Error::Nifti {
        path: path.to_path_buf(),
        source,
    };
    let obj = ReaderOptions::new().read_file(path).map_err(wrap)?;
    let header = obj.header().clone();
    let arr = obj.into_volume().into_ndarray::<f64>().map_err(wrap)?;
    let shape = arr.shape().to_vec();
    if shape.len() < 3 || shape.len() > 4 {
        return Err(Error::format(path, format!("unsupported NIfTI rank {}", shape.len())));
    }
    let dims = [shape[0], shape[1], shape[2]];
    let components = if shape.len() == 4 { shape[3] } else { 1 };
    let spacing = std::array::from_fn(|a| {
        let s = header.pixdim[a + 1].abs() as f64;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    });
    let grid = Grid::new(dims, spacing)?;
    let n = grid.len();
    let mut data = vec![0.0; n * components];
    for c in 0..components {
        for idx in 0..n {
            let [i, j, k] = grid.coords(idx);
            let v = if components == 1 {
                arr[IxDyn(&[i, j, k])]
            } else {
                arr[IxDyn(&[i, j, k, c])]
            };
            data[c * n + idx] = v;
        }
    }
    Ok(RawVolume { grid, components, data })
}
