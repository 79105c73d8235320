//! NIfTI-1 single-file reader and writer (.nii / .nii.gz).
//!
//! Only the single-file layout is supported; NIfTI-2 and .hdr/.img pairs
//! are rejected. Supported datatypes are uint8 (2), int16 (4) and
//! float32 (16). Headers in either byte order are accepted; the
//! `dim[0] in [1,7]` check decides. Scaling slope/intercept are applied
//! when slope != 0 and (slope, intercept) != (1, 0).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use lesionbench_core::ensemble::ProbabilityStack;
use lesionbench_core::grid::{Affine4, Geometry, LabelMask, VoxelGrid};

use crate::error::IoError;

pub const HEADER_SIZE: usize = 348;
pub const MAGIC_NII1: &[u8; 4] = b"n+1\0";
const VOX_OFFSET: usize = 352;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiftiDatatype {
    Uint8,
    Int16,
    Float32,
}

impl NiftiDatatype {
    pub fn code(&self) -> i16 {
        match self {
            NiftiDatatype::Uint8 => 2,
            NiftiDatatype::Int16 => 4,
            NiftiDatatype::Float32 => 16,
        }
    }

    pub fn bitpix(&self) -> i16 {
        match self {
            NiftiDatatype::Uint8 => 8,
            NiftiDatatype::Int16 => 16,
            NiftiDatatype::Float32 => 32,
        }
    }

    fn from_code(code: i16, path: &Path) -> Result<Self, IoError> {
        match code {
            2 => Ok(NiftiDatatype::Uint8),
            4 => Ok(NiftiDatatype::Int16),
            16 => Ok(NiftiDatatype::Float32),
            _ => Err(IoError::UnsupportedType {
                path: path.to_path_buf(),
                code,
            }),
        }
    }

    fn byte_size(&self) -> usize {
        (self.bitpix() / 8) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Endianness {
    #[default]
    Little,
    Big,
}

/// A decoded NIfTI volume plus enough source metadata to choose the
/// right representation (scalar grid or label mask) afterwards.
#[derive(Debug, Clone)]
pub struct NiftiVolume {
    pub grid: VoxelGrid,
    pub datatype: NiftiDatatype,
    /// True when scl_slope/scl_inter rescaling was applied.
    pub scaled: bool,
    /// Trailing dims beyond the third (all 1 for plain 3D volumes).
    pub extra_dims: Vec<usize>,
}

impl NiftiVolume {
    pub fn into_grid(self) -> VoxelGrid {
        self.grid
    }

    /// Reinterpret as a label mask. The voxel values must be
    /// non-negative integers; scaled float data is rejected.
    pub fn try_into_mask(self, path: &Path) -> Result<LabelMask, IoError> {
        if self.scaled {
            return Err(IoError::Format {
                path: path.to_path_buf(),
                reason: "scaled (slope/intercept) data cannot be read as a label mask".into(),
            });
        }
        let mut labels = Vec::with_capacity(self.grid.data.len());
        for &v in &self.grid.data {
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(IoError::Format {
                    path: path.to_path_buf(),
                    reason: format!("voxel value {v} is not a non-negative integer label"),
                });
            }
            labels.push(v as u32);
        }
        Ok(LabelMask {
            geometry: self.grid.geometry,
            labels,
        })
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().map(|e| e.eq_ignore_ascii_case("gz")).unwrap_or(false)
}

fn read_all(path: &Path) -> Result<Vec<u8>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut bytes = Vec::new();
    if is_gz(path) {
        GzDecoder::new(BufReader::new(file))
            .read_to_end(&mut bytes)
            .map_err(|e| IoError::io(path, e))?;
    } else {
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| IoError::io(path, e))?;
    }
    Ok(bytes)
}

struct Header {
    dims: Vec<usize>,
    datatype: NiftiDatatype,
    pixdim: [f32; 8],
    vox_offset: usize,
    scl_slope: f32,
    scl_inter: f32,
    qform_code: i16,
    sform_code: i16,
    quatern: [f32; 3],
    qoffset: [f32; 3],
    srows: [[f32; 4]; 3],
}

fn parse_header<E: ByteOrder>(buf: &[u8], path: &Path) -> Result<Header, IoError> {
    let magic = &buf[344..348];
    if magic != MAGIC_NII1 {
        let reason = if magic == b"ni1\0" {
            "two-file (.hdr/.img) layout is not supported".into()
        } else {
            format!("bad magic bytes {magic:?}")
        };
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason,
        });
    }
    let ndim = E::read_i16(&buf[40..42]);
    if !(1..=7).contains(&ndim) {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("dim[0] = {ndim} out of range"),
        });
    }
    let dims: Vec<usize> = (1..=ndim as usize)
        .map(|i| E::read_i16(&buf[40 + 2 * i..42 + 2 * i]) as usize)
        .collect();
    if dims.iter().any(|&d| d == 0) {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("zero entry in dim {dims:?}"),
        });
    }
    let datatype = NiftiDatatype::from_code(E::read_i16(&buf[70..72]), path)?;
    let mut pixdim = [0.0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = E::read_f32(&buf[76 + 4 * i..80 + 4 * i]);
    }
    let vox_offset = E::read_f32(&buf[108..112]) as usize;
    let mut srows = [[0.0f32; 4]; 3];
    for (r, row) in srows.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = E::read_f32(&buf[280 + 16 * r + 4 * c..284 + 16 * r + 4 * c]);
        }
    }
    Ok(Header {
        dims,
        datatype,
        pixdim,
        vox_offset: vox_offset.max(HEADER_SIZE),
        scl_slope: E::read_f32(&buf[112..116]),
        scl_inter: E::read_f32(&buf[116..120]),
        qform_code: E::read_i16(&buf[252..254]),
        sform_code: E::read_i16(&buf[254..256]),
        quatern: [
            E::read_f32(&buf[256..260]),
            E::read_f32(&buf[260..264]),
            E::read_f32(&buf[264..268]),
        ],
        qoffset: [
            E::read_f32(&buf[268..272]),
            E::read_f32(&buf[272..276]),
            E::read_f32(&buf[276..280]),
        ],
        srows,
    })
}

fn qform_affine(h: &Header) -> Affine4 {
    let b = h.quatern[0] as f64;
    let c = h.quatern[1] as f64;
    let d = h.quatern[2] as f64;
    let a = (1.0 - b * b - c * c - d * d).max(0.0).sqrt();
    let qfac = if (h.pixdim[0] as f64) < 0.0 { -1.0 } else { 1.0 };
    let [sx, sy, sz] = [h.pixdim[1] as f64, h.pixdim[2] as f64, h.pixdim[3] as f64];
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ];
    let mut m = [[0.0f64; 4]; 4];
    for i in 0..3 {
        m[i][0] = r[i][0] * sx;
        m[i][1] = r[i][1] * sy;
        m[i][2] = r[i][2] * sz * qfac;
        m[i][3] = h.qoffset[i] as f64;
    }
    m[3][3] = 1.0;
    Affine4(m)
}

fn decode<E: ByteOrder>(path: &Path, bytes: &[u8]) -> Result<NiftiVolume, IoError> {
    let h = parse_header::<E>(bytes, path)?;

    let mut dims3 = [1usize; 3];
    for (i, &d) in h.dims.iter().take(3).enumerate() {
        dims3[i] = d;
    }
    let extra_dims: Vec<usize> = h.dims.iter().skip(3).copied().collect();
    if extra_dims.iter().any(|&d| d != 1) {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("volume has non-singleton trailing dims {:?}", h.dims),
        });
    }
    let n = dims3[0] * dims3[1] * dims3[2];
    let data = decode_data::<E>(path, bytes, &h, n)?;
    let (data, scaled) = apply_scaling(data, h.scl_slope, h.scl_inter);
    let geometry = geometry_from_header(&h, dims3, path)?;
    let grid = VoxelGrid::new(geometry, data)?;
    Ok(NiftiVolume {
        grid,
        datatype: h.datatype,
        scaled,
        extra_dims,
    })
}

fn geometry_from_header(h: &Header, dims3: [usize; 3], path: &Path) -> Result<Geometry, IoError> {
    let spacing = [h.pixdim[1] as f64, h.pixdim[2] as f64, h.pixdim[3] as f64];
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("non-positive pixdim spacing {spacing:?}"),
        });
    }
    let affine = if h.sform_code > 0 {
        let mut m = [[0.0f64; 4]; 4];
        for r in 0..3 {
            for c in 0..4 {
                m[r][c] = h.srows[r][c] as f64;
            }
        }
        m[3][3] = 1.0;
        Affine4(m)
    } else if h.qform_code > 0 {
        qform_affine(h)
    } else {
        Affine4::from_spacing(spacing)
    };
    Ok(Geometry::new((dims3[0], dims3[1], dims3[2]), spacing, affine)?)
}

fn decode_data<E: ByteOrder>(path: &Path, bytes: &[u8], h: &Header, n: usize) -> Result<Vec<f64>, IoError> {
    let need = n * h.datatype.byte_size();
    let avail = bytes.len().saturating_sub(h.vox_offset);
    if avail < need {
        return Err(IoError::Truncated {
            path: path.to_path_buf(),
            expected: need,
            found: avail,
        });
    }
    let raw = &bytes[h.vox_offset..h.vox_offset + need];
    Ok(match h.datatype {
        NiftiDatatype::Uint8 => raw.iter().map(|&b| b as f64).collect(),
        NiftiDatatype::Int16 => raw.chunks_exact(2).map(|c| E::read_i16(c) as f64).collect(),
        NiftiDatatype::Float32 => raw.chunks_exact(4).map(|c| E::read_f32(c) as f64).collect(),
    })
}

fn apply_scaling(mut data: Vec<f64>, slope: f32, inter: f32) -> (Vec<f64>, bool) {
    let apply = slope != 0.0 && !(slope == 1.0 && inter == 0.0) && slope.is_finite() && inter.is_finite();
    if apply {
        for v in &mut data {
            *v = *v * slope as f64 + inter as f64;
        }
    }
    (data, apply)
}

/// Read a NIfTI-1 single-file volume, gzip transparent, either byte order.
pub fn read_nifti(path: &Path) -> Result<NiftiVolume, IoError> {
    let bytes = read_all(path)?;
    if bytes.len() < HEADER_SIZE {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("file has {} bytes, header needs {HEADER_SIZE}", bytes.len()),
        });
    }
    // dim[0] in [1,7] under little-endian decides the byte order.
    let ndim_le = LittleEndian::read_i16(&bytes[40..42]);
    if (1..=7).contains(&ndim_le) {
        decode::<LittleEndian>(path, &bytes)
    } else {
        decode::<BigEndian>(path, &bytes)
    }
}

/// Read a scalar volume.
pub fn read_grid(path: &Path) -> Result<VoxelGrid, IoError> {
    Ok(read_nifti(path)?.into_grid())
}

/// Read an integer-typed volume as a label mask.
pub fn read_mask(path: &Path) -> Result<LabelMask, IoError> {
    read_nifti(path)?.try_into_mask(path)
}

fn encode_header<E: ByteOrder>(
    dims: &[usize],
    spacing: [f64; 3],
    affine: &Affine4,
    datatype: NiftiDatatype,
) -> Vec<u8> {
    let mut h = vec![0u8; HEADER_SIZE];
    E::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    h[39] = 1; // dim_info unused; regular = 'r' not required
    E::write_i16(&mut h[40..42], dims.len() as i16);
    for (i, &d) in dims.iter().enumerate() {
        E::write_i16(&mut h[42 + 2 * i..44 + 2 * i], d as i16);
    }
    for i in dims.len()..7 {
        E::write_i16(&mut h[42 + 2 * i..44 + 2 * i], 1);
    }
    E::write_i16(&mut h[70..72], datatype.code());
    E::write_i16(&mut h[72..74], datatype.bitpix());
    E::write_f32(&mut h[76..80], 1.0); // pixdim[0] = qfac
    for i in 0..3 {
        E::write_f32(&mut h[80 + 4 * i..84 + 4 * i], spacing[i] as f32);
    }
    for i in 3..7 {
        E::write_f32(&mut h[80 + 4 * i..84 + 4 * i], 1.0);
    }
    E::write_f32(&mut h[108..112], VOX_OFFSET as f32);
    E::write_f32(&mut h[112..116], 1.0); // scl_slope
    E::write_f32(&mut h[116..120], 0.0); // scl_inter
    E::write_i16(&mut h[252..254], 0); // qform_code
    E::write_i16(&mut h[254..256], 1); // sform_code: scanner
    for r in 0..3 {
        for c in 0..4 {
            E::write_f32(
                &mut h[280 + 16 * r + 4 * c..284 + 16 * r + 4 * c],
                affine.0[r][c] as f32,
            );
        }
    }
    h[344..348].copy_from_slice(MAGIC_NII1);
    h
}

fn encode_values<E: ByteOrder>(values: &[f64], datatype: NiftiDatatype) -> Vec<u8> {
    match datatype {
        NiftiDatatype::Uint8 => values.iter().map(|&v| v as u8).collect(),
        NiftiDatatype::Int16 => {
            let mut out = vec![0u8; values.len() * 2];
            for (i, &v) in values.iter().enumerate() {
                E::write_i16(&mut out[2 * i..2 * i + 2], v as i16);
            }
            out
        }
        NiftiDatatype::Float32 => {
            let mut out = vec![0u8; values.len() * 4];
            for (i, &v) in values.iter().enumerate() {
                E::write_f32(&mut out[4 * i..4 * i + 4], v as f32);
            }
            out
        }
    }
}

fn write_file(path: &Path, header: Vec<u8>, data: Vec<u8>) -> Result<(), IoError> {
    let mut payload = header;
    payload.resize(VOX_OFFSET, 0); // 4-byte empty extension marker
    payload.extend_from_slice(&data);
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    if is_gz(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        enc.write_all(&payload).map_err(|e| IoError::io(path, e))?;
        enc.finish().map_err(|e| IoError::io(path, e))?;
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&payload).map_err(|e| IoError::io(path, e))?;
        w.flush().map_err(|e| IoError::io(path, e))?;
    }
    Ok(())
}

fn write_volume(
    path: &Path,
    dims: &[usize],
    spacing: [f64; 3],
    affine: &Affine4,
    values: &[f64],
    datatype: NiftiDatatype,
    endian: Endianness,
) -> Result<(), IoError> {
    let (header, data) = match endian {
        Endianness::Little => (
            encode_header::<LittleEndian>(dims, spacing, affine, datatype),
            encode_values::<LittleEndian>(values, datatype),
        ),
        Endianness::Big => (
            encode_header::<BigEndian>(dims, spacing, affine, datatype),
            encode_values::<BigEndian>(values, datatype),
        ),
    };
    write_file(path, header, data)
}

/// Write a scalar grid with an explicit datatype.
pub fn write_grid_as(
    grid: &VoxelGrid,
    path: &Path,
    datatype: NiftiDatatype,
    endian: Endianness,
) -> Result<(), IoError> {
    let (nx, ny, nz) = grid.geometry.dims;
    write_volume(
        path,
        &[nx, ny, nz],
        grid.geometry.spacing_mm,
        &grid.geometry.affine,
        &grid.data,
        datatype,
        endian,
    )
}

/// Write a scalar grid as float32, little-endian.
pub fn write_grid(grid: &VoxelGrid, path: &Path) -> Result<(), IoError> {
    write_grid_as(grid, path, NiftiDatatype::Float32, Endianness::Little)
}

/// Write a label mask: uint8 when the maximum label fits, int16 otherwise.
pub fn write_mask(mask: &LabelMask, path: &Path) -> Result<(), IoError> {
    write_mask_as(mask, path, Endianness::Little)
}

pub fn write_mask_as(mask: &LabelMask, path: &Path, endian: Endianness) -> Result<(), IoError> {
    let max = mask.labels.iter().copied().max().unwrap_or(0);
    let datatype = if max <= u8::MAX as u32 {
        NiftiDatatype::Uint8
    } else if max <= i16::MAX as u32 {
        NiftiDatatype::Int16
    } else {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("label {max} exceeds the int16 range"),
        });
    };
    let values: Vec<f64> = mask.labels.iter().map(|&l| l as f64).collect();
    let (nx, ny, nz) = mask.geometry.dims;
    write_volume(
        path,
        &[nx, ny, nz],
        mask.geometry.spacing_mm,
        &mask.geometry.affine,
        &values,
        datatype,
        endian,
    )
}

/// Read a per-class probability stack stored as a 4D NIfTI with the 4th
/// dimension indexing classes.
pub fn read_prob_stack(path: &Path) -> Result<ProbabilityStack, IoError> {
    let bytes = read_all(path)?;
    if bytes.len() < HEADER_SIZE {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("file has {} bytes, header needs {HEADER_SIZE}", bytes.len()),
        });
    }
    let ndim_le = LittleEndian::read_i16(&bytes[40..42]);
    if (1..=7).contains(&ndim_le) {
        decode_stack::<LittleEndian>(path, &bytes)
    } else {
        decode_stack::<BigEndian>(path, &bytes)
    }
}

fn decode_stack<E: ByteOrder>(path: &Path, bytes: &[u8]) -> Result<ProbabilityStack, IoError> {
    let h = parse_header::<E>(bytes, path)?;
    if h.dims.len() < 4 {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("probability stack needs 4 dims, found {:?}", h.dims),
        });
    }
    if h.dims.len() > 4 && h.dims[4..].iter().any(|&d| d != 1) {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            reason: format!("non-singleton dims beyond the 4th: {:?}", h.dims),
        });
    }
    let dims3 = [h.dims[0], h.dims[1], h.dims[2]];
    let classes = h.dims[3];
    let n = dims3[0] * dims3[1] * dims3[2] * classes;
    let data = decode_data::<E>(path, bytes, &h, n)?;
    let (data, _) = apply_scaling(data, h.scl_slope, h.scl_inter);
    let geometry = geometry_from_header(&h, dims3, path)?;
    Ok(ProbabilityStack::new(geometry, classes, data)?)
}

/// Write a probability stack as a 4D float32 NIfTI.
pub fn write_prob_stack(stack: &ProbabilityStack, path: &Path) -> Result<(), IoError> {
    let (nx, ny, nz) = stack.geometry.dims;
    write_volume(
        path,
        &[nx, ny, nz, stack.classes],
        stack.geometry.spacing_mm,
        &stack.geometry.affine,
        &stack.probs,
        NiftiDatatype::Float32,
        Endianness::Little,
    )
}
