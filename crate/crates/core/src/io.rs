//! Volume, manifest and SBR-table loading.
//!
//! NIfTI-1 support covers single-file `.nii` (optionally gzipped) with the
//! integer and float datatypes that SPECT exports use. No reorientation is
//! applied: the third array axis is the axial slice axis.

use crate::scalar::Real;
use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

/// Expected grid of a spatially normalized scan.
pub const STANDARD_DIMS: [usize; 3] = [91, 109, 91];

const NIFTI_HEADER_LEN: usize = 348;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("payload length mismatch: header declares {expected} values, blob holds {found} bytes")]
    LengthMismatch { expected: usize, found: usize },
    #[error("missing or invalid raw header: {0}")]
    MissingHeader(String),
    #[error("non-finite voxel value at index {0}")]
    NonFinite(usize),
    #[error("bad row {index}: {reason}")]
    BadRow { index: usize, reason: String },
    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A 3D scalar grid, x fastest, stored as contiguous axial (z) slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: [usize; 3],
    voxel_size_mm: [T; 3],
    data: Vec<T>,
}

impl<T: Real> Volume<T> {
    pub fn new(dims: [usize; 3], voxel_size_mm: [T; 3], data: Vec<T>) -> Result<Self, IoError> {
        if dims.contains(&0) {
            return Err(IoError::MalformedHeader(format!("zero dimension in {dims:?}")));
        }
        if voxel_size_mm.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(IoError::MalformedHeader(format!(
                "voxel sizes must be positive, got {voxel_size_mm:?}"
            )));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(IoError::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(IoError::NonFinite(i));
        }
        if dims != STANDARD_DIMS {
            log::warn!("volume dims {dims:?} differ from the standard {STANDARD_DIMS:?} grid");
        }
        Ok(Self {
            dims,
            voxel_size_mm,
            data,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size_mm(&self) -> [T; 3] {
        self.voxel_size_mm
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn nz(&self) -> usize {
        self.dims[2]
    }

    /// Axial slice `z` as a row-major `nx`-wide block (row index = y).
    pub fn slice(&self, z: usize) -> &[T] {
        let n = self.dims[0] * self.dims[1];
        &self.data[z * n..(z + 1) * n]
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[x + self.dims[0] * (y + self.dims[1] * z)]
    }

    pub fn cast<U: Real>(&self) -> Volume<U> {
        Volume {
            dims: self.dims,
            voxel_size_mm: self.voxel_size_mm.map(|v| U::lit(v.as_f64())),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&bytes[..])
            .read_to_end(&mut out)
            .map_err(io_err(path))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

struct HeaderReader<'a> {
    buf: &'a [u8],
    endian: Endian,
}

impl HeaderReader<'_> {
    fn bytes<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[off..off + N]);
        b
    }
    fn i16(&self, off: usize) -> i16 {
        let b = self.bytes::<2>(off);
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }
    fn f32(&self, off: usize) -> f32 {
        let b = self.bytes::<4>(off);
        match self.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        }
    }
}

/// NIfTI datatype codes accepted by [`read_nifti`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Datatype {
    U8,
    I16,
    I32,
    F32,
    F64,
}

impl Datatype {
    fn from_code(code: i16) -> Result<Self, IoError> {
        Ok(match code {
            2 => Datatype::U8,
            4 => Datatype::I16,
            8 => Datatype::I32,
            16 => Datatype::F32,
            64 => Datatype::F64,
            other => return Err(IoError::UnsupportedDatatype(other)),
        })
    }

    fn width(self) -> usize {
        match self {
            Datatype::U8 => 1,
            Datatype::I16 => 2,
            Datatype::F32 | Datatype::I32 => 4,
            Datatype::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], endian: Endian) -> f64 {
        macro_rules! num {
            ($t:ty, $n:literal) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(b);
                match endian {
                    Endian::Little => <$t>::from_le_bytes(a) as f64,
                    Endian::Big => <$t>::from_be_bytes(a) as f64,
                }
            }};
        }
        match self {
            Datatype::U8 => b[0] as f64,
            Datatype::I16 => num!(i16, 2),
            Datatype::I32 => num!(i32, 4),
            Datatype::F32 => num!(f32, 4),
            Datatype::F64 => num!(f64, 8),
        }
    }
}

/// Reads a single-file NIfTI-1 volume, applying `scl_slope`/`scl_inter`.
pub fn read_nifti<T: Real>(path: impl AsRef<Path>) -> Result<Volume<T>, IoError> {
    let bytes = read_maybe_gz(path.as_ref())?;
    parse_nifti(&bytes)
}

/// Parses an in-memory NIfTI-1 image (header followed by data at `vox_offset`).
pub fn parse_nifti<T: Real>(bytes: &[u8]) -> Result<Volume<T>, IoError> {
    if bytes.len() < NIFTI_HEADER_LEN {
        return Err(IoError::MalformedHeader(format!(
            "file is {} bytes, shorter than the 348-byte header",
            bytes.len()
        )));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let endian = if le == NIFTI_HEADER_LEN as i32 {
        Endian::Little
    } else if be == NIFTI_HEADER_LEN as i32 {
        Endian::Big
    } else {
        return Err(IoError::MalformedHeader(format!("sizeof_hdr = {le}, expected 348")));
    };
    let h = HeaderReader { buf: bytes, endian };

    let ndim = h.i16(40);
    let dim: Vec<i16> = (0..8).map(|i| h.i16(40 + 2 * i)).collect();
    let ok_rank = ndim == 3 || (ndim == 4 && dim[4] == 1);
    if !ok_rank {
        return Err(IoError::MalformedHeader(format!(
            "expected a 3D volume, dim = {dim:?}"
        )));
    }
    if dim[1..4].iter().any(|&d| d <= 0) {
        return Err(IoError::MalformedHeader(format!("non-positive dimension in {dim:?}")));
    }
    let dims = [dim[1] as usize, dim[2] as usize, dim[3] as usize];
    let datatype = Datatype::from_code(h.i16(70))?;

    let pixdim = [h.f32(80), h.f32(84), h.f32(88)];
    if pixdim.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(IoError::MalformedHeader(format!("invalid pixdim {pixdim:?}")));
    }

    let vox_offset = h.f32(108);
    if !(vox_offset >= 0.0) || !vox_offset.is_finite() {
        return Err(IoError::MalformedHeader(format!("invalid vox_offset {vox_offset}")));
    }
    let offset = (vox_offset as usize).max(NIFTI_HEADER_LEN);
    let mut slope = h.f32(112) as f64;
    let inter = h.f32(116) as f64;
    if slope == 0.0 || !slope.is_finite() {
        slope = 1.0;
    }
    let inter = if inter.is_finite() { inter } else { 0.0 };

    let n = dims[0] * dims[1] * dims[2];
    let width = datatype.width();
    let expected = n * width;
    let available = bytes.len().saturating_sub(offset);
    if available < expected {
        return Err(IoError::TruncatedData {
            expected,
            found: available,
        });
    }
    let payload = &bytes[offset..offset + expected];
    let data: Vec<T> = payload
        .chunks_exact(width)
        .map(|c| T::lit(slope * datatype.decode(c, endian) + inter))
        .collect();
    Volume::new(dims, pixdim.map(|p| T::lit(p as f64)), data)
}

/// Encodes a volume as a float32 NIfTI-1 single file in the given byte order.
pub fn encode_nifti<T: Real>(vol: &Volume<T>, endian: Endian) -> Vec<u8> {
    let mut hdr = vec![0u8; NIFTI_HEADER_LEN + 4];
    let put_i16 = |hdr: &mut [u8], off: usize, v: i16| {
        let b = match endian {
            Endian::Little => v.to_le_bytes(),
            Endian::Big => v.to_be_bytes(),
        };
        hdr[off..off + 2].copy_from_slice(&b);
    };
    let put_f32 = |hdr: &mut [u8], off: usize, v: f32| {
        let b = match endian {
            Endian::Little => v.to_le_bytes(),
            Endian::Big => v.to_be_bytes(),
        };
        hdr[off..off + 4].copy_from_slice(&b);
    };
    let sizeof = match endian {
        Endian::Little => (NIFTI_HEADER_LEN as i32).to_le_bytes(),
        Endian::Big => (NIFTI_HEADER_LEN as i32).to_be_bytes(),
    };
    hdr[0..4].copy_from_slice(&sizeof);
    put_i16(&mut hdr, 40, 3);
    for (i, &d) in vol.dims.iter().enumerate() {
        put_i16(&mut hdr, 42 + 2 * i, d as i16);
    }
    put_i16(&mut hdr, 48, 1);
    put_i16(&mut hdr, 70, 16);
    put_i16(&mut hdr, 72, 32);
    put_f32(&mut hdr, 76, 1.0);
    for (i, &s) in vol.voxel_size_mm.iter().enumerate() {
        put_f32(&mut hdr, 80 + 4 * i, s.as_f64() as f32);
    }
    put_f32(&mut hdr, 108, (NIFTI_HEADER_LEN + 4) as f32);
    put_f32(&mut hdr, 112, 1.0);
    hdr[344..348].copy_from_slice(b"n+1\0");
    for v in &vol.data {
        let f = v.as_f64() as f32;
        hdr.extend_from_slice(&match endian {
            Endian::Little => f.to_le_bytes(),
            Endian::Big => f.to_be_bytes(),
        });
    }
    hdr
}

pub fn write_nifti<T: Real>(
    vol: &Volume<T>,
    path: impl AsRef<Path>,
    endian: Endian,
) -> Result<(), IoError> {
    let path = path.as_ref();
    std::fs::write(path, encode_nifti(vol, endian)).map_err(io_err(path))
}

/// JSON sidecar describing a raw `.f32` blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub dims: [usize; 3],
    pub voxel_size_mm: [f64; 3],
    pub scalar_bytes: usize,
}

/// Sidecar and blob paths for a raw volume given either of the two paths
/// (or the common stem).
pub fn raw_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("f32") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut sidecar = stem.clone().into_os_string();
    sidecar.push(".json");
    let mut blob = stem.into_os_string();
    blob.push(".f32");
    (sidecar.into(), blob.into())
}

/// Reads a raw volume: `<stem>.json` sidecar plus little-endian `<stem>.f32` blob.
pub fn read_raw<T: Real>(path: impl AsRef<Path>) -> Result<Volume<T>, IoError> {
    let (sidecar, blob) = raw_paths(path.as_ref());
    let text = std::fs::read_to_string(&sidecar)
        .map_err(|e| IoError::MissingHeader(format!("{}: {e}", sidecar.display())))?;
    let header: RawHeader = serde_json::from_str(&text)
        .map_err(|e| IoError::MissingHeader(format!("{}: {e}", sidecar.display())))?;
    if header.scalar_bytes != 4 {
        return Err(IoError::MissingHeader(format!(
            "scalar_bytes must be 4, got {}",
            header.scalar_bytes
        )));
    }
    if header.dims.contains(&0) {
        return Err(IoError::MissingHeader(format!("zero dimension in {:?}", header.dims)));
    }
    if header
        .voxel_size_mm
        .iter()
        .any(|&s| !(s > 0.0) || !s.is_finite())
    {
        return Err(IoError::MissingHeader(format!(
            "voxel sizes must be positive, got {:?}",
            header.voxel_size_mm
        )));
    }
    let bytes = std::fs::read(&blob).map_err(io_err(&blob))?;
    let n = header.dims.iter().product::<usize>();
    if bytes.len() != n * 4 {
        return Err(IoError::LengthMismatch {
            expected: n,
            found: bytes.len(),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    Volume::new(header.dims, header.voxel_size_mm.map(T::lit), data)
}

/// Writes `<stem>.json` and `<stem>.f32`; the payload is narrowed to f32.
pub fn write_raw<T: Real>(vol: &Volume<T>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let (sidecar, blob) = raw_paths(path.as_ref());
    let header = RawHeader {
        dims: vol.dims,
        voxel_size_mm: vol.voxel_size_mm.map(|v| v.as_f64()),
        scalar_bytes: 4,
    };
    let mut text = serde_json::to_string_pretty(&header).expect("header serializes");
    text.push('\n');
    std::fs::write(&sidecar, text).map_err(io_err(&sidecar))?;
    let mut bytes = Vec::with_capacity(vol.data.len() * 4);
    for v in &vol.data {
        bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    std::fs::write(&blob, bytes).map_err(io_err(&blob))
}

/// Reads `.nii` / `.nii.gz` as NIfTI and anything else as a raw volume.
pub fn read_volume<T: Real>(path: impl AsRef<Path>) -> Result<Volume<T>, IoError> {
    let path = path.as_ref();
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.ends_with(".nii") || name.ends_with(".nii.gz") {
        read_nifti(path)
    } else {
        read_raw(path)
    }
}

/// Diagnostic group of a subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Normal,
    #[serde(rename = "SWEDD")]
    Swedd,
    #[serde(rename = "PD")]
    Pd,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Normal, Group::Swedd, Group::Pd];

    /// True for scans with dopaminergic deficit.
    pub fn is_deficit(self) -> bool {
        matches!(self, Group::Pd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Normal => "Normal",
            Group::Swedd => "SWEDD",
            Group::Pd => "PD",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "hc" => Ok(Group::Normal),
            "swedd" => Ok(Group::Swedd),
            "pd" => Ok(Group::Pd),
            other => Err(format!("unknown group label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub path: PathBuf,
    pub label: Group,
    pub threshold_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CohortManifest {
    pub entries: Vec<ManifestEntry>,
}

/// Loads a manifest CSV with header `subject_id,path,label[,threshold_override]`.
/// Relative volume paths resolve against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<CohortManifest, IoError> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let index = i + 1;
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("").to_string();
        let subject_id = field(0);
        if subject_id.is_empty() {
            return Err(IoError::BadRow {
                index,
                reason: "empty subject_id".into(),
            });
        }
        let rel = PathBuf::from(field(1));
        let label: Group = field(2)
            .parse()
            .map_err(|reason| IoError::BadRow { index, reason })?;
        let threshold_override = match rec.get(3).map(str::trim) {
            None | Some("") => None,
            Some(s) => {
                let t: f64 = s.parse().map_err(|_| IoError::BadRow {
                    index,
                    reason: format!("threshold_override {s:?} is not a number"),
                })?;
                if !(t > 0.0 && t < 1.0) {
                    return Err(IoError::BadRow {
                        index,
                        reason: format!("threshold_override {t} outside (0,1)"),
                    });
                }
                Some(t)
            }
        };
        if !seen.insert(subject_id.clone()) {
            return Err(IoError::DuplicateSubject(subject_id));
        }
        let path = if rel.is_absolute() { rel } else { base.join(rel) };
        entries.push(ManifestEntry {
            subject_id,
            path,
            label,
            threshold_override,
        });
    }
    Ok(CohortManifest { entries })
}

/// Per-subject striatal binding ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbrRecord {
    pub subject_id: String,
    pub caudate_left: f64,
    pub caudate_right: f64,
    pub putamen_left: f64,
    pub putamen_right: f64,
}

/// Loads an SBR table (`subject_id,caudate_l,caudate_r,putamen_l,putamen_r`).
/// Row indices in errors are 1-based data rows.
pub fn load_sbr_table(path: impl AsRef<Path>) -> Result<Vec<SbrRecord>, IoError> {
    let rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    parse_sbr(rdr)
}

pub fn parse_sbr_str(text: &str) -> Result<Vec<SbrRecord>, IoError> {
    let rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    parse_sbr(rdr)
}

fn parse_sbr<R: Read>(mut rdr: csv::Reader<R>) -> Result<Vec<SbrRecord>, IoError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let index = i + 1;
        let rec = rec.map_err(|e| IoError::BadRow {
            index,
            reason: e.to_string(),
        })?;
        if rec.len() != 5 {
            return Err(IoError::BadRow {
                index,
                reason: format!("expected 5 fields, found {}", rec.len()),
            });
        }
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            let s = &rec[k + 1];
            let x: f64 = s.parse().map_err(|_| IoError::BadRow {
                index,
                reason: format!("{s:?} is not a number"),
            })?;
            if !x.is_finite() || x < 0.0 {
                return Err(IoError::BadRow {
                    index,
                    reason: format!("ratio {x} must be finite and non-negative"),
                });
            }
            *v = x;
        }
        let subject_id = rec[0].to_string();
        if !seen.insert(subject_id.clone()) {
            return Err(IoError::DuplicateSubject(subject_id));
        }
        out.push(SbrRecord {
            subject_id,
            caudate_left: vals[0],
            caudate_right: vals[1],
            putamen_left: vals[2],
            putamen_right: vals[3],
        });
    }
    Ok(out)
}

pub fn write_sbr_table(records: &[SbrRecord], path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["subject_id", "caudate_l", "caudate_r", "putamen_l", "putamen_r"])?;
    for r in records {
        w.write_record([
            r.subject_id.clone(),
            r.caudate_left.to_string(),
            r.caudate_right.to_string(),
            r.putamen_left.to_string(),
            r.putamen_right.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IoError::Io {
        path: path.as_ref().to_path_buf(),
        source: e,
    })
}
