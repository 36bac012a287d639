//! Labeled data streams and their on-disk formats.
//!
//! A [`DataPacket`] holds `m` frames of a `p`-dimensional state vector. For
//! two-dimensional molecules a frame is laid out as `[x_1..x_Na, y_1..y_Na]`.
//!
//! Trajectories are stored either as headerless CSV (one frame per row) or as
//! a little-endian binary file: the 8-byte magic [`BINARY_MAGIC`], `p` and `m`
//! as `u64`, then `m * p` `f64` values in row-major order. A manifest (JSON)
//! lists the packets of a data set.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SplocError};

pub const BINARY_MAGIC: [u8; 8] = *b"SPLOCTRJ";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Functional,
    Nonfunctional,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Functional => "functional",
            Label::Nonfunctional => "nonfunctional",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = SplocError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "functional" => Ok(Label::Functional),
            "nonfunctional" => Ok(Label::Nonfunctional),
            _ => Err(SplocError::Parse {
                what: "label",
                text: s.to_string(),
                reason: "expected `functional` or `nonfunctional`".into(),
            }),
        }
    }
}

/// One point of the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(SplocError::invalid(format!(
                "state vector needs dimension >= 2, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SplocError::invalid(format!("non-finite coordinate at index {i}")));
        }
        Ok(StateVector(DVector::from_vec(values)))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// A labeled ensemble of frames. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct DataPacket {
    id: String,
    label: Label,
    /// `m x p`, one frame per row.
    frames: DMatrix<f64>,
    source: String,
}

impl DataPacket {
    pub fn new(
        id: impl Into<String>,
        label: Label,
        frames: DMatrix<f64>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        if frames.nrows() < 2 {
            return Err(SplocError::invalid(format!(
                "packet {id}: needs at least 2 frames, got {}",
                frames.nrows()
            )));
        }
        if frames.ncols() < 2 {
            return Err(SplocError::invalid(format!(
                "packet {id}: dimension must be >= 2, got {}",
                frames.ncols()
            )));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(SplocError::invalid(format!("packet {id}: non-finite coordinate")));
        }
        Ok(DataPacket {
            id,
            label,
            frames,
            source: source.into(),
        })
    }

    /// Build from a list of frames given as rows.
    pub fn from_rows(
        id: impl Into<String>,
        label: Label,
        rows: &[Vec<f64>],
        source: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(SplocError::DimensionMismatch {
                context: format!("packet {id}"),
                expected: p,
                found: bad.len(),
            });
        }
        let frames = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(id, label, frames, source)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn frames(&self) -> &DMatrix<f64> {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    /// Mean frame of this packet.
    pub fn mean(&self) -> DVector<f64> {
        let m = self.n_frames() as f64;
        self.frames.row_sum().transpose() / m
    }
}

/// Split a stream into `parts` contiguous, order-preserving blocks. When `m`
/// is not divisible by `parts` the earlier blocks take one extra frame each.
/// Block `k` (1-based) is named `"{id}.{k}"`; `parts == 1` returns the packet
/// unchanged.
pub fn split_stream(packet: &DataPacket, parts: usize) -> Result<Vec<DataPacket>> {
    if parts == 0 {
        return Err(SplocError::invalid("split_stream: parts must be >= 1"));
    }
    let m = packet.n_frames();
    if m < 2 * parts {
        return Err(SplocError::invalid(format!(
            "split_stream: packet {} has {m} frames, need at least {} for {parts} parts",
            packet.id,
            2 * parts
        )));
    }
    if parts == 1 {
        return Ok(vec![packet.clone()]);
    }
    let base = m / parts;
    let extra = m % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        let block = packet.frames.rows(start, len).into_owned();
        out.push(DataPacket {
            id: format!("{}.{}", packet.id, k + 1),
            label: packet.label,
            frames: block,
            source: format!("{}[{}..{}]", packet.source, start, start + len),
        });
        start += len;
    }
    Ok(out)
}

/// Frame-weighted mean over every frame of every packet.
pub fn pooled_mean(packets: &[DataPacket]) -> Result<StateVector> {
    let first = packets
        .first()
        .ok_or_else(|| SplocError::invalid("pooled_mean: empty packet list"))?;
    let p = first.dim();
    let mut sum = DVector::zeros(p);
    let mut count = 0usize;
    for pk in packets {
        if pk.dim() != p {
            return Err(SplocError::DimensionMismatch {
                context: format!("pooled_mean, packet {}", pk.id),
                expected: p,
                found: pk.dim(),
            });
        }
        sum += pk.frames.row_sum().transpose();
        count += pk.n_frames();
    }
    Ok(StateVector(sum / count as f64))
}

/// Check that every packet shares dimension `p` and both labels are present.
pub fn validate_training_set(packets: &[DataPacket]) -> Result<usize> {
    let p = packets
        .first()
        .ok_or_else(|| SplocError::invalid("no packets"))?
        .dim();
    for pk in packets {
        if pk.dim() != p {
            return Err(SplocError::DimensionMismatch {
                context: format!("packet {}", pk.id),
                expected: p,
                found: pk.dim(),
            });
        }
    }
    for label in [Label::Functional, Label::Nonfunctional] {
        if !packets.iter().any(|pk| pk.label == label) {
            return Err(SplocError::invalid(format!("no {label} packets")));
        }
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Trajectory files

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    #[default]
    Csv,
    Binary,
}

impl TrajectoryFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TrajectoryFormat::Csv => "csv",
            TrajectoryFormat::Binary => "bin",
        }
    }
}

pub fn read_trajectory(path: &Path, format: TrajectoryFormat) -> Result<DMatrix<f64>> {
    match format {
        TrajectoryFormat::Csv => read_csv_trajectory(path),
        TrajectoryFormat::Binary => read_binary_trajectory(path),
    }
}

pub fn write_trajectory(path: &Path, frames: &DMatrix<f64>, format: TrajectoryFormat) -> Result<()> {
    match format {
        TrajectoryFormat::Csv => write_csv_trajectory(path, frames),
        TrajectoryFormat::Binary => write_binary_trajectory(path, frames),
    }
}

fn trajectory_error(path: &Path, reason: impl Into<String>) -> SplocError {
    SplocError::Trajectory {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn read_csv_trajectory(path: &Path) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path).map_err(|e| SplocError::io(path, e))?;
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SplocError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                trajectory_error(path, format!("line {}: bad number {field:?}", lineno + 1))
            })?;
            values.push(v);
        }
        let w = values.len() - before;
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(trajectory_error(
                    path,
                    format!("line {}: {w} columns, expected {expected}", lineno + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let p = width.ok_or_else(|| trajectory_error(path, "empty file"))?;
    Ok(DMatrix::from_row_slice(rows, p, &values))
}

pub fn write_csv_trajectory(path: &Path, frames: &DMatrix<f64>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| SplocError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for row in frames.row_iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| SplocError::io(path, e))?;
    }
    w.flush().map_err(|e| SplocError::io(path, e))
}

pub fn read_binary_trajectory(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| SplocError::io(path, e))?;
    if bytes.len() < 24 || bytes[..8] != BINARY_MAGIC {
        return Err(trajectory_error(path, "missing binary trajectory magic"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().unwrap());
    let (p, m) = (word(0) as usize, word(1) as usize);
    let expected = m
        .checked_mul(p)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24))
        .ok_or_else(|| trajectory_error(path, "header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(trajectory_error(
            path,
            format!("expected {expected} bytes for {m} x {p}, found {}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DMatrix::from_row_slice(m, p, &values))
}

pub fn write_binary_trajectory(path: &Path, frames: &DMatrix<f64>) -> Result<()> {
    let (m, p) = frames.shape();
    let mut bytes = Vec::with_capacity(24 + 8 * m * p);
    bytes.extend_from_slice(&BINARY_MAGIC);
    bytes.extend_from_slice(&(p as u64).to_le_bytes());
    bytes.extend_from_slice(&(m as u64).to_le_bytes());
    for row in frames.row_iter() {
        for v in row.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| SplocError::io(path, e))
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestFile {
    dimension: usize,
    #[serde(default)]
    atoms: Option<usize>,
    packets: Vec<ManifestEntryFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestEntryFile {
    id: String,
    label: Label,
    path: String,
    #[serde(default)]
    format: TrajectoryFormat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub label: Label,
    /// Path as written in the manifest (relative to the manifest directory
    /// unless absolute).
    pub path: String,
    /// Resolved path.
    pub resolved: PathBuf,
    pub format: TrajectoryFormat,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketManifest {
    pub dimension: usize,
    pub atoms: Option<usize>,
    pub packets: Vec<ManifestEntry>,
    pub seed: Option<u64>,
    pub provenance: Option<String>,
}

/// Read and validate a manifest. Every trajectory is opened to check its
/// width against the declared dimension.
pub fn load_manifest(path: &Path) -> Result<PacketManifest> {
    let text = fs::read_to_string(path).map_err(|e| SplocError::io(path, e))?;
    let raw: ManifestFile =
        serde_json::from_str(&text).map_err(|e| SplocError::Manifest(e.to_string()))?;
    if raw.packets.is_empty() {
        return Err(SplocError::Manifest("no packets".into()));
    }
    if raw.dimension < 2 {
        return Err(SplocError::Manifest(format!(
            "dimension must be >= 2, got {}",
            raw.dimension
        )));
    }
    if let Some(na) = raw.atoms {
        if 2 * na != raw.dimension {
            return Err(SplocError::Manifest(format!(
                "atoms = {na} is inconsistent with dimension {}",
                raw.dimension
            )));
        }
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut packets = Vec::with_capacity(raw.packets.len());
    for entry in raw.packets {
        if !seen.insert(entry.id.clone()) {
            return Err(SplocError::Manifest(format!("duplicate packet id {:?}", entry.id)));
        }
        let resolved = base.join(&entry.path);
        let frames = read_trajectory(&resolved, entry.format)?;
        if frames.ncols() != raw.dimension {
            return Err(SplocError::DimensionMismatch {
                context: format!("packet {} ({})", entry.id, resolved.display()),
                expected: raw.dimension,
                found: frames.ncols(),
            });
        }
        packets.push(ManifestEntry {
            id: entry.id,
            label: entry.label,
            path: entry.path,
            resolved,
            format: entry.format,
            frames: frames.nrows(),
        });
    }
    Ok(PacketManifest {
        dimension: raw.dimension,
        atoms: raw.atoms,
        packets,
        seed: raw.seed,
        provenance: raw.provenance,
    })
}

impl PacketManifest {
    /// Read every packet listed in the manifest.
    pub fn load_packets(&self) -> Result<Vec<DataPacket>> {
        self.packets
            .iter()
            .map(|e| {
                let frames = read_trajectory(&e.resolved, e.format)?;
                DataPacket::new(e.id.clone(), e.label, frames, e.resolved.display().to_string())
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let raw = ManifestFile {
            dimension: self.dimension,
            atoms: self.atoms,
            packets: self
                .packets
                .iter()
                .map(|e| ManifestEntryFile {
                    id: e.id.clone(),
                    label: e.label,
                    path: e.path.clone(),
                    format: e.format,
                })
                .collect(),
            seed: self.seed,
            provenance: self.provenance.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("manifest serializes")
    }

    pub fn count(&self, label: Label) -> usize {
        self.packets.iter().filter(|e| e.label == label).count()
    }
}

/// Write packets as trajectory files under `dir` together with
/// `dir/manifest.json`. Returns the manifest path.
pub fn write_dataset(
    dir: &Path,
    packets: &[DataPacket],
    atoms: Option<usize>,
    format: TrajectoryFormat,
    seed: Option<u64>,
    provenance: Option<String>,
) -> Result<PathBuf> {
    let p = validate_dimensions(packets)?;
    fs::create_dir_all(dir).map_err(|e| SplocError::io(dir, e))?;
    let mut entries = Vec::with_capacity(packets.len());
    for pk in packets {
        let rel = format!("{}.{}", pk.id, format.extension());
        let resolved = dir.join(&rel);
        write_trajectory(&resolved, &pk.frames, format)?;
        entries.push(ManifestEntry {
            id: pk.id.clone(),
            label: pk.label,
            path: rel,
            resolved,
            format,
            frames: pk.n_frames(),
        });
    }
    let manifest = PacketManifest {
        dimension: p,
        atoms,
        packets: entries,
        seed,
        provenance,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).map_err(|e| SplocError::io(&path, e))?;
    Ok(path)
}

fn validate_dimensions(packets: &[DataPacket]) -> Result<usize> {
    let p = packets
        .first()
        .ok_or_else(|| SplocError::invalid("no packets"))?
        .dim();
    if let Some(bad) = packets.iter().find(|pk| pk.dim() != p) {
        return Err(SplocError::DimensionMismatch {
            context: format!("packet {}", bad.id),
            expected: p,
            found: bad.dim(),
        });
    }
    Ok(p)
}
