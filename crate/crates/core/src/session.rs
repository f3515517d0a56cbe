//! Session assembly and dataset construction.
//!
//! Turns decoded packets into labeled, fixed-length session samples:
//! filter (zero-payload TCP and DNS dropped), strip the link layer, zero the
//! IP address fields, concatenate per session, trim/pad to 784 bytes, and
//! persist as a little-endian dataset file with a text manifest. Also houses
//! the deterministic stratified train/validation/test split.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::net::IpAddr;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pcap::{
    canonical_session_key, decode_packet, read_capture, ParsedPacket, PcapError, SessionKey,
    Transport,
};
use crate::SAMPLE_LEN;

/// Dataset file magic.
pub const DATASET_MAGIC: &[u8; 4] = b"TSD1";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no label pattern matches capture file '{0}'")]
    UnlabeledFile(String),
    #[error("label map is invalid: {0}")]
    BadLabelMap(String),
    #[error("cannot normalize an empty session")]
    EmptySession,
    #[error("class {class} has {count} samples; at least 3 are required to split")]
    ClassTooSmall { class: usize, count: usize },
    #[error("split fraction {0} outside [0, 1)")]
    BadFraction(f64),
    #[error("malformed dataset file: {0}")]
    MalformedDataset(String),
    #[error(transparent)]
    Pcap(#[from] PcapError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One cleaned, fixed-length session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSample {
    /// Exactly 784 raw (unscaled) bytes.
    pub bytes: Vec<u8>,
    pub label: u8,
    /// Capture file the session came from (empty when loaded from a dataset).
    pub source_file: String,
}

/// Ordered filename-substring patterns mapped to class indices.
///
/// Patterns are tried in listed order; the first hit wins, so more specific
/// patterns (e.g. `vpn_chat`) must precede the generic ones (`chat`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub patterns: Vec<(String, usize)>,
    pub class_names: Vec<String>,
}

impl LabelMap {
    /// Checks that every class index is in range and appears in some pattern.
    pub fn validate(&self) -> Result<(), SessionError> {
        let n = self.class_names.len();
        if n == 0 {
            return Err(SessionError::BadLabelMap("no classes defined".into()));
        }
        if n > 256 {
            return Err(SessionError::BadLabelMap(format!(
                "{n} classes exceed the 256 representable by the dataset label byte"
            )));
        }
        for (pat, class) in &self.patterns {
            if *class >= n {
                return Err(SessionError::BadLabelMap(format!(
                    "pattern '{pat}' maps to class {class} but only {n} classes exist"
                )));
            }
        }
        for class in 0..n {
            if !self.patterns.iter().any(|(_, c)| *c == class) {
                return Err(SessionError::BadLabelMap(format!(
                    "class {class} ('{}') has no pattern",
                    self.class_names[class]
                )));
            }
        }
        Ok(())
    }

    /// First-hit pattern match against the capture file name.
    pub fn resolve(&self, file_name: &str) -> Option<usize> {
        self.patterns
            .iter()
            .find(|(pat, _)| file_name.contains(pat.as_str()))
            .map(|(_, class)| *class)
    }
}

/// Counters emitted alongside a built dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineStats {
    pub per_class: Vec<usize>,
    /// Sessions whose packets were all filtered out.
    pub dropped_sessions: usize,
    pub decoded_packets: usize,
    pub kept_packets: usize,
}

/// A dataset scaled to `[0, 1]`, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Vec<f32>>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Packet filter: drops zero-payload TCP packets and any packet with an
/// endpoint on port 53.
pub fn keep_packet(p: &ParsedPacket) -> bool {
    if p.protocol == Transport::Tcp && p.payload_len() == 0 {
        return false;
    }
    if p.src_port == 53 || p.dst_port == 53 {
        return false;
    }
    true
}

/// Strips the link layer and zeroes the IP address fields.
///
/// Returns the bytes from the start of the IP header to the end of the IP
/// packet; source and destination address fields of the copy are overwritten
/// with `0x00`. The original record is untouched.
pub fn sanitize_packet_bytes(p: &ParsedPacket, record_bytes: &[u8]) -> Vec<u8> {
    let mut out = record_bytes[p.l3_offset..p.total_len].to_vec();
    match p.src_ip {
        IpAddr::V4(_) => out[12..20].fill(0),
        IpAddr::V6(_) => out[8..40].fill(0),
    }
    out
}

/// Trims or zero-pads a session byte sequence to exactly 784 bytes.
pub fn normalize_length(raw: &[u8]) -> Result<Vec<u8>, SessionError> {
    if raw.is_empty() {
        return Err(SessionError::EmptySession);
    }
    let mut out = raw.to_vec();
    out.resize(SAMPLE_LEN, 0);
    out.truncate(SAMPLE_LEN);
    Ok(out)
}

/// Scales raw sample bytes to `[0, 1]` by dividing by 255.
pub fn scale(bytes: &[u8]) -> Vec<f32> {
    bytes.iter().map(|&b| b as f32 / 255.0).collect()
}

struct SessionAccum {
    /// (ts_sec, ts_usec, record index, sanitized bytes) of kept packets.
    kept: Vec<(u32, u32, usize, Vec<u8>)>,
    seen: bool,
}

/// Builds session samples from in-memory captures.
///
/// `captures` holds `(file name, raw pcap bytes)` in input order. Sessions
/// within a file are emitted ordered by (first kept packet time, session
/// key); sessions whose packets were all filtered count as dropped.
pub fn build_dataset(
    captures: &[(String, Vec<u8>)],
    labels: &LabelMap,
) -> Result<(Vec<SessionSample>, PipelineStats), SessionError> {
    labels.validate()?;
    let mut stats = PipelineStats {
        per_class: vec![0; labels.class_names.len()],
        ..PipelineStats::default()
    };
    let mut samples = Vec::new();
    for (name, raw) in captures {
        let class = labels
            .resolve(name)
            .ok_or_else(|| SessionError::UnlabeledFile(name.clone()))?;
        let (_, records) = read_capture(raw)?;
        let mut sessions: BTreeMap<SessionKey, SessionAccum> = BTreeMap::new();
        for (idx, record) in records.iter().enumerate() {
            let Some(p) = decode_packet(record)? else { continue };
            stats.decoded_packets += 1;
            let key = canonical_session_key(&p);
            let entry = sessions
                .entry(key)
                .or_insert_with(|| SessionAccum { kept: Vec::new(), seen: true });
            entry.seen = true;
            if keep_packet(&p) {
                stats.kept_packets += 1;
                entry
                    .kept
                    .push((p.ts_sec, p.ts_usec, idx, sanitize_packet_bytes(&p, record.data)));
            }
        }
        // (first kept packet time, key) ordering within the file
        let mut ordered: Vec<(u32, u32, usize, SessionKey, Vec<u8>)> = Vec::new();
        for (key, mut accum) in sessions {
            if accum.kept.is_empty() {
                stats.dropped_sessions += 1;
                continue;
            }
            accum.kept.sort_by_key(|(s, u, i, _)| (*s, *u, *i));
            let first = (accum.kept[0].0, accum.kept[0].1, accum.kept[0].2);
            let raw: Vec<u8> = accum.kept.into_iter().flat_map(|(_, _, _, b)| b).collect();
            ordered.push((first.0, first.1, first.2, key, raw));
        }
        ordered.sort_by(|a, b| (a.0, a.1, a.2, &a.3).cmp(&(b.0, b.1, b.2, &b.3)));
        for (_, _, _, _, raw) in ordered {
            samples.push(SessionSample {
                bytes: normalize_length(&raw)?,
                label: class as u8,
                source_file: name.clone(),
            });
            stats.per_class[class] += 1;
        }
    }
    Ok((samples, stats))
}

/// Reads capture files from disk and builds the dataset; thin wrapper over
/// [`build_dataset`].
pub fn build_dataset_from_files<P: AsRef<Path>>(
    paths: &[P],
    labels: &LabelMap,
) -> Result<(Vec<SessionSample>, PipelineStats), SessionError> {
    let mut captures = Vec::with_capacity(paths.len());
    for p in paths {
        let name = p.as_ref().to_string_lossy().into_owned();
        let raw = fs::read(p.as_ref())?;
        captures.push((name, raw));
    }
    build_dataset(&captures, labels)
}

/// Writes samples as a dataset file: magic `TSD1`, little-endian u32
/// sample count, sample length (784) and class count, then per sample 784
/// raw bytes followed by one label byte.
pub fn write_dataset(
    path: &Path,
    samples: &[SessionSample],
    num_classes: usize,
) -> Result<(), SessionError> {
    if num_classes == 0 || num_classes > 256 {
        return Err(SessionError::MalformedDataset(format!(
            "class count {num_classes} not representable by the label byte"
        )));
    }
    let mut out = Vec::with_capacity(16 + samples.len() * (SAMPLE_LEN + 1));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    out.extend_from_slice(&(SAMPLE_LEN as u32).to_le_bytes());
    out.extend_from_slice(&(num_classes as u32).to_le_bytes());
    for s in samples {
        debug_assert_eq!(s.bytes.len(), SAMPLE_LEN);
        debug_assert!((s.label as usize) < num_classes);
        out.extend_from_slice(&s.bytes);
        out.push(s.label);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a dataset file back into raw (unscaled) samples.
pub fn read_dataset(path: &Path) -> Result<(Vec<SessionSample>, usize), SessionError> {
    let raw = fs::read(path)?;
    if raw.len() < 16 {
        return Err(SessionError::MalformedDataset(format!(
            "{} bytes is shorter than the 16-byte header",
            raw.len()
        )));
    }
    if &raw[0..4] != DATASET_MAGIC {
        return Err(SessionError::MalformedDataset("bad magic".into()));
    }
    let u32_at =
        |off: usize| u32::from_le_bytes([raw[off], raw[off + 1], raw[off + 2], raw[off + 3]]);
    let count = u32_at(4) as usize;
    let sample_len = u32_at(8) as usize;
    let num_classes = u32_at(12) as usize;
    if sample_len != SAMPLE_LEN {
        return Err(SessionError::MalformedDataset(format!(
            "sample length {sample_len}, expected {SAMPLE_LEN}"
        )));
    }
    let want = 16 + count * (SAMPLE_LEN + 1);
    if raw.len() != want {
        return Err(SessionError::MalformedDataset(format!(
            "file is {} bytes, expected {want} for {count} samples",
            raw.len()
        )));
    }
    let source = path.to_string_lossy().into_owned();
    let mut samples = Vec::with_capacity(count);
    let mut off = 16;
    for _ in 0..count {
        let bytes = raw[off..off + SAMPLE_LEN].to_vec();
        let label = raw[off + SAMPLE_LEN];
        if (label as usize) >= num_classes {
            return Err(SessionError::MalformedDataset(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        samples.push(SessionSample { bytes, label, source_file: source.clone() });
        off += SAMPLE_LEN + 1;
    }
    Ok((samples, num_classes))
}

/// Loads a dataset file and scales it to `[0, 1]`.
pub fn load_scaled(path: &Path) -> Result<Dataset, SessionError> {
    let (samples, num_classes) = read_dataset(path)?;
    Ok(to_scaled(&samples, num_classes))
}

/// Scales raw samples into a training-ready [`Dataset`].
pub fn to_scaled(samples: &[SessionSample], num_classes: usize) -> Dataset {
    Dataset {
        samples: samples.iter().map(|s| scale(&s.bytes)).collect(),
        labels: samples.iter().map(|s| s.label as u32).collect(),
        num_classes,
    }
}

/// Writes the sidecar text manifest: totals, then one `class <index> <name>
/// <count>` line per class in index order.
pub fn write_manifest(
    path: &Path,
    class_names: &[String],
    stats: &PipelineStats,
) -> Result<(), SessionError> {
    let total: usize = stats.per_class.iter().sum();
    let mut out = String::new();
    let _ = writeln!(out, "samples = {total}");
    let _ = writeln!(out, "dropped_sessions = {}", stats.dropped_sessions);
    let _ = writeln!(out, "classes = {}", class_names.len());
    for (i, name) in class_names.iter().enumerate() {
        let _ = writeln!(out, "class {i} {name} {}", stats.per_class[i]);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads class names back from a manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<String>, SessionError> {
    let text = fs::read_to_string(path)?;
    let mut names = Vec::new();
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        if parts.next() == Some("class") {
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| SessionError::MalformedDataset("bad manifest class line".into()))?;
            let name = parts
                .next()
                .ok_or_else(|| SessionError::MalformedDataset("bad manifest class line".into()))?;
            if idx != names.len() {
                return Err(SessionError::MalformedDataset(format!(
                    "manifest class {idx} out of order"
                )));
            }
            names.push(name.to_string());
        }
    }
    Ok(names)
}

/// Index-level stratified split. Per class: `round(n × test_frac)` test
/// samples, then `round(pool × val_frac)` validation samples from the
/// remainder, rest train. Deterministic given the seed.
pub fn split_indices(
    labels: &[u32],
    num_classes: usize,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>), SessionError> {
    for f in [test_frac, val_frac] {
        if !(0.0..1.0).contains(&f) {
            return Err(SessionError::BadFraction(f));
        }
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (class, mut indices) in by_class.into_iter().enumerate() {
        if indices.len() < 3 {
            return Err(SessionError::ClassTooSmall { class, count: indices.len() });
        }
        indices.shuffle(&mut rng);
        let n = indices.len();
        let n_test = ((n as f64) * test_frac).round() as usize;
        let pool = n - n_test;
        let n_val = ((pool as f64) * val_frac).round() as usize;
        test.extend_from_slice(&indices[..n_test]);
        val.extend_from_slice(&indices[n_test..n_test + n_val]);
        train.extend_from_slice(&indices[n_test + n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((train, val, test))
}

/// Splits a scaled dataset into (train, validation, test) subsets.
pub fn stratified_split(
    data: &Dataset,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), SessionError> {
    let (train, val, test) =
        split_indices(&data.labels, data.num_classes, test_frac, val_frac, seed)?;
    Ok((data.subset(&train), data.subset(&val), data.subset(&test)))
}
