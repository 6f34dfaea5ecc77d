use std::fs;
use std::io::Write;
use std::path::Path;

use crate::qcore::BlochVector;
use crate::sme::{steps_in, Axis, Dataset, DatasetMeta, Prep, TrajectoryRecord, WeakRecord, FORMAT_VERSION};

use super::DataioError;

pub const META_FILE: &str = "meta.json";
pub const RECORDS_FILE: &str = "records.bin";
pub const TRUTH_FILE: &str = "truth.bin";

/// Major component of a `major.minor` version string.
pub fn major(v: &str) -> &str {
    v.split('.').next().unwrap_or("")
}

/// Expected step count of every shot, in storage order.
fn expected_steps(meta: &DatasetMeta) -> Result<Vec<usize>, DataioError> {
    let mut v = Vec::with_capacity(meta.n_shots());
    for (t, c) in meta.t_grid.iter().zip(&meta.counts) {
        let n = steps_in(*t, meta.dt)?;
        v.extend(std::iter::repeat_n(n, c * Prep::ALL.len() * Axis::ALL.len()));
    }
    Ok(v)
}

fn with_crc(mut body: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&body);
    body.extend_from_slice(&crc.to_le_bytes());
    body
}

/// Encodes records as `[prep u8][axis u8][outcome i8][n u32][n × (f32, f32)]`
/// blocks followed by a CRC32 footer.
pub fn encode_records(shots: &[TrajectoryRecord]) -> Vec<u8> {
    let len: usize = shots.iter().map(|s| 7 + 8 * s.n_steps()).sum();
    let mut b = Vec::with_capacity(len + 4);
    for s in shots {
        b.push(s.prep.index() as u8);
        b.push(s.axis.index() as u8);
        b.push(s.outcome as u8);
        b.extend_from_slice(&(s.n_steps() as u32).to_le_bytes());
        for (i, q) in s.record.dm_i.iter().zip(&s.record.dm_q) {
            b.extend_from_slice(&(*i as f32).to_le_bytes());
            b.extend_from_slice(&(*q as f32).to_le_bytes());
        }
    }
    with_crc(b)
}

/// Encodes truth series as `n + 1` triples of `f32` per shot, CRC footer.
pub fn encode_truth(shots: &[TrajectoryRecord]) -> Result<Vec<u8>, DataioError> {
    let mut b = Vec::new();
    for (i, s) in shots.iter().enumerate() {
        let t = s.truth.as_ref().ok_or_else(|| DataioError::Invalid(format!("shot {i} has no truth series")))?;
        if t.len() != s.n_steps() + 1 {
            return Err(DataioError::Invalid(format!("shot {i} truth has {} states for {} steps", t.len(), s.n_steps())));
        }
        for r in t {
            for c in r.as_array() {
                b.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
    }
    Ok(with_crc(b))
}

/// Writes `meta.json`, `records.bin` and, when the meta asks for it,
/// `truth.bin` into `dir`. Values are stored as `f32`.
pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<(), DataioError> {
    data.meta.validate()?;
    let want = data.meta.n_shots();
    if data.len() != want {
        return Err(DataioError::CountMismatch { expected: want, found: data.len() });
    }
    fs::create_dir_all(dir)?;
    let mut meta = serde_json::to_string_pretty(&data.meta)?;
    meta.push('\n');
    fs::write(dir.join(META_FILE), meta)?;
    fs::write(dir.join(RECORDS_FILE), encode_records(&data.shots))?;
    let truth = dir.join(TRUTH_FILE);
    if data.meta.store_truth {
        fs::write(&truth, encode_truth(&data.shots)?)?;
    } else if truth.exists() {
        fs::remove_file(truth)?;
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    shot: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataioError> {
        if self.pos + n > self.buf.len() {
            return Err(DataioError::TruncatedStream { shot: self.shot });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f32(&mut self) -> Result<f64, DataioError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

fn split_footer(bytes: &[u8]) -> Result<(&[u8], u32), DataioError> {
    if bytes.len() < 4 {
        return Err(DataioError::TruncatedStream { shot: 0 });
    }
    let (body, foot) = bytes.split_at(bytes.len() - 4);
    Ok((body, u32::from_le_bytes(foot.try_into().unwrap())))
}

fn check_crc(body: &[u8], crc: u32, file: &str) -> Result<(), DataioError> {
    if crc32fast::hash(body) != crc {
        return Err(DataioError::ChecksumMismatch { file: file.into() });
    }
    Ok(())
}

/// Decodes a records stream against the step counts implied by `meta`.
pub fn decode_records(bytes: &[u8], meta: &DatasetMeta) -> Result<Vec<TrajectoryRecord>, DataioError> {
    let steps = expected_steps(meta)?;
    let (body, crc) = split_footer(bytes)?;
    let mut c = Cursor { buf: body, pos: 0, shot: 0 };
    let mut shots = Vec::with_capacity(steps.len());
    for (i, &want) in steps.iter().enumerate() {
        c.shot = i;
        let head = c.take(7)?;
        let prep = Prep::from_index(head[0] as usize)
            .ok_or_else(|| DataioError::Invalid(format!("shot {i}: preparation byte {}", head[0])))?;
        let axis = Axis::from_index(head[1] as usize)
            .ok_or_else(|| DataioError::Invalid(format!("shot {i}: axis byte {}", head[1])))?;
        let outcome = head[2] as i8;
        if outcome != 1 && outcome != -1 {
            return Err(DataioError::Invalid(format!("shot {i}: outcome {outcome}")));
        }
        let n = u32::from_le_bytes(head[3..7].try_into().unwrap()) as usize;
        if n != want {
            return Err(DataioError::Invalid(format!("shot {i}: {n} steps, meta implies {want}")));
        }
        let mut dm_i = Vec::with_capacity(n);
        let mut dm_q = Vec::with_capacity(n);
        for _ in 0..n {
            dm_i.push(c.f32()?);
            dm_q.push(c.f32()?);
        }
        let record = WeakRecord::new(dm_i, dm_q, meta.dt)?;
        shots.push(TrajectoryRecord { prep, record, axis, outcome, truth: None });
    }
    if c.pos != body.len() {
        return Err(DataioError::Invalid(format!("{} trailing bytes after the last block", body.len() - c.pos)));
    }
    check_crc(body, crc, RECORDS_FILE)?;
    Ok(shots)
}

/// Attaches truth series decoded from `bytes` to `shots`.
pub fn decode_truth(bytes: &[u8], shots: &mut [TrajectoryRecord]) -> Result<(), DataioError> {
    let (body, crc) = split_footer(bytes)?;
    let mut c = Cursor { buf: body, pos: 0, shot: 0 };
    for (i, s) in shots.iter_mut().enumerate() {
        c.shot = i;
        let mut t = Vec::with_capacity(s.n_steps() + 1);
        for _ in 0..=s.n_steps() {
            t.push(BlochVector { x: c.f32()?, y: c.f32()?, z: c.f32()? });
        }
        s.truth = Some(t);
    }
    if c.pos != body.len() {
        return Err(DataioError::Invalid(format!("{} trailing bytes in truth stream", body.len() - c.pos)));
    }
    check_crc(body, crc, TRUTH_FILE)
}

pub fn load_meta(dir: &Path) -> Result<DatasetMeta, DataioError> {
    let text = fs::read_to_string(dir.join(META_FILE))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let found = v.get("format_version").and_then(|x| x.as_str()).unwrap_or("").to_string();
    if major(&found) != major(FORMAT_VERSION) {
        return Err(DataioError::VersionMismatch { found, expected: FORMAT_VERSION.into() });
    }
    let meta: DatasetMeta = serde_json::from_value(v)?;
    meta.validate()?;
    Ok(meta)
}

/// Reads a dataset directory written by [`save_dataset`]. Splits are
/// recomputed from the stored rule.
pub fn load_dataset(dir: &Path) -> Result<Dataset, DataioError> {
    let meta = load_meta(dir)?;
    let mut shots = decode_records(&fs::read(dir.join(RECORDS_FILE))?, &meta)?;
    if meta.store_truth {
        decode_truth(&fs::read(dir.join(TRUTH_FILE))?, &mut shots)?;
    }
    Ok(Dataset::new(meta, shots))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataioError> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
