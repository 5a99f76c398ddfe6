//! Text and binary interchange formats.
//!
//! Boxes travel as MOTChallenge lines (`frame,id,left,top,w,h,conf,x,y,z`,
//! 1-based frames, `id = -1` for anonymous detections) and are held in
//! memory in center form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use cycletrack_core::flow::Grid;
use cycletrack_core::{BBox, Detection, Tracklet, Vec2};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult, FormatError};

type FormatResult<T> = Result<T, FormatError>;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> FormatResult<T> {
    raw.trim().parse().map_err(|_| FormatError::new(line, format!("bad {name} {raw:?}")))
}

/// Integer fields are sometimes written as `1.0` by other tools.
fn integral(line: usize, name: &str, raw: &str) -> FormatResult<i64> {
    if let Ok(v) = raw.trim().parse::<i64>() {
        return Ok(v);
    }
    let v: f64 = field(line, name, raw)?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(FormatError::new(line, format!("bad {name} {raw:?}")));
    }
    Ok(v as i64)
}

/// Parses a MOTChallenge file. The result is sorted by frame; lines of the
/// same frame keep their file order, which is the detection index used by
/// displacement sidecars.
pub fn parse_mot(text: &str) -> FormatResult<Vec<Detection>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 7 {
            return Err(FormatError::new(n, format!("expected at least 7 fields, found {}", f.len())));
        }
        let frame = integral(n, "frame", f[0])?;
        if frame < 1 || frame > u32::MAX as i64 {
            return Err(FormatError::new(n, format!("frame {frame} must be positive")));
        }
        let id = match integral(n, "id", f[1])? {
            -1 => None,
            v if v >= 1 && v <= u32::MAX as i64 => Some(v as u32),
            v => return Err(FormatError::new(n, format!("id {v} must be positive or -1"))),
        };
        let left: f64 = field(n, "bb_left", f[2])?;
        let top: f64 = field(n, "bb_top", f[3])?;
        let w: f64 = field(n, "bb_width", f[4])?;
        let h: f64 = field(n, "bb_height", f[5])?;
        let conf: f64 = field(n, "conf", f[6])?;
        if !(w > 0.0 && h > 0.0) {
            return Err(FormatError::new(n, format!("non-positive box {w}x{h}")));
        }
        let bbox = BBox::from_top_left(left, top, w, h).map_err(|e| FormatError::new(n, e.to_string()))?;
        let det = Detection::new(frame as u32, bbox, conf, id).map_err(|e| FormatError::new(n, e.to_string()))?;
        out.push(det);
    }
    out.sort_by_key(|d| d.frame);
    Ok(out)
}

/// Splits frame-sorted detections into per-frame lists, index `t - 1`
/// holding frame `t`, covering at least `frames` frames.
pub fn group_by_frame(dets: &[Detection], frames: u32) -> Vec<Vec<Detection>> {
    let n = dets.iter().map(|d| d.frame).max().unwrap_or(0).max(frames) as usize;
    let mut out = vec![Vec::new(); n];
    for d in dets {
        out[d.frame as usize - 1].push(*d);
    }
    out
}

fn push_line(out: &mut String, frame: u32, id: i64, b: &BBox, conf: &str) {
    let _ = writeln!(out, "{frame},{id},{:.2},{:.2},{:.2},{:.2},{conf},-1,-1,-1", b.left(), b.top(), b.w, b.h);
}

/// One line per `(frame, id)` over every history entry, sorted by frame
/// then id.
pub fn write_mot(tracks: &[Tracklet]) -> String {
    let mut rows: Vec<(u32, u32, &BBox)> =
        tracks.iter().flat_map(|t| t.history.iter().map(move |(f, b)| (*f, t.id, b))).collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    for (frame, id, b) in rows {
        push_line(&mut out, frame, id as i64, b, "1");
    }
    out
}

/// Writes detections in the given order, anonymous ones with id `-1`.
pub fn write_detections(dets: &[Detection]) -> String {
    let mut out = String::new();
    for d in dets {
        push_line(&mut out, d.frame, d.id.map_or(-1, |i| i as i64), &d.bbox, &format!("{:.2}", d.conf));
    }
    out
}

/// Parses `frame,det_index,dx,dy` lines; `#` lines are comments.
pub fn parse_sidecar(text: &str) -> FormatResult<BTreeMap<(u32, usize), Vec2>> {
    let mut out = BTreeMap::new();
    for (n, line) in content_lines(text) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(FormatError::new(n, format!("expected 4 fields, found {}", f.len())));
        }
        let frame: u32 = field(n, "frame", f[0])?;
        let idx: usize = field(n, "det_index", f[1])?;
        let v = Vec2::new(field(n, "dx", f[2])?, field(n, "dy", f[3])?);
        if !v.is_finite() {
            return Err(FormatError::new(n, "non-finite displacement"));
        }
        if out.insert((frame, idx), v).is_some() {
            return Err(FormatError::new(n, format!("duplicate displacement for frame {frame}, detection {idx}")));
        }
    }
    Ok(out)
}

pub fn write_sidecar(vectors: &BTreeMap<(u32, usize), Vec2>) -> String {
    let mut out = String::from("# frame,det_index,dx,dy\n");
    for ((frame, idx), v) in vectors {
        let _ = writeln!(out, "{frame},{idx},{:.2},{:.2}", v.x, v.y);
    }
    out
}

pub fn write_velocity_csv(trace: &[f64], first_frame: u32) -> String {
    let mut out = String::from("frame,velocity_px_per_frame\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(out, "{},{v:.6}", first_frame + i as u32);
    }
    out
}

/// Returns `(frames, values)` from a velocity CSV with a header line.
pub fn parse_velocity_csv(text: &str) -> FormatResult<(Vec<u32>, Vec<f64>)> {
    let (mut frames, mut values) = (Vec::new(), Vec::new());
    for (n, line) in content_lines(text) {
        if frames.is_empty() && values.is_empty() && line.starts_with("frame") {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| FormatError::new(n, "expected frame,velocity"))?;
        frames.push(field(n, "frame", a)?);
        values.push(field(n, "velocity", b)?);
    }
    Ok((frames, values))
}

/// Cumulative truth and hypothesis counts per frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountSeries {
    pub frames: Vec<u32>,
    pub gt: Vec<usize>,
    pub hyp: Vec<usize>,
}

impl CountSeries {
    /// Distinct ids seen up to each frame of `1..=frames`.
    pub fn from_tracks(gt: &[Detection], hyp: &[Detection], frames: u32) -> Self {
        let cumulative = |dets: &[Detection]| {
            let mut first: BTreeMap<u32, u32> = BTreeMap::new();
            for d in dets {
                if let Some(id) = d.id {
                    let e = first.entry(id).or_insert(d.frame);
                    *e = (*e).min(d.frame);
                }
            }
            let mut per = vec![0usize; frames as usize + 1];
            for f in first.values() {
                if (*f as usize) < per.len() {
                    per[*f as usize] += 1;
                }
            }
            per[1..]
                .iter()
                .scan(0, |acc, n| {
                    *acc += n;
                    Some(*acc)
                })
                .collect::<Vec<usize>>()
        };
        CountSeries { frames: (1..=frames).collect(), gt: cumulative(gt), hyp: cumulative(hyp) }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,gt,hyp\n");
        for ((f, g), h) in self.frames.iter().zip(&self.gt).zip(&self.hyp) {
            let _ = writeln!(out, "{f},{g},{h}");
        }
        out
    }

    pub fn parse(text: &str) -> FormatResult<Self> {
        let mut s = CountSeries::default();
        for (n, line) in content_lines(text) {
            if s.frames.is_empty() && line.starts_with("frame") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(FormatError::new(n, format!("expected 3 fields, found {}", f.len())));
            }
            s.frames.push(field(n, "frame", f[0])?);
            s.gt.push(field(n, "gt", f[1])?);
            s.hyp.push(field(n, "hyp", f[2])?);
        }
        Ok(s)
    }
}

/// `hyp,gt` final counts, one row per video.
pub fn parse_count_pairs(text: &str) -> FormatResult<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        if out.is_empty() && line.starts_with("hyp") {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| FormatError::new(n, "expected hyp,gt"))?;
        out.push((field(n, "hyp", a)?, field(n, "gt", b)?));
    }
    Ok(out)
}

/// Sidecar description of `frames.bin`: consecutive row-major frames of
/// little-endian `f32` pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesHeader {
    pub width: usize,
    pub height: usize,
    pub frames: u32,
    pub dtype: String,
}

pub const FRAME_DTYPE: &str = "f32le";

/// Streams frames to `path` as they are produced.
pub fn write_frames(path: &Path, mut frames: impl Iterator<Item = AppResult<Grid>>) -> AppResult<()> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(file);
    frames.try_for_each(|g| {
        let g = g?;
        let mut buf = Vec::with_capacity(g.values.len() * 4);
        for v in &g.values {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| AppError::io(path, e))
    })?;
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Random access into a frames file.
pub struct FrameReader {
    pub header: FramesHeader,
    file: File,
    path: std::path::PathBuf,
}

impl FrameReader {
    pub fn open(bin: &Path, header: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(header).map_err(|e| AppError::io(header, e))?;
        let header: FramesHeader = serde_json::from_str(&text)
            .map_err(|e| AppError::parse(header, FormatError::new(e.line(), e.to_string())))?;
        if header.dtype != FRAME_DTYPE {
            return Err(AppError::Config(format!("unsupported frame dtype {:?}", header.dtype)));
        }
        let file = File::open(bin).map_err(|e| AppError::io(bin, e))?;
        let expected = (header.width * header.height * 4) as u64 * header.frames as u64;
        let actual = file.metadata().map_err(|e| AppError::io(bin, e))?.len();
        if actual != expected {
            return Err(AppError::Runtime(format!(
                "{}: holds {actual} bytes, header implies {expected}",
                bin.display()
            )));
        }
        Ok(FrameReader { header, file, path: bin.to_path_buf() })
    }

    /// Reads 1-based frame `t`.
    pub fn read(&mut self, t: u32) -> AppResult<Grid> {
        if t < 1 || t > self.header.frames {
            return Err(cycletrack_core::Error::FrameOutOfRange(t).into());
        }
        let (w, h) = (self.header.width, self.header.height);
        let mut buf = vec![0u8; w * h * 4];
        self.file
            .seek(SeekFrom::Start((t as u64 - 1) * buf.len() as u64))
            .and_then(|_| self.file.read_exact(&mut buf))
            .map_err(|e| AppError::io(&self.path, e))?;
        let values = buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        Ok(Grid { width: w, height: h, values })
    }
}
