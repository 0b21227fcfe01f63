//! Frame container I/O: binary PGM (P5) sequences and headerless raw
//! grayscale, both with a `width height fps bitdepth` sidecar.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::RetinaError;
use crate::frame::Frame;
use crate::stimulus::FrameStream;

pub const SIDECAR_NAME: &str = "stream.meta";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamMeta {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub bitdepth: u32,
}

impl StreamMeta {
    pub fn parse(text: &str) -> Result<Self, RetinaError> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(RetinaError::MalformedHeader(format!(
                "sidecar must hold `width height fps bitdepth`, got {} fields",
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64, RetinaError> {
            s.parse::<f64>()
                .map_err(|_| RetinaError::MalformedHeader(format!("bad {what}: {s}")))
        };
        let width = parse(fields[0], "width")? as usize;
        let height = parse(fields[1], "height")? as usize;
        let fps = parse(fields[2], "fps")?;
        let bitdepth = parse(fields[3], "bitdepth")? as u32;
        if width == 0 || height == 0 || fps <= 0.0 {
            return Err(RetinaError::MalformedHeader(
                "sidecar geometry/fps must be positive".into(),
            ));
        }
        if bitdepth != 8 && bitdepth != 16 {
            return Err(RetinaError::UnsupportedDepth(bitdepth));
        }
        Ok(StreamMeta {
            width,
            height,
            fps,
            bitdepth,
        })
    }

    pub fn to_line(&self) -> String {
        format!("{} {} {} {}\n", self.width, self.height, self.fps, self.bitdepth)
    }
}

fn depth_max(bitdepth: u32) -> f64 {
    ((1u32 << bitdepth) - 1) as f64
}

/// Write one frame as binary PGM. 16-bit samples are big-endian, as the
/// format requires. Samples are clamped to [0,1] and rounded to the
/// container grid.
pub fn write_pgm(path: &Path, frame: &Frame<f64>, bitdepth: u32) -> Result<(), RetinaError> {
    if bitdepth != 8 && bitdepth != 16 {
        return Err(RetinaError::UnsupportedDepth(bitdepth));
    }
    let maxval = depth_max(bitdepth);
    let mut bytes = Vec::with_capacity(
        32 + frame.width() * frame.height() * (bitdepth as usize / 8),
    );
    bytes.extend_from_slice(
        format!("P5\n{} {}\n{}\n", frame.width(), frame.height(), maxval as u32).as_bytes(),
    );
    for &v in frame.as_slice() {
        let q = (v.clamp(0.0, 1.0) * maxval).round() as u32;
        if bitdepth == 8 {
            bytes.push(q as u8);
        } else {
            bytes.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    write_atomic(path, &bytes)
}

/// Write bytes via a temp file and rename, so readers never see a partial
/// file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RetinaError> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_data().ok();
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<(Frame<f64>, u32), RetinaError> {
    let bytes = fs::read(path)?;
    parse_pgm(&bytes)
}

fn parse_pgm(bytes: &[u8]) -> Result<(Frame<f64>, u32), RetinaError> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String, RetinaError> {
        // skip whitespace and `#` comment lines
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(RetinaError::MalformedHeader("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(bytes)?;
    if magic != "P5" {
        return Err(RetinaError::MalformedHeader(format!(
            "expected binary PGM magic P5, got {magic}"
        )));
    }
    let width: usize = token(bytes)?
        .parse()
        .map_err(|_| RetinaError::MalformedHeader("bad width".into()))?;
    let height: usize = token(bytes)?
        .parse()
        .map_err(|_| RetinaError::MalformedHeader("bad height".into()))?;
    let maxval: u32 = token(bytes)?
        .parse()
        .map_err(|_| RetinaError::MalformedHeader("bad maxval".into()))?;
    let bitdepth = match maxval {
        255 => 8,
        65535 => 16,
        other => {
            return Err(RetinaError::UnsupportedDepth(if other < 255 { 8 } else { 16 }))
        }
    };
    // single whitespace byte separates header from raster
    pos += 1;
    let sample_bytes = bitdepth as usize / 8;
    let expected = width * height * sample_bytes;
    let raster = &bytes[pos.min(bytes.len())..];
    if raster.len() < expected {
        return Err(RetinaError::TruncatedStream {
            expected,
            actual: raster.len(),
        });
    }
    let maxf = maxval as f64;
    let mut data = Vec::with_capacity(width * height);
    if bitdepth == 8 {
        data.extend(raster[..expected].iter().map(|&b| b as f64 / maxf));
    } else {
        for chunk in raster[..expected].chunks_exact(2) {
            data.push(u16::from_be_bytes([chunk[0], chunk[1]]) as f64 / maxf);
        }
    }
    Ok((Frame::from_vec(width, height, data), bitdepth))
}

/// Write a stream as a PGM sequence plus sidecar in `dir`.
pub fn save_frames(stream: &FrameStream, dir: &Path, bitdepth: u32) -> Result<(), RetinaError> {
    fs::create_dir_all(dir)?;
    let meta = StreamMeta {
        width: stream.width,
        height: stream.height,
        fps: stream.fps,
        bitdepth,
    };
    write_atomic(&dir.join(SIDECAR_NAME), meta.to_line().as_bytes())?;
    for (i, frame) in stream.frames.iter().enumerate() {
        write_pgm(&dir.join(format!("frame_{i:05}.pgm")), frame, bitdepth)?;
    }
    Ok(())
}

/// Load a stream from a directory of PGM frames or a raw grayscale file,
/// each described by its sidecar. `expected_geometry`, when given, is
/// checked against the container geometry.
pub fn load_video(
    path: &Path,
    expected_geometry: Option<(usize, usize)>,
) -> Result<FrameStream, RetinaError> {
    let stream = if path.is_dir() {
        load_pgm_dir(path)?
    } else {
        load_raw(path)?
    };
    if let Some((w, h)) = expected_geometry {
        if stream.width != w || stream.height != h {
            return Err(RetinaError::GeometryMismatch {
                expected_width: w,
                expected_height: h,
                width: stream.width,
                height: stream.height,
            });
        }
    }
    Ok(stream)
}

fn load_pgm_dir(dir: &Path) -> Result<FrameStream, RetinaError> {
    let meta_text = fs::read_to_string(dir.join(SIDECAR_NAME))?;
    let meta = StreamMeta::parse(&meta_text)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |e| e == "pgm"))
        .collect();
    paths.sort();
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let (frame, depth) = read_pgm(p)?;
        if depth != meta.bitdepth {
            return Err(RetinaError::UnsupportedDepth(depth));
        }
        if frame.width() != meta.width || frame.height() != meta.height {
            return Err(RetinaError::GeometryMismatch {
                expected_width: meta.width,
                expected_height: meta.height,
                width: frame.width(),
                height: frame.height(),
            });
        }
        frames.push(frame);
    }
    Ok(FrameStream {
        width: meta.width,
        height: meta.height,
        fps: meta.fps,
        frames,
    })
}

fn sidecar_path(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn load_raw(path: &Path) -> Result<FrameStream, RetinaError> {
    let meta_text = fs::read_to_string(sidecar_path(path))?;
    let meta = StreamMeta::parse(&meta_text)?;
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let sample_bytes = meta.bitdepth as usize / 8;
    let frame_bytes = meta.width * meta.height * sample_bytes;
    if frame_bytes == 0 || bytes.len() % frame_bytes != 0 {
        return Err(RetinaError::TruncatedStream {
            expected: (bytes.len() / frame_bytes.max(1) + 1) * frame_bytes,
            actual: bytes.len(),
        });
    }
    let maxf = depth_max(meta.bitdepth);
    let mut frames = Vec::with_capacity(bytes.len() / frame_bytes);
    for chunk in bytes.chunks_exact(frame_bytes) {
        let mut data = Vec::with_capacity(meta.width * meta.height);
        if meta.bitdepth == 8 {
            data.extend(chunk.iter().map(|&b| b as f64 / maxf));
        } else {
            for pair in chunk.chunks_exact(2) {
                data.push(u16::from_be_bytes([pair[0], pair[1]]) as f64 / maxf);
            }
        }
        frames.push(Frame::from_vec(meta.width, meta.height, data));
    }
    Ok(FrameStream {
        width: meta.width,
        height: meta.height,
        fps: meta.fps,
        frames,
    })
}

/// Save a raw stream next to its sidecar.
pub fn save_raw(stream: &FrameStream, path: &Path, bitdepth: u32) -> Result<(), RetinaError> {
    if bitdepth != 8 && bitdepth != 16 {
        return Err(RetinaError::UnsupportedDepth(bitdepth));
    }
    let meta = StreamMeta {
        width: stream.width,
        height: stream.height,
        fps: stream.fps,
        bitdepth,
    };
    let maxval = depth_max(bitdepth);
    let mut bytes = Vec::new();
    for frame in &stream.frames {
        for &v in frame.as_slice() {
            let q = (v.clamp(0.0, 1.0) * maxval).round() as u32;
            if bitdepth == 8 {
                bytes.push(q as u8);
            } else {
                bytes.extend_from_slice(&(q as u16).to_be_bytes());
            }
        }
    }
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), meta.to_line().as_bytes())?;
    Ok(())
}
