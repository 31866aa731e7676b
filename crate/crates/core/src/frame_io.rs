//! Binary PGM (P5) / PPM (P6) frame files named `<video_id>_<frame_index:06>.pgm|ppm`.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use thiserror::Error;

use crate::lane::{GrayImage, LaneError};

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Shape { path: PathBuf, source: LaneError },
    #[error("no frame file for video {video_id:?} frame {frame_index} in {dir}")]
    Missing {
        dir: PathBuf,
        video_id: String,
        frame_index: u64,
    },
}

pub fn frame_file_name(video_id: &str, frame_index: u64, ext: &str) -> String {
    format!("{video_id}_{frame_index:06}.{ext}")
}

/// Splits `<video_id>_<NNNNNN>.pgm|ppm` into its parts.
pub fn parse_frame_file_name(name: &str) -> Option<(String, u64)> {
    let stem = name
        .strip_suffix(".pgm")
        .or_else(|| name.strip_suffix(".ppm"))?;
    let (video, index) = stem.rsplit_once('_')?;
    if video.is_empty() || index.len() < 6 || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((video.to_string(), index.parse().ok()?))
}

/// Luminance of an RGB triple: 0.299R + 0.587G + 0.114B, rounded half up.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000) as u8
}

pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<GrayImage, FrameError> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Pnm).map_err(|e| {
        FrameError::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw(),
        DynamicImage::ImageRgb8(img) => img
            .into_raw()
            .chunks_exact(3)
            .map(|p| luminance(p[0], p[1], p[2]))
            .collect(),
        other => {
            return Err(FrameError::Decode {
                path: path.to_path_buf(),
                message: format!("unsupported sample layout {:?}", other.color()),
            })
        }
    };
    GrayImage::new(w, h, pixels).map_err(|source| FrameError::Shape {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_frame(path: &Path) -> Result<GrayImage, FrameError> {
    let bytes = std::fs::read(path).map_err(|source| FrameError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pnm(&bytes, path)
}

/// Loads the frame for `(video_id, frame_index)`, preferring `.pgm` over `.ppm`.
pub fn load_frame(dir: &Path, video_id: &str, frame_index: u64) -> Result<GrayImage, FrameError> {
    for ext in ["pgm", "ppm"] {
        let path = dir.join(frame_file_name(video_id, frame_index, ext));
        if path.is_file() {
            return read_frame(&path);
        }
    }
    Err(FrameError::Missing {
        dir: dir.to_path_buf(),
        video_id: video_id.to_string(),
        frame_index,
    })
}

/// Frame files in `dir` as `(video_id, frame_index, path)`, sorted by video then
/// index. When both a `.pgm` and a `.ppm` exist for one frame, the `.pgm` wins.
pub fn list_frames(dir: &Path) -> Result<Vec<(String, u64, PathBuf)>, FrameError> {
    let io = |source| FrameError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out: Vec<(String, u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let Some((video, index)) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(parse_frame_file_name)
        else {
            continue;
        };
        out.push((video, index, path));
    }
    // .pgm sorts before .ppm
    out.sort();
    out.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
    Ok(out)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            img.pixels(),
            img.width() as u32,
            img.height() as u32,
            ExtendedColorType::L8,
        )
        .expect("in-memory PGM encoding");
    out.into_inner()
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<(), FrameError> {
    std::fs::write(path, encode_pgm(img)).map_err(|source| FrameError::Io {
        path: path.to_path_buf(),
        source,
    })
}
