//! RIFF/WAVE codec restricted to 16-bit integer PCM.

use log::warn;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PCM_FORMAT: u16 = 1;
const EXTENSIBLE_FORMAT: u16 = 0xFFFE;
const PCM_DIVISOR: f64 = 32768.0;

/// Decoded audio: channel 0 of the file, normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PcmAudio<T> {
    pub samples: Vec<T>,
    pub sample_rate_hz: f64,
    /// Channel count declared by the file. Only channel 0 is kept.
    pub channels: u16,
}

struct Chunk<'a> {
    id: [u8; 4],
    body: &'a [u8],
}

fn chunk_name(id: &[u8; 4]) -> String {
    String::from_utf8_lossy(id).trim_end().to_string()
}

fn malformed(chunk: &str, reason: impl Into<String>) -> Error {
    Error::WavParse {
        chunk: chunk.to_string(),
        reason: reason.into(),
    }
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

/// Walks the sub-chunks of the WAVE form. Stops after `data`.
fn chunks(bytes: &[u8]) -> Result<Vec<Chunk<'_>>> {
    if bytes.len() < 12 {
        return Err(malformed("RIFF", "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("RIFF", "missing `RIFF` magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("RIFF", "form type is not `WAVE`"));
    }

    let mut out = Vec::new();
    let mut off = 12;
    while off < bytes.len() {
        if bytes.len() - off < 8 {
            return Err(malformed("RIFF", format!("truncated chunk header at byte {off}")));
        }
        let id = [bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]];
        let size = u32_at(bytes, off + 4) as usize;
        let start = off + 8;
        let is_data = &id == b"data";
        let end = match start.checked_add(size) {
            Some(end) if end <= bytes.len() => end,
            // Streaming writers sometimes leave the data size unset; take what is there.
            _ if is_data => bytes.len(),
            _ => {
                return Err(malformed(
                    &chunk_name(&id),
                    format!("declared size {size} exceeds remaining {} bytes", bytes.len() - start),
                ))
            }
        };
        out.push(Chunk {
            id,
            body: &bytes[start..end],
        });
        if is_data {
            break;
        }
        // Chunks are word aligned.
        off = end + (size & 1);
    }
    Ok(out)
}

/// Parses a 16-bit PCM WAV file.
///
/// Each sample `s` maps to `s / 32768`, so -32768 decodes to exactly -1.0.
/// Multi-channel files are accepted and reduced to channel 0.
pub fn parse_wav<T: Scalar>(bytes: &[u8]) -> Result<PcmAudio<T>> {
    let chunks = chunks(bytes)?;
    let fmt = chunks
        .iter()
        .find(|c| &c.id == b"fmt ")
        .ok_or_else(|| malformed("fmt", "no `fmt ` chunk before `data`"))?;
    let data = chunks
        .iter()
        .find(|c| &c.id == b"data")
        .ok_or_else(|| malformed("data", "no `data` chunk"))?;

    let f = fmt.body;
    if f.len() < 16 {
        return Err(malformed("fmt", format!("chunk is {} bytes, need 16", f.len())));
    }
    let mut format = u16_at(f, 0);
    let channels = u16_at(f, 2);
    let sample_rate = u32_at(f, 4);
    let bits = u16_at(f, 14);
    if format == EXTENSIBLE_FORMAT {
        // The sub-format GUID starts with the plain format code.
        if f.len() < 26 {
            return Err(malformed("fmt", "extensible format without sub-format"));
        }
        format = u16_at(f, 24);
    }
    if format != PCM_FORMAT {
        return Err(Error::UnsupportedFormat(format!(
            "format code {format}, only integer PCM (1) is supported"
        )));
    }
    if bits != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{bits} bits per sample, only 16 is supported"
        )));
    }
    if channels == 0 {
        return Err(malformed("fmt", "zero channels"));
    }
    if sample_rate == 0 {
        return Err(malformed("fmt", "zero sample rate"));
    }
    if channels > 1 {
        warn!("WAV has {channels} channels; using channel 0");
    }

    let frame = 2 * channels as usize;
    let frames = data.body.len() / frame;
    if frames == 0 {
        return Err(Error::EmptySamples);
    }
    let scale = T::lit(PCM_DIVISOR);
    let samples = data
        .body
        .chunks_exact(frame)
        .map(|fr| T::lit(f64::from(i16::from_le_bytes([fr[0], fr[1]]))) / scale)
        .collect();
    Ok(PcmAudio {
        samples,
        sample_rate_hz: f64::from(sample_rate),
        channels,
    })
}

/// Inverse of the decoder's normalization, saturating at the 16-bit range.
pub fn to_pcm16<T: Scalar>(sample: T) -> i16 {
    let v = (sample.as_f64() * PCM_DIVISOR).round();
    v.clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
}

/// Encodes mono samples as a canonical 44-byte-header PCM-16 WAV.
pub fn write_wav<T: Scalar>(samples: &[T], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        out.extend_from_slice(&to_pcm16(s).to_le_bytes());
    }
    out
}
