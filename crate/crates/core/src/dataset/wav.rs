//! Minimal RIFF/WAVE reader and writer.
//!
//! Reading accepts PCM16 and IEEE float32, any channel count (the first
//! channel is kept), including `WAVE_FORMAT_EXTENSIBLE` wrappers around those
//! two codecs. Writing always produces a canonical 44-byte-header mono PCM16
//! file.

use std::path::Path;

use super::AudioSignal;
use crate::error::{Error, Result, WavError};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn malformed(msg: impl Into<String>) -> Error {
    WavError::MalformedHeader(msg.into()).into()
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

pub fn decode_wav(bytes: &[u8]) -> Result<AudioSignal> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }
    let mut fmt = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body_start = at + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| malformed(format!("chunk `{}` overruns the file", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                let mut tag = u16_at(body, 0);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(malformed("extensible fmt chunk too short"));
                    }
                    // first two bytes of the subformat GUID carry the codec
                    tag = u16_at(body, 24);
                }
                fmt = Some(Format {
                    tag,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        at = body_end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if fmt.channels == 0 {
        return Err(malformed("zero channels"));
    }
    let bytes_per_sample = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (tag, bits) => {
            return Err(WavError::UnsupportedCodec {
                format_tag: tag,
                bits_per_sample: bits,
            }
            .into())
        }
    };
    let frame = bytes_per_sample * fmt.channels as usize;
    if data.len() % frame != 0 {
        return Err(malformed(format!(
            "data chunk of {} bytes is not a whole number of {frame}-byte frames",
            data.len()
        )));
    }
    let samples = data
        .chunks_exact(frame)
        .map(|f| match bytes_per_sample {
            2 => i16::from_le_bytes([f[0], f[1]]) as f64 / 32768.0,
            _ => f32::from_le_bytes([f[0], f[1], f[2], f[3]]) as f64,
        })
        .collect();
    AudioSignal::new(samples, fmt.sample_rate)
}

/// PCM16 encoding of `s`: `round(s·32768)` saturated to the i16 range.
fn quantize(s: f64) -> i16 {
    (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn encode_wav(signal: &AudioSignal) -> Result<Vec<u8>> {
    if let Some(i) = signal.samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("audio sample {i}")));
    }
    let data_len = u32::try_from(signal.len() * 2).map_err(|_| Error::invalid("signal too long for WAV"))?;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // channels
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &signal.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    Ok(out)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav(signal)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
