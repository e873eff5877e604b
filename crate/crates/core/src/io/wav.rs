//! PCM16 mono WAV.
//!
//! Samples are scaled by 1/32768, so they land in `[-1, 1)`. Writing rounds
//! to the nearest code and clips, which makes write-then-read exact for any
//! recording that came out of a read.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::AudioRecording;

const PCM: u16 = 1;
const FULL_SCALE: f64 = 32768.0;

fn format_error(offset: usize, message: impl Into<String>) -> Error {
    Error::FormatError {
        offset: offset as u64,
        message: message.into(),
    }
}

fn u16_at(b: &[u8], at: usize) -> Result<u16> {
    b.get(at..at + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| format_error(at, "unexpected end of file"))
}

fn u32_at(b: &[u8], at: usize) -> Result<u32> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| format_error(at, "unexpected end of file"))
}

struct Fmt {
    sample_rate_hz: u32,
}

fn parse_fmt(b: &[u8], at: usize, size: usize) -> Result<Fmt> {
    if size < 16 {
        return Err(format_error(at, format!("fmt chunk of {size} bytes is too short")));
    }
    let tag = u16_at(b, at)?;
    if tag != PCM {
        return Err(format_error(at, format!("format tag {tag:#06x} is not integer PCM")));
    }
    let channels = u16_at(b, at + 2)?;
    if channels != 1 {
        return Err(format_error(at + 2, format!("{channels} channels, expected mono")));
    }
    let sample_rate_hz = u32_at(b, at + 4)?;
    if sample_rate_hz == 0 {
        return Err(format_error(at + 4, "sample rate is zero"));
    }
    let block_align = u16_at(b, at + 12)?;
    let bits = u16_at(b, at + 14)?;
    if bits != 16 {
        return Err(format_error(at + 14, format!("{bits} bits per sample, expected 16")));
    }
    if block_align != 2 {
        return Err(format_error(at + 12, format!("block align {block_align}, expected 2")));
    }
    Ok(Fmt { sample_rate_hz })
}

/// Decode a WAV image. `source_id` labels the resulting recording.
pub fn decode_wav(bytes: &[u8], source_id: &str) -> Result<AudioRecording> {
    if bytes.get(0..4) != Some(b"RIFF") {
        return Err(format_error(0, "missing RIFF tag"));
    }
    if bytes.get(8..12) != Some(b"WAVE") {
        return Err(format_error(8, "missing WAVE tag"));
    }
    let riff_end = (u32_at(bytes, 4)? as usize).saturating_add(8).min(bytes.len());
    let mut fmt = None;
    let mut at = 12;
    while at + 8 <= riff_end {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4)? as usize;
        let body = at + 8;
        match id {
            b"fmt " => fmt = Some(parse_fmt(bytes, body, size)?),
            b"data" => {
                let Some(f) = &fmt else {
                    return Err(format_error(at, "data chunk before fmt chunk"));
                };
                if body + size > bytes.len() {
                    return Err(format_error(
                        at + 4,
                        format!("data chunk claims {size} bytes, {} present", bytes.len() - body),
                    ));
                }
                if size % 2 != 0 {
                    return Err(format_error(at + 4, "odd data size for 16-bit samples"));
                }
                if size == 0 {
                    return Err(format_error(at + 4, "data chunk is empty"));
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / FULL_SCALE)
                    .collect();
                return AudioRecording::new(samples, f.sample_rate_hz, source_id);
            }
            _ => {}
        }
        at = body.saturating_add(size).saturating_add(size % 2);
    }
    if fmt.is_none() {
        Err(format_error(at.min(bytes.len()), "no fmt chunk"))
    } else {
        Err(format_error(at.min(bytes.len()), "no data chunk"))
    }
}

/// Encode as PCM16 mono.
pub fn encode_wav(rec: &AudioRecording) -> Vec<u8> {
    let data_len = rec.len() * 2;
    let rate = rec.sample_rate_hz();
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in rec.samples() {
        let code = (s * FULL_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

/// Read a PCM16 mono WAV; the file stem becomes the source id.
pub fn load_wav(path: &Path) -> Result<AudioRecording> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_wav(&bytes, &id)
}

pub fn save_wav(rec: &AudioRecording, path: &Path) -> Result<()> {
    fs::write(path, encode_wav(rec)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synth::{synth, NoiseParams, SynthKind};

    fn header(channels: u16, bits: u16, tag: u16) -> Vec<u8> {
        let rec = AudioRecording::new(vec![0.0; 4], 8000, "x").unwrap();
        let mut b = encode_wav(&rec);
        b[20..22].copy_from_slice(&tag.to_le_bytes());
        b[22..24].copy_from_slice(&channels.to_le_bytes());
        b[34..36].copy_from_slice(&bits.to_le_bytes());
        b
    }

    #[test]
    fn round_trip_is_exact_after_quantization() {
        let noise = synth(&SynthKind::Noise(NoiseParams::default())).unwrap();
        let once = decode_wav(&encode_wav(&noise), "n").unwrap();
        let twice = decode_wav(&encode_wav(&once), "n").unwrap();
        assert_eq!(once.samples(), twice.samples());
        assert_eq!(once.sample_rate_hz(), 16000);
        for (a, b) in noise.samples().iter().zip(once.samples()) {
            assert!((a.clamp(-1.0, 32767.0 / 32768.0) - b).abs() <= 0.5 / FULL_SCALE + 1e-15);
        }
    }

    #[test]
    fn full_scale_codes() {
        let rec = AudioRecording::new(vec![-1.0, 0.0, 1.0, 0.5], 100, "x").unwrap();
        let back = decode_wav(&encode_wav(&rec), "x").unwrap();
        assert_eq!(back.samples(), &[-1.0, 0.0, 32767.0 / 32768.0, 0.5]);
    }

    #[test]
    fn rejects_stereo_and_other_formats() {
        let e = decode_wav(&header(2, 16, 1), "x").unwrap_err();
        assert!(matches!(e, Error::FormatError { offset: 22, .. }), "{e}");
        let e = decode_wav(&header(1, 24, 1), "x").unwrap_err();
        assert!(matches!(e, Error::FormatError { offset: 34, .. }), "{e}");
        let e = decode_wav(&header(1, 16, 3), "x").unwrap_err();
        assert!(matches!(e, Error::FormatError { offset: 20, .. }), "{e}");
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(matches!(
            decode_wav(b"RIFX", "x"),
            Err(Error::FormatError { offset: 0, .. })
        ));
        let rec = AudioRecording::new(vec![0.1; 10], 100, "x").unwrap();
        let b = encode_wav(&rec);
        let e = decode_wav(&b[..b.len() - 3], "x").unwrap_err();
        assert!(matches!(e, Error::FormatError { offset: 40, .. }), "{e}");
        let e = decode_wav(&b[..30], "x").unwrap_err();
        assert!(matches!(e, Error::FormatError { .. }), "{e}");
    }

    #[test]
    fn skips_unknown_chunks() {
        let rec = AudioRecording::new(vec![0.25, -0.25, 0.5], 16000, "x").unwrap();
        let b = encode_wav(&rec);
        let mut with_list = b[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&b[36..]);
        let size = (with_list.len() - 8) as u32;
        with_list[4..8].copy_from_slice(&size.to_le_bytes());
        let back = decode_wav(&with_list, "x").unwrap();
        assert_eq!(back.samples(), rec.samples());
    }
}
