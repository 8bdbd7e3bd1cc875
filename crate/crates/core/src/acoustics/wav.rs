//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.

use super::{AcousticsError, AudioClip};

fn chunk_err(chunk: &str, message: impl Into<String>) -> AcousticsError {
    AcousticsError::Wav { chunk: chunk.to_string(), message: message.into() }
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
}

/// Decode a PCM16 mono or stereo file. Stereo is averaged to mono; samples are scaled by 1/32768.
pub fn read_wav(bytes: &[u8]) -> Result<AudioClip, AcousticsError> {
    if bytes.len() < 12 {
        return Err(chunk_err("RIFF", "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(chunk_err("RIFF", "missing RIFF signature"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(chunk_err("RIFF", "form type is not WAVE"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos < bytes.len() {
        if pos + 8 > bytes.len() {
            return Err(chunk_err("RIFF", "truncated chunk header"));
        }
        let id = String::from_utf8_lossy(&bytes[pos..pos + 4]).into_owned();
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let available = bytes.len() - body;
        match id.as_str() {
            "fmt " => {
                if size < 16 || available < 16 {
                    return Err(chunk_err("fmt ", "chunk shorter than 16 bytes"));
                }
                let audio_format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let sample_rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if audio_format != 1 {
                    return Err(chunk_err("fmt ", format!("audio format {audio_format} is not PCM (1)")));
                }
                if bits != 16 {
                    return Err(chunk_err("fmt ", format!("{bits}-bit samples are not supported, expected 16")));
                }
                if channels != 1 && channels != 2 {
                    return Err(chunk_err("fmt ", format!("{channels} channels, expected 1 or 2")));
                }
                if sample_rate == 0 {
                    return Err(chunk_err("fmt ", "sample rate is zero"));
                }
                format = Some(Format { channels, sample_rate });
            }
            "data" => {
                let fmt = format.as_ref().ok_or_else(|| chunk_err("data", "data chunk precedes fmt chunk"))?;
                if size > available {
                    return Err(chunk_err("data", format!("declares {size} bytes but only {available} remain")));
                }
                let frame = 2 * fmt.channels as usize;
                let frames = size / frame;
                let data = &bytes[body..body + frames * frame];
                let samples = data
                    .chunks_exact(frame)
                    .map(|f| {
                        let sum: f64 = f.chunks_exact(2).map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0).sum();
                        sum / fmt.channels as f64
                    })
                    .collect();
                return Ok(AudioClip { sample_rate: fmt.sample_rate as f64, samples });
            }
            _ => {
                if size > available {
                    return Err(chunk_err(id.trim_end(), "chunk extends past end of file"));
                }
            }
        }
        pos = body + size + (size & 1);
    }
    Err(chunk_err("data", "no data chunk"))
}

/// Encode as mono PCM16. Samples are scaled by 32768, rounded and saturated.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let rate = clip.sample_rate.round() as u32;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in &clip.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip { sample_rate: 48000.0, samples }
    }

    #[test]
    fn max_sample_normalises_below_one() {
        let bytes = write_wav(&clip(vec![32767.0 / 32768.0]));
        let back = read_wav(&bytes).unwrap();
        assert_eq!(back.samples[0], 32767.0 / 32768.0);
        assert!((back.samples[0] - 0.999969).abs() < 1e-6);
        assert_eq!(back.sample_rate, 48000.0);
    }

    #[test]
    fn quantised_round_trip_is_lossless() {
        let s: Vec<f64> = (-300..300).map(|k| (k * 97) as f64 / 32768.0).collect();
        assert_eq!(read_wav(&write_wav(&clip(s.clone()))).unwrap().samples, s);
    }

    #[test]
    fn truncated_data_names_chunk() {
        let bytes = write_wav(&clip(vec![0.1; 100]));
        match read_wav(&bytes[..bytes.len() - 10]).unwrap_err() {
            AcousticsError::Wav { chunk, .. } => assert_eq!(chunk, "data"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn non_pcm_and_bit_depth_rejected() {
        let mut bytes = write_wav(&clip(vec![0.0; 4]));
        bytes[20] = 3; // IEEE float
        assert!(matches!(read_wav(&bytes), Err(AcousticsError::Wav { ref chunk, .. }) if chunk == "fmt "));
        let mut bytes = write_wav(&clip(vec![0.0; 4]));
        bytes[34] = 24;
        assert!(matches!(read_wav(&bytes), Err(AcousticsError::Wav { ref chunk, .. }) if chunk == "fmt "));
    }

    #[test]
    fn stereo_is_averaged() {
        let mut bytes = write_wav(&clip(vec![0.0; 2]));
        // rewrite as one stereo frame: left 16384, right -8192
        bytes[22] = 2;
        bytes[44..46].copy_from_slice(&16384i16.to_le_bytes());
        bytes[46..48].copy_from_slice(&(-8192i16).to_le_bytes());
        let c = read_wav(&bytes).unwrap();
        assert_eq!(c.samples, vec![(0.5 - 0.25) / 2.0]);
    }
}
