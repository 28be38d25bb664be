//! Minimal RIFF/WAVE codec for the one shape of file the pipeline consumes:
//! PCM, 16-bit, mono. Anything else is rejected with a specific error rather
//! than guessed at.

/// A decoded mono clip. Samples are normalized to `[-1, 1]` by dividing the
/// 16-bit integers by 32768, so the positive end tops out one LSB short of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("unsupported encoding: format tag {format_tag}, {bits} bits (need PCM 16-bit)")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
    #[error("unsupported channel count {0} (need mono)")]
    UnsupportedChannels(u16),
    #[error("truncated file: chunk needs {needed} bytes, only {available} available")]
    TruncatedFile { needed: usize, available: usize },
    #[error("data chunk holds no samples")]
    EmptyData,
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Decode a RIFF/WAVE byte stream. Chunks other than `fmt ` and `data` are
/// skipped; the declared chunk sizes are honored, including the RIFF padding
/// byte after odd-sized chunks.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, WavError> {
    if bytes.len() < 12 {
        return Err(WavError::TruncatedFile {
            needed: 12,
            available: bytes.len(),
        });
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(WavError::MalformedContainer(
            "missing RIFF/WAVE magic".into(),
        ));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        if body + size > bytes.len() {
            return Err(WavError::TruncatedFile {
                needed: body + size,
                available: bytes.len(),
            });
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::MalformedContainer(format!(
                        "fmt chunk too small: {size} bytes"
                    )));
                }
                fmt = Some((
                    read_u16(bytes, body),
                    read_u16(bytes, body + 2),
                    read_u32(bytes, body + 4),
                    read_u16(bytes, body + 14),
                ));
            }
            b"data" => data = Some(&bytes[body..body + size]),
            _ => {}
        }
        pos = body + size + (size & 1);
    }

    let (format_tag, channels, sample_rate, bits) = fmt.ok_or_else(|| {
        WavError::MalformedContainer("no fmt chunk".into())
    })?;
    let data = data.ok_or_else(|| WavError::MalformedContainer("no data chunk".into()))?;

    if format_tag != 1 || bits != 16 {
        return Err(WavError::UnsupportedEncoding { format_tag, bits });
    }
    if channels != 1 {
        return Err(WavError::UnsupportedChannels(channels));
    }
    if sample_rate == 0 {
        return Err(WavError::MalformedContainer("zero sample rate".into()));
    }
    if data.len() % 2 != 0 {
        return Err(WavError::MalformedContainer(format!(
            "data chunk length {} is not a whole number of 16-bit samples",
            data.len()
        )));
    }
    if data.is_empty() {
        return Err(WavError::EmptyData);
    }

    let samples = data
        .chunks_exact(2)
        .map(|pair| i16::from_le_bytes([pair[0], pair[1]]) as f64 / 32768.0)
        .collect();
    Ok(AudioClip {
        sample_rate,
        samples,
    })
}

/// Clamp and round a normalized amplitude back to a 16-bit integer.
pub fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Serialize mono 16-bit samples as a canonical 44-byte-header WAV file.
pub fn encode_wav_pcm16(sample_rate: u32, samples: &[i16]) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Byte-by-byte canonical fixture, intentionally not built via the
    /// encoder so the two sides check each other.
    fn canonical_fixture() -> Vec<u8> {
        let mut f = Vec::new();
        f.extend_from_slice(b"RIFF");
        f.extend_from_slice(&44u32.to_le_bytes()); // 36 + 8 data bytes
        f.extend_from_slice(b"WAVE");
        f.extend_from_slice(b"fmt ");
        f.extend_from_slice(&16u32.to_le_bytes());
        f.extend_from_slice(&[1, 0]); // PCM
        f.extend_from_slice(&[1, 0]); // mono
        f.extend_from_slice(&16000u32.to_le_bytes());
        f.extend_from_slice(&32000u32.to_le_bytes());
        f.extend_from_slice(&[2, 0]);
        f.extend_from_slice(&[16, 0]);
        f.extend_from_slice(b"data");
        f.extend_from_slice(&8u32.to_le_bytes());
        for s in [0i16, 16384, -16384, 32767] {
            f.extend_from_slice(&s.to_le_bytes());
        }
        f
    }

    #[test]
    fn decodes_canonical_fixture() {
        let clip = decode_wav(&canonical_fixture()).unwrap();
        assert_eq!(clip.sample_rate, 16000);
        assert_eq!(clip.samples, vec![0.0, 0.5, -0.5, 32767.0 / 32768.0]);
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut bytes = canonical_fixture();
        bytes[..4].copy_from_slice(b"RIFX");
        assert!(matches!(
            decode_wav(&bytes),
            Err(WavError::MalformedContainer(_))
        ));
        let mut bytes = canonical_fixture();
        bytes[8..12].copy_from_slice(b"AIFF");
        assert!(matches!(
            decode_wav(&bytes),
            Err(WavError::MalformedContainer(_))
        ));
    }

    #[test]
    fn rejects_stereo() {
        let mut bytes = canonical_fixture();
        bytes[22] = 2;
        assert!(matches!(
            decode_wav(&bytes),
            Err(WavError::UnsupportedChannels(2))
        ));
    }

    #[test]
    fn rejects_non_pcm_and_non_16_bit() {
        let mut bytes = canonical_fixture();
        bytes[20] = 3; // IEEE float tag
        assert!(matches!(
            decode_wav(&bytes),
            Err(WavError::UnsupportedEncoding { format_tag: 3, .. })
        ));
        let mut bytes = canonical_fixture();
        bytes[34] = 8;
        assert!(matches!(
            decode_wav(&bytes),
            Err(WavError::UnsupportedEncoding { bits: 8, .. })
        ));
    }

    #[test]
    fn rejects_overdeclared_data_chunk() {
        let mut bytes = canonical_fixture();
        let data_size_at = bytes.len() - 8 - 4;
        bytes[data_size_at..data_size_at + 4].copy_from_slice(&64u32.to_le_bytes());
        assert!(matches!(
            decode_wav(&bytes),
            Err(WavError::TruncatedFile { .. })
        ));
    }

    #[test]
    fn rejects_empty_data_chunk() {
        let bytes = encode_wav_pcm16(16000, &[]);
        assert!(matches!(decode_wav(&bytes), Err(WavError::EmptyData)));
    }

    #[test]
    fn skips_unknown_chunks() {
        // Insert a LIST chunk between fmt and data.
        let fixture = canonical_fixture();
        let mut bytes = fixture[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&5u32.to_le_bytes());
        bytes.extend_from_slice(b"INFOx");
        bytes.push(0); // pad byte for the odd-sized chunk
        bytes.extend_from_slice(&fixture[36..]);
        let riff_size = (bytes.len() - 8) as u32;
        bytes[4..8].copy_from_slice(&riff_size.to_le_bytes());
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples.len(), 4);
    }

    #[test]
    fn quantize_clamps_and_rounds() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(0.5), 16384);
        assert_eq!(quantize(-1.0), -32768);
        assert_eq!(quantize(1.0), 32767); // clamped: 32768 is unrepresentable
        assert_eq!(quantize(2.5), 32767);
        assert_eq!(quantize(-2.5), -32768);
    }

    proptest! {
        #[test]
        fn round_trip_recovers_integers(raw in prop::collection::vec(any::<i16>(), 1..200),
                                        rate in 1u32..96_000) {
            let bytes = encode_wav_pcm16(rate, &raw);
            let clip = decode_wav(&bytes).unwrap();
            prop_assert_eq!(clip.sample_rate, rate);
            prop_assert_eq!(clip.samples.len(), raw.len());
            for (s, &orig) in clip.samples.iter().zip(&raw) {
                prop_assert!((-1.0..=1.0).contains(s));
                prop_assert_eq!((s * 32768.0).round() as i32, orig as i32);
            }
        }
    }
}
