//! RIFF/WAVE reading and writing for 16-bit PCM and 32-bit float audio.
//!
//! Only the chunks needed to recover samples are interpreted; anything else
//! (LIST, fact, cue, ...) is skipped. Errors carry the byte offset at which
//! the file stopped making sense.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::StereoAudio;
use crate::error::{Error, Result};
use crate::scalar::Real;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

impl WavEncoding {
    fn bytes_per_sample(self) -> usize {
        match self {
            WavEncoding::Pcm16 => 2,
            WavEncoding::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavSpec {
    pub sample_rate: u32,
    /// 1 writes the mean of both channels; 2 writes them interleaved.
    pub channels: u16,
    pub encoding: WavEncoding,
}

impl Default for WavSpec {
    fn default() -> Self {
        Self {
            sample_rate: 44_100,
            channels: 2,
            encoding: WavEncoding::Float32,
        }
    }
}

impl WavSpec {
    /// Stereo at the audio's own rate.
    pub fn for_audio<T>(audio: &StereoAudio<T>, encoding: WavEncoding) -> Result<Self> {
        let rate = audio.sample_rate;
        if rate.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&rate) {
            return Err(Error::config("wav.sample_rate", format!("must be a whole number of hertz, got {rate}")));
        }
        Ok(Self {
            sample_rate: rate as u32,
            channels: 2,
            encoding,
        })
    }
}

fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Serialises `audio` as a complete WAVE file.
pub fn encode_wav<T: Real>(audio: &StereoAudio<T>, spec: &WavSpec) -> Result<Vec<u8>> {
    if audio.left.len() != audio.right.len() {
        return Err(Error::Shape("channel lengths differ".into()));
    }
    if spec.sample_rate as f64 != audio.sample_rate {
        return Err(Error::config(
            "wav.sample_rate",
            format!("{} Hz does not match the audio rate {} Hz", spec.sample_rate, audio.sample_rate),
        ));
    }
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::config("wav.channels", format!("must be 1 or 2, got {}", spec.channels)));
    }
    let channels = spec.channels as usize;
    let width = spec.encoding.bytes_per_sample();
    let frames = audio.frames();
    let data_len = frames * channels * width;
    if data_len > u32::MAX as usize - 64 {
        return Err(Error::Shape(format!("{frames} frames do not fit a RIFF container")));
    }
    let float = spec.encoding == WavEncoding::Float32;
    let fmt_len: u32 = if float { 18 } else { 16 };
    let fact_len = if float { 12 } else { 0 };
    let riff_len = 4 + (8 + fmt_len as usize) + fact_len + 8 + data_len;

    let mut out = Vec::with_capacity(8 + riff_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(riff_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&fmt_len.to_le_bytes());
    out.extend_from_slice(&(if float { FORMAT_FLOAT } else { FORMAT_PCM }).to_le_bytes());
    out.extend_from_slice(&spec.channels.to_le_bytes());
    out.extend_from_slice(&spec.sample_rate.to_le_bytes());
    let block = (channels * width) as u32;
    out.extend_from_slice(&(spec.sample_rate * block).to_le_bytes());
    out.extend_from_slice(&(block as u16).to_le_bytes());
    out.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    if float {
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&(frames as u32).to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let mut push = |x: f64| match spec.encoding {
        WavEncoding::Pcm16 => out.extend_from_slice(&quantize(x).to_le_bytes()),
        WavEncoding::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
    };
    for (l, r) in audio.left.iter().zip(&audio.right) {
        let (l, r) = (l.as_f64(), r.as_f64());
        if channels == 1 {
            push(0.5 * (l + r));
        } else {
            push(l);
            push(r);
        }
    }
    Ok(out)
}

pub fn write_wav<T: Real>(audio: &StereoAudio<T>, spec: &WavSpec, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_wav(audio, spec)?;
    super::write_atomic(path.as_ref(), &bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn fail(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.fail(
                self.pos,
                format!("truncated: need {n} bytes for {what}, {} left", self.bytes.len() - self.pos),
            )),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("two bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("four bytes")))
    }
}

struct Format {
    encoding: WavEncoding,
    channels: u16,
    sample_rate: u32,
}

fn parse_fmt(c: &mut Cursor<'_>, len: usize, at: usize) -> Result<Format> {
    if len < 16 {
        return Err(c.fail(at, format!("fmt chunk of {len} bytes is shorter than 16")));
    }
    let body_start = c.pos;
    let mut tag = c.u16("format tag")?;
    let channels = c.u16("channel count")?;
    let sample_rate = c.u32("sample rate")?;
    let _byte_rate = c.u32("byte rate")?;
    let block_align = c.u16("block alignment")?;
    let bits = c.u16("bits per sample")?;
    if tag == FORMAT_EXTENSIBLE {
        if len < 40 {
            return Err(c.fail(body_start, "extensible fmt chunk shorter than 40 bytes"));
        }
        let _cb = c.u16("extension size")?;
        let _valid = c.u16("valid bits")?;
        let _mask = c.u32("channel mask")?;
        tag = c.u16("sub-format")?;
    }
    let encoding = match (tag, bits) {
        (FORMAT_PCM, 16) => WavEncoding::Pcm16,
        (FORMAT_FLOAT, 32) => WavEncoding::Float32,
        _ => {
            return Err(c.fail(
                body_start,
                format!("unsupported encoding: format tag {tag} with {bits} bits per sample"),
            ))
        }
    };
    if !(1..=2).contains(&channels) {
        return Err(c.fail(body_start + 2, format!("unsupported channel count {channels}")));
    }
    if sample_rate == 0 {
        return Err(c.fail(body_start + 4, "sample rate is zero"));
    }
    if block_align as usize != channels as usize * encoding.bytes_per_sample() {
        return Err(c.fail(body_start + 12, format!("block alignment {block_align} is inconsistent")));
    }
    c.pos = body_start + len;
    Ok(Format {
        encoding,
        channels,
        sample_rate,
    })
}

/// Parses a complete WAVE file. Mono input is duplicated to both channels.
pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<StereoAudio<f64>> {
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(4, "RIFF tag")? != b"RIFF" {
        return Err(c.fail(0, "missing RIFF tag"));
    }
    let _riff_len = c.u32("RIFF length")?;
    if c.take(4, "WAVE tag")? != b"WAVE" {
        return Err(c.fail(8, "missing WAVE tag"));
    }
    let mut format: Option<Format> = None;
    loop {
        let at = c.pos;
        let id: [u8; 4] = c.take(4, "chunk id")?.try_into().expect("four bytes");
        let len = c.u32("chunk length")? as usize;
        match &id {
            b"fmt " => {
                if c.bytes.len() - c.pos < len {
                    return Err(c.fail(c.pos, format!("truncated: fmt chunk claims {len} bytes")));
                }
                format = Some(parse_fmt(&mut c, len, at)?);
            }
            b"data" => {
                let fmt = format.ok_or_else(|| c.fail(at, "data chunk before fmt chunk"))?;
                let data_at = c.pos;
                let body = c.take(len, "sample data")?;
                let width = fmt.encoding.bytes_per_sample();
                let block = width * fmt.channels as usize;
                if !len.is_multiple_of(block) {
                    return Err(c.fail(data_at, format!("{len} data bytes is not a whole number of {block}-byte frames")));
                }
                let samples: Vec<f64> = body
                    .chunks_exact(width)
                    .map(|b| match fmt.encoding {
                        WavEncoding::Pcm16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
                        WavEncoding::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    })
                    .collect();
                if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
                    return Err(c.fail(data_at + i * width, "non-finite sample"));
                }
                let (left, right) = if fmt.channels == 1 {
                    (samples.clone(), samples)
                } else {
                    samples.chunks_exact(2).map(|p| (p[0], p[1])).unzip()
                };
                return StereoAudio::new(fmt.sample_rate as f64, left, right);
            }
            _ => {
                c.take(len + (len & 1), "chunk body")?;
            }
        }
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<StereoAudio<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn here() -> &'static Path {
        Path::new("mem.wav")
    }

    fn parse_offset(e: Error) -> u64 {
        match e {
            Error::Parse { offset, .. } => offset,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn one_second_of_float_silence_has_expected_data_size() {
        let audio = StereoAudio::<f64>::silence(44_100.0, 44_100);
        let spec = WavSpec::for_audio(&audio, WavEncoding::Float32).unwrap();
        let bytes = encode_wav(&audio, &spec).unwrap();
        let data = bytes.windows(4).position(|w| w == b"data").unwrap();
        let len = u32::from_le_bytes(bytes[data + 4..data + 8].try_into().unwrap());
        assert_eq!(len, 352_800);
        assert_eq!(bytes.len(), data + 8 + 352_800);
        let back = decode_wav(&bytes, here()).unwrap();
        assert_eq!(back.frames(), 44_100);
        assert!(back.left.iter().chain(&back.right).all(|v| *v == 0.0));
    }

    #[test]
    fn header_fields_are_standard() {
        let audio = StereoAudio::new(48_000.0, vec![0.0f64; 10], vec![0.0; 10]).unwrap();
        let spec = WavSpec::for_audio(&audio, WavEncoding::Pcm16).unwrap();
        let b = encode_wav(&audio, &spec).unwrap();
        assert_eq!(&b[0..4], b"RIFF");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()) as usize, b.len() - 8);
        assert_eq!(&b[8..16], b"WAVEfmt ");
        assert_eq!(u16::from_le_bytes([b[20], b[21]]), 1);
        assert_eq!(u32::from_le_bytes(b[24..28].try_into().unwrap()), 48_000);
        assert_eq!(u32::from_le_bytes(b[28..32].try_into().unwrap()), 48_000 * 4);
        assert_eq!(b.len(), 44 + 40);
    }

    #[test]
    fn mono_is_duplicated() {
        let audio = StereoAudio::new(8_000.0, vec![0.25f64, -0.5, 0.125], vec![0.25, -0.5, 0.125]).unwrap();
        let spec = WavSpec {
            sample_rate: 8_000,
            channels: 1,
            encoding: WavEncoding::Float32,
        };
        let back = decode_wav(&encode_wav(&audio, &spec).unwrap(), here()).unwrap();
        assert_eq!(back.left, back.right);
        assert_eq!(back.left, vec![0.25, -0.5, 0.125]);
    }

    #[test]
    fn truncation_anywhere_is_an_error_not_a_panic() {
        let audio = StereoAudio::new(8_000.0, vec![0.1f64; 16], vec![-0.1; 16]).unwrap();
        for enc in [WavEncoding::Pcm16, WavEncoding::Float32] {
            let bytes = encode_wav(&audio, &WavSpec::for_audio(&audio, enc).unwrap()).unwrap();
            for cut in 0..bytes.len() {
                let off = parse_offset(decode_wav(&bytes[..cut], here()).unwrap_err());
                assert!(off as usize <= cut, "offset {off} beyond cut {cut}");
            }
        }
    }

    #[test]
    fn bad_tags_and_encodings_report_offsets() {
        let audio = StereoAudio::new(8_000.0, vec![0.0f64; 4], vec![0.0; 4]).unwrap();
        let good = encode_wav(&audio, &WavSpec::for_audio(&audio, WavEncoding::Pcm16).unwrap()).unwrap();
        let mut b = good.clone();
        b[8] = b'X';
        assert_eq!(parse_offset(decode_wav(&b, here()).unwrap_err()), 8);
        let mut b = good.clone();
        b[34] = 24;
        assert_eq!(parse_offset(decode_wav(&b, here()).unwrap_err()), 20);
        let mut b = good;
        b[22] = 6;
        assert_eq!(parse_offset(decode_wav(&b, here()).unwrap_err()), 22);
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let audio = StereoAudio::new(8_000.0, vec![0.5f64, 0.25], vec![-0.5, -0.25]).unwrap();
        let bytes = encode_wav(&audio, &WavSpec::for_audio(&audio, WavEncoding::Float32).unwrap()).unwrap();
        let data = bytes.windows(4).position(|w| w == b"data").unwrap();
        let mut patched = bytes[..data].to_vec();
        patched.extend_from_slice(b"LIST");
        patched.extend_from_slice(&3u32.to_le_bytes());
        patched.extend_from_slice(&[1, 2, 3, 0]);
        patched.extend_from_slice(&bytes[data..]);
        let back = decode_wav(&patched, here()).unwrap();
        assert_eq!(back.left, vec![0.5, 0.25]);
    }

    proptest! {
        #[test]
        fn float_round_trip_is_exact(samples in prop::collection::vec((-1.0f32..1.0, -1.0f32..1.0), 0..300)) {
            let (l, r): (Vec<f32>, Vec<f32>) = samples.into_iter().unzip();
            let audio = StereoAudio::new(44_100.0, l, r).unwrap();
            let spec = WavSpec::for_audio(&audio, WavEncoding::Float32).unwrap();
            let back = decode_wav(&encode_wav(&audio, &spec).unwrap(), here()).unwrap();
            prop_assert_eq!(back.cast::<f32>(), audio);
        }

        #[test]
        fn pcm16_round_trip_within_one_step(samples in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 1..300)) {
            let (l, r): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
            let audio = StereoAudio::new(22_050.0, l, r).unwrap();
            let spec = WavSpec::for_audio(&audio, WavEncoding::Pcm16).unwrap();
            let back = decode_wav(&encode_wav(&audio, &spec).unwrap(), here()).unwrap();
            let worst = audio.left.iter().chain(&audio.right)
                .zip(back.left.iter().chain(&back.right))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            prop_assert!(worst <= 2f64.powi(-15), "worst {}", worst);
        }
    }
}
