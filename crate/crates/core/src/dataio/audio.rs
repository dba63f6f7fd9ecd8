use std::path::Path;

use super::{read_file, write_file, DataError, Result};

const TAG_PCM: u16 = 0x0001;
const TAG_IEEE_FLOAT: u16 = 0x0003;
const TAG_EXTENSIBLE: u16 = 0xFFFE;

/// Interleaved floating-point PCM.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    pub channels: u16,
    pub samples: Vec<f32>,
}

impl AudioBuffer {
    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Self {
        Self {
            sample_rate,
            channels: 1,
            samples,
        }
    }

    pub fn stereo(sample_rate: u32, left: &[f32], right: &[f32]) -> Self {
        let n = left.len().max(right.len());
        let mut samples = Vec::with_capacity(2 * n);
        for i in 0..n {
            samples.push(left.get(i).copied().unwrap_or(0.0));
            samples.push(right.get(i).copied().unwrap_or(0.0));
        }
        Self {
            sample_rate,
            channels: 2,
            samples,
        }
    }

    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, c: usize) -> Vec<f32> {
        let n = self.channels as usize;
        self.samples.iter().skip(c).step_by(n).copied().collect()
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(DataError::Binary {
                offset: self.pos as u64,
                msg: format!("unexpected end of file reading {what}"),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn parse_fmt(chunk: &[u8], offset: usize) -> Result<Format> {
    let mut c = Cursor {
        data: chunk,
        pos: 0,
    };
    let bad = |msg: &str| DataError::Binary {
        offset: offset as u64,
        msg: msg.to_owned(),
    };
    if chunk.len() < 16 {
        return Err(bad("fmt chunk shorter than 16 bytes"));
    }
    let mut tag = c.u16("format tag")?;
    let channels = c.u16("channels")?;
    let sample_rate = c.u32("sample rate")?;
    let _byte_rate = c.u32("byte rate")?;
    let block_align = c.u16("block align")?;
    let bits = c.u16("bits per sample")?;
    if tag == TAG_EXTENSIBLE {
        if chunk.len() < 40 {
            return Err(bad("extensible fmt chunk shorter than 40 bytes"));
        }
        // the sub-format GUID starts with the effective format tag
        tag = u16::from_le_bytes([chunk[24], chunk[25]]);
    }
    Ok(Format {
        tag,
        channels,
        sample_rate,
        block_align,
        bits,
    })
}

/// Decodes a RIFF/WAVE file holding PCM16 or float32, mono or stereo.
pub fn read_wav_bytes(data: &[u8]) -> Result<AudioBuffer> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(4, "RIFF id")? != b"RIFF" {
        return Err(DataError::Binary {
            offset: 0,
            msg: "missing RIFF signature".into(),
        });
    }
    c.u32("RIFF size")?;
    if c.take(4, "WAVE id")? != b"WAVE" {
        return Err(DataError::Binary {
            offset: 8,
            msg: "missing WAVE signature".into(),
        });
    }
    let mut format: Option<Format> = None;
    while c.pos < data.len() {
        let chunk_start = c.pos;
        let id = c.take(4, "chunk id")?;
        let size = c.u32("chunk size")? as usize;
        let body_start = c.pos;
        if data.len() - body_start < size {
            return Err(DataError::Truncated {
                what: "WAV chunk (bytes)",
                expected: (body_start + size) as u64,
                actual: data.len() as u64,
            });
        }
        let body = &data[body_start..body_start + size];
        c.pos = body_start + size + (size & 1);
        c.pos = c.pos.min(data.len());
        match id {
            b"fmt " => format = Some(parse_fmt(body, chunk_start)?),
            b"data" => {
                let fmt = format.ok_or(DataError::Binary {
                    offset: chunk_start as u64,
                    msg: "data chunk before fmt chunk".into(),
                })?;
                return decode_samples(&fmt, body, body_start);
            }
            _ => {}
        }
    }
    Err(DataError::Binary {
        offset: data.len() as u64,
        msg: "no data chunk".into(),
    })
}

fn decode_samples(fmt: &Format, body: &[u8], offset: usize) -> Result<AudioBuffer> {
    let bytes_per = match (fmt.tag, fmt.bits) {
        (TAG_PCM, 16) => 2usize,
        (TAG_IEEE_FLOAT, 32) => 4,
        (tag, bits) => {
            return Err(DataError::UnsupportedCodec {
                offset: offset as u64,
                tag,
                bits,
            })
        }
    };
    if fmt.channels != 1 && fmt.channels != 2 {
        return Err(DataError::Binary {
            offset: offset as u64,
            msg: format!("unsupported channel count {}", fmt.channels),
        });
    }
    if fmt.sample_rate == 0 {
        return Err(DataError::Binary {
            offset: offset as u64,
            msg: "zero sample rate".into(),
        });
    }
    let frame = bytes_per * fmt.channels as usize;
    if fmt.block_align as usize != frame {
        return Err(DataError::Binary {
            offset: offset as u64,
            msg: format!(
                "block align {} inconsistent with {} byte frames",
                fmt.block_align, frame
            ),
        });
    }
    if !body.len().is_multiple_of(frame) {
        return Err(DataError::Truncated {
            what: "WAV data",
            expected: (offset + (body.len() / frame + 1) * frame) as u64,
            actual: (offset + body.len()) as u64,
        });
    }
    let samples = if bytes_per == 2 {
        body.chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
            .collect()
    } else {
        body.chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect()
    };
    Ok(AudioBuffer {
        sample_rate: fmt.sample_rate,
        channels: fmt.channels,
        samples,
    })
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    read_wav_bytes(&read_file(path.as_ref())?)
}

/// Encodes `buf` as a float32 WAV.
pub fn wav_bytes(buf: &AudioBuffer) -> Result<Vec<u8>> {
    if let Some(i) = buf.samples.iter().position(|s| !s.is_finite()) {
        return Err(DataError::NonFiniteSample(i));
    }
    if buf.channels == 0 || !buf.samples.len().is_multiple_of(buf.channels as usize) {
        return Err(DataError::Invalid(
            "sample count is not a multiple of the channel count".into(),
        ));
    }
    let data_len = buf.samples.len() * 4;
    let frames = buf.frames() as u32;
    let block_align = 4 * buf.channels;
    let mut out = Vec::with_capacity(58 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((4 + 26 + 12 + 8 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&18u32.to_le_bytes());
    out.extend_from_slice(&TAG_IEEE_FLOAT.to_le_bytes());
    out.extend_from_slice(&buf.channels.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&32u16.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(b"fact");
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for s in &buf.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

pub fn write_wav(path: impl AsRef<Path>, buf: &AudioBuffer) -> Result<()> {
    write_file(path.as_ref(), &wav_bytes(buf)?)
}
