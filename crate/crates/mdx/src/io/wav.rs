use std::path::Path;

use rhotic_core::signal::AudioBuffer;

use crate::error::{write_err, MdxError, Result};

/// Reads a 16-bit PCM mono WAV file, scaling samples by 1/32768.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let reader = hound::WavReader::open(path).map_err(|e| MdxError::at(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(MdxError::at(path, format!("unsupported channel count {}", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(MdxError::at(
            path,
            format!("unsupported encoding ({:?}, {} bits); expected 16-bit PCM", spec.sample_format, spec.bits_per_sample),
        ));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| MdxError::at(path, e))?;
    AudioBuffer::new(samples, spec.sample_rate).map_err(|e| MdxError::at(path, e))
}

/// Writes 16-bit PCM mono, clipping to the representable range.
pub fn write_wav(path: &Path, buf: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| write_err(path, e))?;
    }
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| write_err(path, e))?;
    for &s in buf.samples() {
        let v = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(v).map_err(|e| write_err(path, e))?;
    }
    writer.finalize().map_err(|e| write_err(path, e))
}
