//! Mono audio buffers and the framing front end shared by formant tracking
//! and the source-feature estimator.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("sample rate must be positive, got {0}")]
    InvalidRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("pre-emphasis cutoff {cutoff_hz} Hz outside (0, {nyquist_hz}) Hz")]
    CutoffOutOfRange { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("window of {window} samples is too short (need at least 2)")]
    WindowTooShort { window: usize },
    #[error("hop must be positive and shorter than the window (hop {hop_s} s, window {window_s} s)")]
    InvalidHop { hop_s: f64, window_s: f64 },
    #[error("signal of {len} samples is shorter than one {window}-sample window")]
    TooShort { len: usize, window: usize },
}

/// Mono audio, amplitudes nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, SignalError> {
        if sample_rate == 0 {
            return Err(SignalError::InvalidRate(sample_rate));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Equal-length, Hamming-windowed analysis frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub frames: Vec<Vec<f64>>,
    pub window_s: f64,
    pub hop_s: f64,
    pub start_times: Vec<f64>,
    pub sample_rate: u32,
}

impl FrameSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Time of the middle of frame `i`.
    pub fn center_time(&self, i: usize) -> f64 {
        self.start_times[i] + 0.5 * self.window_s
    }
}

// Zero crossings of the sinc kernel on each side of the centre tap.
const SINC_ZEROS: f64 = 16.0;
// Kernel table resolution, entries per input sample.
const TABLE_OVERSAMPLING: usize = 256;
// Passband edge as a fraction of the lower Nyquist frequency.
const PASSBAND: f64 = 0.95;

/// Band-limited resampling with a Blackman-windowed sinc kernel.
///
/// The output has `round(len · target / source)` samples. The kernel cutoff
/// sits just below the lower of the two Nyquist frequencies and each output
/// sample is normalized by the sum of the taps it used, so DC is preserved
/// exactly, including near the edges.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer, SignalError> {
    if target_rate == 0 {
        return Err(SignalError::InvalidRate(target_rate));
    }
    if target_rate == buf.sample_rate {
        return Ok(buf.clone());
    }
    let ratio = target_rate as f64 / buf.sample_rate as f64;
    let out_len = libm::round(buf.len() as f64 * ratio) as usize;
    // cycles per input sample
    let bandwidth = 0.5 * PASSBAND * ratio.min(1.0);
    let half_width = SINC_ZEROS / (2.0 * bandwidth);
    let table = sinc_table(bandwidth, half_width);

    let input = &buf.samples;
    let n_in = input.len() as isize;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let pos = n as f64 / ratio;
        let lo = libm::ceil(pos - half_width).max(0.0) as isize;
        let hi = (libm::floor(pos + half_width) as isize).min(n_in - 1);
        let mut acc = 0.0;
        let mut norm = 0.0;
        let mut k = lo;
        while k <= hi {
            let w = table_lookup(&table, libm::fabs(pos - k as f64));
            acc += w * input[k as usize];
            norm += w;
            k += 1;
        }
        out.push(if norm.abs() > 1e-12 { acc / norm } else { 0.0 });
    }
    Ok(AudioBuffer {
        samples: out,
        sample_rate: target_rate,
    })
}

fn sinc_table(bandwidth: f64, half_width: f64) -> Vec<f64> {
    let len = libm::ceil(half_width * TABLE_OVERSAMPLING as f64) as usize + 2;
    (0..len)
        .map(|i| {
            let u = i as f64 / TABLE_OVERSAMPLING as f64;
            if u >= half_width {
                return 0.0;
            }
            let x = 2.0 * bandwidth * u;
            let sinc = if x == 0.0 { 1.0 } else { libm::sin(PI * x) / (PI * x) };
            // Blackman window over [-half_width, half_width]
            let t = u / half_width;
            let window = 0.42 + 0.5 * libm::cos(PI * t) + 0.08 * libm::cos(2.0 * PI * t);
            2.0 * bandwidth * sinc * window
        })
        .collect()
}

fn table_lookup(table: &[f64], distance: f64) -> f64 {
    let x = distance * TABLE_OVERSAMPLING as f64;
    let i = x as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = x - i as f64;
    table[i] + frac * (table[i + 1] - table[i])
}

/// First-order pre-emphasis `y[n] = x[n] − a·x[n−1]`, `a = exp(−2π·cutoff/fs)`.
///
/// The first sample is treated as if preceded by itself, `y[0] = x[0]·(1 − a)`,
/// so a constant signal maps to a constant.
pub fn preemphasize(buf: &AudioBuffer, cutoff_hz: f64) -> Result<AudioBuffer, SignalError> {
    let nyquist_hz = buf.sample_rate as f64 / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
        return Err(SignalError::CutoffOutOfRange { cutoff_hz, nyquist_hz });
    }
    let a = preemphasis_coefficient(cutoff_hz, buf.sample_rate);
    Ok(AudioBuffer {
        samples: preemphasis_filter(&buf.samples, a),
        sample_rate: buf.sample_rate,
    })
}

pub fn preemphasis_coefficient(cutoff_hz: f64, sample_rate: u32) -> f64 {
    libm::exp(-2.0 * PI * cutoff_hz / sample_rate as f64)
}

pub fn preemphasis_filter(samples: &[f64], a: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = samples.first().copied().unwrap_or(0.0);
    for &x in samples {
        out.push(x - a * prev);
        prev = x;
    }
    out
}

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * libm::cos(2.0 * PI * i as f64 / (n - 1) as f64))
        .collect()
}

/// Splits the buffer into Hamming-windowed frames.
///
/// Window and hop are rounded to whole samples; the frame count is
/// `floor((N − W) / H) + 1`.
pub fn frame_signal(buf: &AudioBuffer, window_s: f64, hop_s: f64) -> Result<FrameSet, SignalError> {
    let fs = buf.sample_rate as f64;
    let window = libm::round(window_s * fs) as usize;
    let hop = libm::round(hop_s * fs) as usize;
    if !(window_s * fs >= 2.0) {
        return Err(SignalError::WindowTooShort { window });
    }
    if !(hop_s > 0.0) || hop == 0 || hop >= window {
        return Err(SignalError::InvalidHop { hop_s, window_s });
    }
    let n = buf.len();
    if n < window {
        return Err(SignalError::TooShort { len: n, window });
    }
    let count = (n - window) / hop + 1;
    let taper = hamming(window);
    let mut frames = Vec::with_capacity(count);
    let mut start_times = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * hop;
        let frame = buf.samples[start..start + window]
            .iter()
            .zip(&taper)
            .map(|(s, w)| s * w)
            .collect();
        frames.push(frame);
        start_times.push(start as f64 / fs);
    }
    Ok(FrameSet {
        frames,
        window_s: window as f64 / fs,
        hop_s: hop as f64 / fs,
        start_times,
        sample_rate: buf.sample_rate,
    })
}
