use std::time::{Duration, Instant};

use crate::{Error, Result};

/// Synthesis wall-clock time divided by the duration of the audio it stands for.
pub fn real_time_factor(wall: Duration, n_patches: usize, frame_ms: u32) -> Result<f64> {
    let audio_ms = n_patches as u64 * frame_ms as u64;
    if audio_ms == 0 {
        return Err(Error::InvalidInput("synthesized audio has zero duration".into()));
    }
    Ok(wall.as_secs_f64() * 1000.0 / audio_ms as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtfReport {
    pub wall: Duration,
    pub n_patches: usize,
    pub audio_seconds: f64,
    pub rtf: f64,
}

/// Times one call of `synthesis`, which returns the number of patches produced.
pub fn measure_rtf(synthesis: impl FnOnce() -> Result<usize>, frame_ms: u32) -> Result<RtfReport> {
    let start = Instant::now();
    let n_patches = synthesis()?;
    let wall = start.elapsed();
    let rtf = real_time_factor(wall, n_patches, frame_ms)?;
    Ok(RtfReport {
        wall,
        n_patches,
        audio_seconds: n_patches as f64 * frame_ms as f64 / 1000.0,
        rtf,
    })
}
