//! Voiced-frame log-F0 statistics and the mean/variance renormalization that
//! moves a source contour onto pseudo-speaker statistics.
//!
//! All statistics live in natural-log Hz. A frame is voiced iff its value is
//! strictly positive; unvoiced frames carry the sentinel `0.0` and are passed
//! through every transform untouched.

use crate::error::{Error, Result};

pub const DEFAULT_FRAME_SHIFT_MS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    pub utterance_id: String,
    /// Hz per frame, `0.0` for unvoiced frames.
    pub values: Vec<f64>,
    pub frame_shift_ms: f64,
}

impl F0Contour {
    pub fn new(utterance_id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let contour = Self {
            utterance_id: utterance_id.into(),
            values,
            frame_shift_ms: DEFAULT_FRAME_SHIFT_MS,
        };
        contour.validate()?;
        Ok(contour)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((i, v)) = self
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidValue(format!(
                "contour '{}' frame {i}: {v} is not a finite non-negative F0",
                self.utterance_id
            )));
        }
        if !(self.frame_shift_ms.is_finite() && self.frame_shift_ms > 0.0) {
            return Err(Error::InvalidValue(format!(
                "frame shift {} ms must be positive",
                self.frame_shift_ms
            )));
        }
        Ok(())
    }

    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| *v > 0.0)
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced().count()
    }
}

/// Mean and population standard deviation of ln(F0) over voiced frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogF0Stats {
    pub mean: f64,
    pub std: f64,
    pub voiced_frame_count: u64,
}

impl LogF0Stats {
    pub fn new(mean: f64, std: f64, voiced_frame_count: u64) -> Result<Self> {
        let stats = Self {
            mean,
            std,
            voiced_frame_count,
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::InvalidValue(format!("log-F0 mean {} is not finite", self.mean)));
        }
        if !(self.std.is_finite() && self.std >= 0.0) {
            return Err(Error::InvalidValue(format!(
                "log-F0 std {} must be finite and non-negative",
                self.std
            )));
        }
        Ok(())
    }
}

pub fn compute_log_f0_stats(contour: &F0Contour) -> Result<LogF0Stats> {
    let logs: Vec<f64> = contour.voiced().map(f64::ln).collect();
    if logs.is_empty() {
        return Err(Error::NoVoicedFrames(Some(contour.utterance_id.clone())));
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(LogF0Stats {
        mean,
        std: var.sqrt(),
        voiced_frame_count: logs.len() as u64,
    })
}

/// Maps every voiced frame through `ln x -> mu_y + (sigma_y / sigma_x)(ln x - mu_x)`
/// and back to Hz.
///
/// A zero source std is accepted only when the target std is also zero, in
/// which case every voiced frame lands on `exp(mu_y)`.
pub fn transform_contour(
    contour: &F0Contour,
    source: &LogF0Stats,
    target: &LogF0Stats,
) -> Result<F0Contour> {
    let ratio = if source.std > 0.0 {
        target.std / source.std
    } else if target.std == 0.0 {
        0.0
    } else {
        return Err(Error::DegenerateSourceStats {
            target_std: target.std,
        });
    };
    let values = contour
        .values
        .iter()
        .map(|&v| {
            if v > 0.0 {
                (target.mean + ratio * (v.ln() - source.mean)).exp()
            } else {
                v
            }
        })
        .collect();
    Ok(F0Contour {
        utterance_id: contour.utterance_id.clone(),
        values,
        frame_shift_ms: contour.frame_shift_ms,
    })
}

/// Per-speaker averaging: mean of means, mean of stds, summed frame counts.
pub fn aggregate_target_stats(per_speaker: &[LogF0Stats]) -> Result<LogF0Stats> {
    if per_speaker.is_empty() {
        return Err(Error::EmptySpeakerSet);
    }
    let n = per_speaker.len() as f64;
    Ok(LogF0Stats {
        mean: per_speaker.iter().map(|s| s.mean).sum::<f64>() / n,
        std: per_speaker.iter().map(|s| s.std).sum::<f64>() / n,
        voiced_frame_count: per_speaker.iter().map(|s| s.voiced_frame_count).sum(),
    })
}
