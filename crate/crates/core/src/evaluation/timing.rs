//! CPU-time accounting for the per-sample processing cost.

use std::time::Duration;

use crate::error::{Error, Result};

/// CPU time consumed by this process so far.
pub fn process_cpu_time() -> Duration {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "CLOCK_PROCESS_CPUTIME_ID unavailable");
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Accumulates CPU time spent inside [`StageTimer::time`] closures only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimer {
    pub total: Duration,
}

impl StageTimer {
    pub fn time<R>(&mut self, f: impl FnOnce() -> R) -> R {
        let start = process_cpu_time();
        let out = f();
        self.total += process_cpu_time().saturating_sub(start);
        out
    }
}

/// Compute time of the two timed stages over a set of samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimes {
    /// Conversion and enhancement.
    pub extraction: Duration,
    pub classification: Duration,
}

/// Mean CPU milliseconds per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mpe {
    pub extraction_ms: f64,
    pub classification_ms: f64,
    pub total_ms: f64,
    pub num_files: usize,
}

pub fn measure_mpe(times: StageTimes, num_files: usize) -> Result<Mpe> {
    if num_files == 0 {
        return Err(Error::Config("MPE needs at least one file".into()));
    }
    let per = |d: Duration| d.as_secs_f64() * 1e3 / num_files as f64;
    let extraction_ms = per(times.extraction);
    let classification_ms = per(times.classification);
    Ok(Mpe {
        extraction_ms,
        classification_ms,
        total_ms: extraction_ms + classification_ms,
        num_files,
    })
}

impl Mpe {
    pub fn to_csv(&self) -> String {
        format!(
            "num_files,extraction_ms,classification_ms,total_ms\n{},{:.4},{:.4},{:.4}\n",
            self.num_files, self.extraction_ms, self.classification_ms, self.total_ms
        )
    }
}
