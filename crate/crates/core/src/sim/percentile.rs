use crate::error::{Result, SairError};
use crate::scalar::Scalar;

/// Nearest-rank percentile: the smallest sample such that at least `p` percent of the
/// window is less than or equal to it.
pub fn sample_latency_percentile<T: Scalar>(window: &[T], p: T) -> Result<T> {
    if window.is_empty() {
        return Err(SairError::NoSamples);
    }
    if !(p > T::zero() && p <= T::lit(100.0)) {
        return Err(SairError::Config(format!("percentile {p} outside (0, 100]")));
    }
    let n = window.len();
    // p * n / 100 rounded up; the small slack keeps exact products like 99 * 100 / 100
    // from rounding up to the next rank
    let rank = (p.as_f64() * n as f64 / 100.0 - 1e-9).ceil() as usize;
    let idx = rank.clamp(1, n) - 1;
    let mut buf = window.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).expect("finite latency"));
    Ok(*v)
}
