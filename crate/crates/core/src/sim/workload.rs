//! Arrival processes for the three workload patterns.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::config::{WorkloadKind, WorkloadPattern};

/// Instantaneous arrival rate (requests/s) at time `t`.
pub fn rate_at(workload: &WorkloadPattern, t: f64) -> f64 {
    match workload.kind {
        WorkloadKind::Poisson => workload.base_rate,
        WorkloadKind::Ramp => (workload.base_rate + workload.ramp_slope * t).max(0.0),
        WorkloadKind::Burst => {
            let phase = t.rem_euclid(workload.burst_period_s);
            if phase < workload.burst_duration() {
                workload.base_rate * workload.burst_amplitude
            } else {
                workload.base_rate
            }
        }
    }
}

/// Expected number of arrivals in `[t, t + dt)`, i.e. the integral of the rate.
pub fn expected_arrivals(workload: &WorkloadPattern, t: f64, dt: f64) -> f64 {
    match workload.kind {
        WorkloadKind::Poisson => workload.base_rate * dt,
        WorkloadKind::Ramp => {
            let slope = workload.ramp_slope;
            let base = workload.base_rate;
            // rate is clipped at zero; integrate the clipped line exactly
            let end = t + dt;
            let zero_at = if slope != 0.0 { -base / slope } else { f64::NAN };
            let integral = |a: f64, b: f64| base * (b - a) + 0.5 * slope * (b * b - a * a);
            if slope == 0.0 || !(zero_at > t && zero_at < end) {
                let mid = rate_at(workload, t + dt / 2.0);
                if mid <= 0.0 {
                    0.0
                } else {
                    integral(t, end)
                }
            } else if slope > 0.0 {
                integral(zero_at, end)
            } else {
                integral(t, zero_at)
            }
        }
        WorkloadKind::Burst => {
            let period = workload.burst_period_s;
            let duration = workload.burst_duration();
            let high = workload.base_rate * (workload.burst_amplitude - 1.0);
            // base everywhere plus the extra rate over the overlap with burst windows
            let mut total = workload.base_rate * dt;
            if high > 0.0 {
                let end = t + dt;
                let mut k = (t / period).floor();
                loop {
                    let start = k * period;
                    if start >= end {
                        break;
                    }
                    let overlap = (end.min(start + duration) - t.max(start)).max(0.0);
                    total += high * overlap;
                    k += 1.0;
                }
            }
            total
        }
    }
}

/// Number of requests arriving in `[t, t + dt)`.
pub fn generate_arrivals<R: Rng + ?Sized>(
    workload: &WorkloadPattern,
    t: f64,
    dt: f64,
    rng: &mut R,
) -> u64 {
    let mean = expected_arrivals(workload, t, dt);
    if mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(dist) => dist.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Arrival timestamps in `[t, t + dt)`: the count from [`generate_arrivals`] placed by
/// order statistics of uniforms, which is exact for a Poisson process with constant rate
/// over the step.
pub fn arrival_times<R: Rng + ?Sized>(
    workload: &WorkloadPattern,
    t: f64,
    dt: f64,
    rng: &mut R,
) -> Vec<f64> {
    let n = generate_arrivals(workload, t, dt, rng);
    let mut times: Vec<f64> = (0..n).map(|_| t + rng.random::<f64>() * dt).collect();
    times.sort_by(f64::total_cmp);
    times
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poisson_mean_matches_rate() {
        let w = WorkloadPattern::poisson(100.0, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let total: u64 = (0..n).map(|i| generate_arrivals(&w, i as f64, 1.0, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 100.0).abs() / 100.0 < 0.03, "mean {mean}");
    }

    #[test]
    fn ramp_rate_is_linear() {
        let w = WorkloadPattern::ramp(10.0, 1.0, 0);
        assert_eq!(rate_at(&w, 30.0), 40.0);
        assert!((expected_arrivals(&w, 30.0, 2.0) - 82.0).abs() < 1e-9);
        let down = WorkloadPattern::ramp(10.0, -1.0, 0);
        assert_eq!(rate_at(&down, 20.0), 0.0);
        // integral from 8 to 10 of (10 - t) = 2
        assert!((expected_arrivals(&down, 8.0, 4.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn burst_windows() {
        let w = WorkloadPattern::burst(10.0, 3.0, 60.0, 0);
        assert_eq!(rate_at(&w, 5.0), 30.0);
        assert_eq!(rate_at(&w, 20.0), 10.0);
        assert_eq!(rate_at(&w, 61.0), 30.0);
        // [10, 20) overlaps burst [0, 15) for 5 s
        assert!((expected_arrivals(&w, 10.0, 10.0) - (100.0 + 20.0 * 5.0)).abs() < 1e-9);
        // full period: base*60 + extra*15
        assert!((expected_arrivals(&w, 0.0, 60.0) - (600.0 + 300.0)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_burst_matches_poisson_stream() {
        let burst = WorkloadPattern::burst(25.0, 1.0, 30.0, 3);
        let poisson = WorkloadPattern::poisson(25.0, 3);
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for i in 0..500 {
            let t = i as f64 * 0.1;
            assert_eq!(arrival_times(&burst, t, 0.1, &mut a), arrival_times(&poisson, t, 0.1, &mut b));
        }
    }

    #[test]
    fn arrival_times_sorted_within_step() {
        let w = WorkloadPattern::poisson(500.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let times = arrival_times(&w, 3.0, 0.1, &mut rng);
        assert!(!times.is_empty());
        assert!(times.windows(2).all(|p| p[0] <= p[1]));
        assert!(times.iter().all(|&x| (3.0..3.1).contains(&x)));
    }
}
