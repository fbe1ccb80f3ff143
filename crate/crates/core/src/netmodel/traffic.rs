use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Exponential interarrival time with mean `1 / rate`, in the rate's time unit.
///
/// # Panics
/// If `rate` is not strictly positive and finite.
pub fn draw_packet_interarrival<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    Exp::new(rate)
        .expect("arrival rate must be positive")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(rate: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| draw_packet_interarrival(&mut rng, rate)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var)
    }

    #[test]
    fn mean_matches_inverse_rate() {
        let (mean, _) = moments(4.0, 100_000, 11);
        assert!((mean - 0.25).abs() / 0.25 < 0.01, "mean {mean}");
    }

    #[test]
    fn variance_matches_inverse_rate_squared() {
        let (_, var) = moments(1.0, 100_000, 12);
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn seeded_draws_repeat() {
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..64).map(|_| draw_packet_interarrival(&mut rng, 2.0)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..64).map(|_| draw_packet_interarrival(&mut rng, 2.0)).collect()
        };
        assert_eq!(a, b);
    }
}
