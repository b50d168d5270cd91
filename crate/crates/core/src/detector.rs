//! Threshold (click / no-click) detectors with lumped efficiency.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdDetector {
    eta: f64,
    dark_rate_per_pulse: f64,
}

impl ThresholdDetector {
    pub fn new(eta: f64) -> Result<Self> {
        Self::with_dark_counts(eta, 0.0)
    }

    pub fn with_dark_counts(eta: f64, dark_rate_per_pulse: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid("eta", format!("{eta} must lie in [0, 1]")));
        }
        if !(0.0..1.0).contains(&dark_rate_per_pulse) {
            return Err(Error::invalid(
                "dark_rate_per_pulse",
                format!("{dark_rate_per_pulse} must lie in [0, 1)"),
            ));
        }
        Ok(ThresholdDetector {
            eta,
            dark_rate_per_pulse,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dark_rate_per_pulse(&self) -> f64 {
        self.dark_rate_per_pulse
    }

    /// `1 − (1−η)ⁿ(1 − dark)`.
    pub fn click_probability(&self, n: u32) -> f64 {
        1.0 - (1.0 - self.eta).powi(n as i32) * (1.0 - self.dark_rate_per_pulse)
    }

    /// Number of the `n` incident photons that survive the lumped loss.
    pub fn thin<R: Rng + ?Sized>(&self, n: u32, rng: &mut R) -> u32 {
        if n == 0 || self.eta == 0.0 {
            return 0;
        }
        if self.eta == 1.0 {
            return n;
        }
        Binomial::new(u64::from(n), self.eta)
            .expect("eta in (0, 1)")
            .sample(rng) as u32
    }

    /// Samples whether the detector fires when `n` photons arrive.
    pub fn clicks<R: Rng + ?Sized>(&self, n: u32, rng: &mut R) -> bool {
        let survivors = self.thin(n, rng);
        survivors > 0
            || (self.dark_rate_per_pulse > 0.0 && rng.random::<f64>() < self.dark_rate_per_pulse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn click_probability_values() {
        assert_eq!(
            ThresholdDetector::new(0.3).unwrap().click_probability(0),
            0.0
        );
        assert_eq!(
            ThresholdDetector::new(1.0).unwrap().click_probability(1),
            1.0
        );
        assert_eq!(
            ThresholdDetector::new(0.5).unwrap().click_probability(2),
            0.75
        );
        let d = ThresholdDetector::with_dark_counts(0.5, 0.1).unwrap();
        assert!((d.click_probability(0) - 0.1).abs() < 1e-15);
        assert!((d.click_probability(1) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(ThresholdDetector::new(1.1).is_err());
        assert!(ThresholdDetector::new(-0.1).is_err());
        assert!(ThresholdDetector::with_dark_counts(0.5, 1.0).is_err());
    }

    #[test]
    fn monotone_and_equal_to_eta_for_one_photon() {
        for k in 0..=20 {
            let eta = k as f64 / 20.0;
            let d = ThresholdDetector::new(eta).unwrap();
            assert!((d.click_probability(1) - eta).abs() < 1e-15);
            for n in 0..6 {
                assert!(d.click_probability(n + 1) >= d.click_probability(n));
                if k > 0 {
                    let lower = ThresholdDetector::new((k - 1) as f64 / 20.0).unwrap();
                    assert!(d.click_probability(n) >= lower.click_probability(n));
                }
            }
        }
    }

    #[test]
    fn thinning_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let all = ThresholdDetector::new(1.0).unwrap();
        let none = ThresholdDetector::new(0.0).unwrap();
        for n in 0..10 {
            assert_eq!(all.thin(n, &mut rng), n);
            assert_eq!(none.thin(n, &mut rng), 0);
        }
    }

    #[test]
    fn sampled_clicks_match_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 1_000_000u32;
        for eta in [0.034, 0.05, 0.5, 1.0] {
            let d = ThresholdDetector::new(eta).unwrap();
            for n in 0..=4 {
                let hits = (0..trials).filter(|_| d.clicks(n, &mut rng)).count() as f64;
                let p = d.click_probability(n);
                let freq = hits / f64::from(trials);
                let se = (p * (1.0 - p) / f64::from(trials)).sqrt();
                assert!(
                    (freq - p).abs() <= 3.0 * se + 1e-12,
                    "eta {eta} n {n}: {freq} vs {p}"
                );
            }
        }
    }
}
