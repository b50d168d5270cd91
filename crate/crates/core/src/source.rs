//! Photon-pair sources, heralding and pair-number sampling.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};

use crate::error::{Error, Result};
use crate::fock::{FockOccupation, PureState};

/// Pair-number statistics of a source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStatistics {
    /// Single-mode thermal (Gaussian field) statistics, as produced by
    /// narrowband filtering; two-pair amplitude coefficient 1.
    Thermal,
    /// Poissonian emission; two-pair amplitude coefficient 1/√2!.
    Poisson,
}

impl PairStatistics {
    /// Amplitude coefficient of the `k`-pair term relative to `αᵏ`.
    pub fn coefficient(self, k: u32) -> f64 {
        match self {
            PairStatistics::Thermal => 1.0,
            PairStatistics::Poisson => (1..=k).map(f64::from).product::<f64>().sqrt().recip(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSource {
    n_bar: f64,
    statistics: PairStatistics,
    truncation: u32,
}

impl PairSource {
    pub const DEFAULT_TRUNCATION: u32 = 2;

    pub fn new(n_bar: f64, statistics: PairStatistics) -> Result<Self> {
        if !(n_bar >= 0.0) || !n_bar.is_finite() {
            return Err(Error::invalid(
                "n_bar",
                format!("{n_bar} must be finite and ≥ 0"),
            ));
        }
        Ok(PairSource {
            n_bar,
            statistics,
            truncation: Self::DEFAULT_TRUNCATION,
        })
    }

    pub fn with_truncation(mut self, truncation: u32) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::invalid("truncation", "must keep at least one pair"));
        }
        self.truncation = truncation;
        Ok(self)
    }

    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    pub fn statistics(&self) -> PairStatistics {
        self.statistics
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    fn require_perturbative(&self) -> Result<()> {
        if self.n_bar >= 1.0 {
            return Err(Error::invalid(
                "n_bar",
                format!("{} is outside the perturbative regime n̄ < 1", self.n_bar),
            ));
        }
        Ok(())
    }

    /// Normalized probabilities of `0..=truncation` pairs in the truncated
    /// state, `∝ C_k² n̄ᵏ`.
    pub fn truncated_pair_distribution(&self) -> Result<Vec<f64>> {
        self.require_perturbative()?;
        let weights: Vec<f64> = (0..=self.truncation)
            .map(|k| self.statistics.coefficient(k).powi(2) * self.n_bar.powi(k as i32))
            .collect();
        let total: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / total).collect())
    }

    /// Signal/idler state `𝒩 Σ_k C_k αᵏ |k,k⟩` with real `α = √n̄`.
    /// Mode 0 is the signal, mode 1 the idler.
    pub fn two_mode_state(&self) -> Result<PureState> {
        self.require_perturbative()?;
        let alpha = self.n_bar.sqrt();
        let terms = (0..=self.truncation).filter_map(|k| {
            let amp = self.statistics.coefficient(k) * alpha.powi(k as i32);
            (amp != 0.0 || k == 0)
                .then(|| (FockOccupation::new(vec![k, k]), Complex64::new(amp, 0.0)))
        });
        PureState::from_terms(2, 2 * self.truncation, terms)?.normalized()
    }

    /// Signal state conditioned on an idler click at efficiency `eta_i`,
    /// keeping the one- and two-photon terms.
    pub fn herald(&self, eta_i: f64) -> Result<HeraldedState> {
        self.require_perturbative()?;
        if !(eta_i > 0.0 && eta_i <= 1.0) {
            return Err(Error::invalid(
                "eta_i",
                format!("{eta_i} must lie in (0, 1]"),
            ));
        }
        let gamma = 1.0 - eta_i / 2.0;
        let c2 = self.statistics.coefficient(2).powi(2);
        let q = 2.0 * c2 * self.n_bar * gamma;
        let two_over_one = (q / (1.0 + q)).sqrt();
        let norm = (1.0 + two_over_one * two_over_one).sqrt();
        Ok(HeraldedState {
            amp_one: 1.0 / norm,
            amp_two: two_over_one / norm,
            gamma,
        })
    }

    /// Draws the number of pairs emitted in one pulse (untruncated).
    pub fn sample_pair_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.n_bar == 0.0 {
            return 0;
        }
        let n = match self.statistics {
            PairStatistics::Thermal => {
                // P(n) = n̄ⁿ/(1+n̄)ⁿ⁺¹: failures before the first success.
                Geometric::new(1.0 / (1.0 + self.n_bar))
                    .expect("probability in (0, 1]")
                    .sample(rng)
            }
            PairStatistics::Poisson => Poisson::new(self.n_bar)
                .expect("positive finite rate")
                .sample(rng) as u64,
        };
        u32::try_from(n).unwrap_or(u32::MAX)
    }

    /// Analytic probability of `n` pairs in one pulse (untruncated).
    pub fn pair_probability(&self, n: u32) -> f64 {
        let nb = self.n_bar;
        match self.statistics {
            PairStatistics::Thermal => nb.powi(n as i32) / (1.0 + nb).powi(n as i32 + 1),
            PairStatistics::Poisson => {
                let log_fact: f64 = (1..=n).map(|k| f64::from(k).ln()).sum();
                if nb == 0.0 {
                    if n == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (f64::from(n) * nb.ln() - nb - log_fact).exp()
                }
            }
        }
    }
}

/// Heralded signal state `amp_one |1⟩ + amp_two |2⟩`, normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldedState {
    pub amp_one: f64,
    pub amp_two: f64,
    /// `1 − η_i/2`.
    pub gamma: f64,
}

impl HeraldedState {
    /// Ratio `amp_two/amp_one`, the two-photon amplitude before normalization.
    pub fn two_photon_ratio(&self) -> f64 {
        self.amp_two / self.amp_one
    }

    pub fn to_state(&self, n_max: u32) -> Result<PureState> {
        PureState::from_terms(
            1,
            n_max,
            [
                (
                    FockOccupation::new(vec![1]),
                    Complex64::new(self.amp_one, 0.0),
                ),
                (
                    FockOccupation::new(vec![2]),
                    Complex64::new(self.amp_two, 0.0),
                ),
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn vacuum_at_zero_n_bar() {
        let s = PairSource::new(0.0, PairStatistics::Thermal)
            .unwrap()
            .two_mode_state()
            .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.amplitude(&[0, 0]).re, 1.0);
    }

    #[test]
    fn thermal_state_amplitudes() {
        let s = PairSource::new(0.04, PairStatistics::Thermal)
            .unwrap()
            .two_mode_state()
            .unwrap();
        let norm = (1.0f64 + 0.04 + 0.0016).sqrt();
        assert_abs_diff_eq!(s.amplitude(&[0, 0]).re, 1.0 / norm, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(&[1, 1]).re, 0.2 / norm, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(&[2, 2]).re, 0.04 / norm, epsilon = 1e-15);
    }

    #[test]
    fn poisson_two_pair_coefficient() {
        let s = PairSource::new(0.04, PairStatistics::Poisson)
            .unwrap()
            .two_mode_state()
            .unwrap();
        let ratio = s.amplitude(&[2, 2]).re / s.amplitude(&[0, 0]).re;
        assert_abs_diff_eq!(ratio, 0.04 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn non_perturbative_rejected() {
        let src = PairSource::new(1.0, PairStatistics::Thermal).unwrap();
        assert!(src.two_mode_state().is_err());
        assert!(src.herald(0.5).is_err());
        assert!(PairSource::new(-0.1, PairStatistics::Thermal).is_err());
    }

    #[test]
    fn state_norm_over_range() {
        for k in 0..=50 {
            let n_bar = 0.01 * k as f64;
            for stats in [PairStatistics::Thermal, PairStatistics::Poisson] {
                let s = PairSource::new(n_bar, stats)
                    .unwrap()
                    .two_mode_state()
                    .unwrap();
                assert!((s.norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn herald_values() {
        let src = PairSource::new(0.0, PairStatistics::Thermal).unwrap();
        let h = src.herald(0.05).unwrap();
        assert_eq!(h.amp_two, 0.0);
        assert_eq!(h.amp_one, 1.0);

        let h = PairSource::new(0.025, PairStatistics::Thermal)
            .unwrap()
            .herald(0.05)
            .unwrap();
        assert_abs_diff_eq!(h.gamma, 0.975, epsilon = 1e-15);
        assert_abs_diff_eq!(
            h.two_photon_ratio(),
            (0.04875f64 / 1.04875).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(h.two_photon_ratio(), 0.2156, epsilon = 1e-4);
        assert_abs_diff_eq!(h.amp_one.powi(2) + h.amp_two.powi(2), 1.0, epsilon = 1e-12);

        let h = PairSource::new(0.1, PairStatistics::Thermal)
            .unwrap()
            .herald(1.0)
            .unwrap();
        assert_abs_diff_eq!(h.two_photon_ratio(), (0.1f64 / 1.1).sqrt(), epsilon = 1e-12);

        assert!(PairSource::new(0.1, PairStatistics::Thermal)
            .unwrap()
            .herald(0.0)
            .is_err());
    }

    #[test]
    fn herald_monotonicity() {
        let amp = |n: f64, eta: f64| {
            PairSource::new(n, PairStatistics::Thermal)
                .unwrap()
                .herald(eta)
                .unwrap()
                .amp_two
        };
        for k in 1..20 {
            let n = 0.02 * k as f64;
            assert!(amp(n, 0.3) > amp(n - 0.02, 0.3));
            assert!(amp(n, 0.6) < amp(n, 0.3));
        }
    }

    #[test]
    fn sampling_zero_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src = PairSource::new(0.0, PairStatistics::Thermal).unwrap();
        assert!((0..1000).all(|_| src.sample_pair_count(&mut rng) == 0));

        let src = PairSource::new(0.1, PairStatistics::Thermal).unwrap();
        let draws = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut hist = [0u64; 3];
        for _ in 0..draws {
            let n = src.sample_pair_count(&mut rng);
            sum += f64::from(n);
            sum_sq += f64::from(n).powi(2);
            hist[(n as usize).min(2)] += 1;
        }
        let mean = sum / draws as f64;
        let var = sum_sq / draws as f64 - mean * mean;
        let se = (var / draws as f64).sqrt();
        assert!((mean - 0.1).abs() <= 3.0 * se, "mean {mean} ± {se}");

        // P(≥2)·P(0)/P(1)² is 1 + n̄ for thermal and (e^n̄ − 1 − n̄)/n̄² for Poisson.
        let p0 = hist[0] as f64 / draws as f64;
        let p1 = hist[1] as f64 / draws as f64;
        let p2 = hist[2] as f64 / draws as f64;
        let bunching = p2 * p0 / (p1 * p1);
        let rel_se = (1.0 / hist[2] as f64 + 1.0 / hist[0] as f64 + 4.0 / hist[1] as f64).sqrt();
        assert!(
            (bunching / 1.1 - 1.0).abs() <= 3.0 * rel_se,
            "bunching {bunching}"
        );
        let poisson = (0.1f64.exp() - 1.1) / 0.01;
        let factor = bunching / poisson;
        assert!(
            (factor - 2.0).abs() <= 0.13 + 3.0 * rel_se * factor,
            "factor {factor}"
        );
    }

    fn chi_square_pvalue(src: &PairSource, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 1_000_000u64;
        let bins = 6usize;
        let mut hist = vec![0u64; bins];
        for _ in 0..draws {
            let n = src.sample_pair_count(&mut rng) as usize;
            hist[n.min(bins - 1)] += 1;
        }
        let mut expected: Vec<f64> = (0..bins - 1)
            .map(|n| src.pair_probability(n as u32) * draws as f64)
            .collect();
        expected.push(draws as f64 - expected.iter().sum::<f64>());
        // Merge sparse tail bins.
        let mut obs_m = Vec::new();
        let mut exp_m = Vec::new();
        let (mut o_acc, mut e_acc) = (0.0, 0.0);
        for (o, e) in hist.iter().zip(&expected) {
            o_acc += *o as f64;
            e_acc += e;
            if e_acc >= 20.0 {
                obs_m.push(o_acc);
                exp_m.push(e_acc);
                o_acc = 0.0;
                e_acc = 0.0;
            }
        }
        if e_acc > 0.0 {
            *obs_m.last_mut().unwrap() += o_acc;
            *exp_m.last_mut().unwrap() += e_acc;
        }
        let stat: f64 = obs_m
            .iter()
            .zip(&exp_m)
            .map(|(o, e)| (o - e).powi(2) / e)
            .sum();
        let dof = (obs_m.len() - 1) as f64;
        1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
    }

    #[test]
    fn sampled_distributions_match_pmf() {
        for stats in [PairStatistics::Thermal, PairStatistics::Poisson] {
            for n_bar in [0.1, 0.5] {
                let src = PairSource::new(n_bar, stats).unwrap();
                let p = chi_square_pvalue(&src, 42);
                assert!(p > 1e-3, "{stats:?} n̄={n_bar}: p = {p}");
            }
        }
    }

    #[test]
    fn truncated_distribution() {
        let src = PairSource::new(0.04, PairStatistics::Thermal).unwrap();
        let d = src.truncated_pair_distribution().unwrap();
        let z = 1.0 + 0.04 + 0.0016;
        assert_abs_diff_eq!(d[1], 0.04 / z, epsilon = 1e-15);
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }
}
