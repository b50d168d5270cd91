//! The dual-source interference experiment.
//!
//! Two pair sources each herald a signal photon through their idler
//! detectors; the signals meet on a coupler and are detected at outputs 3 and
//! 4. A fourfold event needs all four detectors to fire in the same pulse.
//!
//! Three routes to the fourfold probability live here:
//! - closed forms to first order in n̄ for a 50:50 coupler
//!   ([`p_interfering`], [`p_noninterfering`], [`visibility_multipair`]);
//! - [`fock_coincidences`], which tensors the truncated source states, applies
//!   the coupler in the Fock engine and weights every term by detector click
//!   probabilities;
//! - [`ExactModel`], which sums over pair numbers of each source and is what
//!   [`run_exact`] reports for an arbitrary configuration.

use crate::detector::ThresholdDetector;
use crate::error::{Error, Result};
use crate::fock::{binomial, BeamSplitter, FockOccupation, PureState};
use crate::source::{PairSource, PairStatistics};
use crate::spectral::{self, GaussianFilter, PumpPulse};

fn require_efficiency(name: &'static str, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(name, format!("{eta} must lie in (0, 1]")));
    }
    Ok(())
}

fn require_n_bar(n_bar: f64) -> Result<()> {
    if !(0.0..1.0).contains(&n_bar) {
        return Err(Error::invalid(
            "n_bar",
            format!("{n_bar} must lie in [0, 1)"),
        ));
    }
    Ok(())
}

/// Signal coincidence probability given heralds, for perfectly overlapping
/// photons on a 50:50 coupler, to first order in n̄.
pub fn p_interfering(n_bar: f64, eta_i: f64, eta_s: f64) -> Result<f64> {
    require_n_bar(n_bar)?;
    require_efficiency("eta_i", eta_i)?;
    require_efficiency("eta_s", eta_s)?;
    let gamma = 1.0 - eta_i / 2.0;
    let gamma_s = 1.0 - eta_s / 2.0;
    Ok(eta_s * eta_s * (2.0 * n_bar * gamma * gamma_s) / (1.0 + 2.0 * n_bar * gamma))
}

/// As [`p_interfering`] for fully distinguishable photons.
pub fn p_noninterfering(n_bar: f64, eta_i: f64, eta_s: f64) -> Result<f64> {
    require_n_bar(n_bar)?;
    require_efficiency("eta_i", eta_i)?;
    require_efficiency("eta_s", eta_s)?;
    let gamma = 1.0 - eta_i / 2.0;
    let gamma_s = 1.0 - eta_s / 2.0;
    Ok(eta_s * eta_s * (0.5 + 6.0 * n_bar * gamma * gamma_s / (1.0 + 2.0 * n_bar * gamma)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultipairVisibility {
    /// `(1 + 8n̄γγ′)/(1 + 12n̄γγ′)`.
    pub first_order: f64,
    /// `(P_noint − P_int)/P_noint` from the two closed-form probabilities.
    pub exact_ratio: f64,
}

/// Heralded dip visibility reduced by multi-pair emission.
pub fn visibility_multipair(
    n_bar: f64,
    gamma: f64,
    gamma_prime: f64,
) -> Result<MultipairVisibility> {
    if !(n_bar >= 0.0) || !n_bar.is_finite() {
        return Err(Error::invalid("n_bar", "must be finite and ≥ 0"));
    }
    for (name, g) in [("gamma", gamma), ("gamma_prime", gamma_prime)] {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::invalid(name, format!("{g} must lie in (0, 1]")));
        }
    }
    let x = n_bar * gamma * gamma_prime;
    let h = 2.0 * n_bar * gamma;
    Ok(MultipairVisibility {
        first_order: (1.0 + 8.0 * x) / (1.0 + 12.0 * x),
        exact_ratio: (1.0 + h + 8.0 * x) / (1.0 + h + 12.0 * x),
    })
}

/// Non-interfering fourfold rate `R n̄² η_s² η_i² / 2` (counts/s).
pub fn fourfold_rate(rep_rate: f64, n_bar: f64, eta_s: f64, eta_i: f64) -> f64 {
    rep_rate * n_bar * n_bar * eta_s * eta_s * eta_i * eta_i / 2.0
}

/// Raw `2k`-fold rate from `k` pairs detected before any beamsplitter:
/// `R (n̄ η_s η_i)ᵏ`. Unlike [`fourfold_rate`] there is no splitting factor.
pub fn multifold_rate(
    rep_rate: f64,
    n_bar: f64,
    eta_s: f64,
    eta_i: f64,
    k_pairs: u32,
) -> Result<f64> {
    if k_pairs < 2 {
        return Err(Error::invalid("k_pairs", "need at least two pairs"));
    }
    Ok(rep_rate * (n_bar * eta_s * eta_i).powi(k_pairs as i32))
}

/// The four detectors: idlers `i1`, `i2` herald sources A and B; `s3`, `s4`
/// watch the coupler outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSet {
    pub i1: ThresholdDetector,
    pub i2: ThresholdDetector,
    pub s3: ThresholdDetector,
    pub s4: ThresholdDetector,
}

impl DetectorSet {
    pub fn symmetric(eta_i: f64, eta_s: f64) -> Result<Self> {
        let i = ThresholdDetector::new(eta_i)?;
        let s = ThresholdDetector::new(eta_s)?;
        Ok(DetectorSet {
            i1: i,
            i2: i,
            s3: s,
            s4: s,
        })
    }
}

/// Whether the two signal photons share a mode at the coupler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    Matched,
    Distinguishable,
}

/// Herald and fourfold probabilities per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldedCoincidence {
    /// Both idler detectors fire.
    pub herald: f64,
    /// All four detectors fire.
    pub fourfold: f64,
}

impl HeraldedCoincidence {
    /// Signal coincidence probability given both heralds.
    pub fn conditional(&self) -> Result<f64> {
        if self.herald <= 0.0 {
            return Err(Error::ZeroDenominator(
                "conditional coincidence probability",
            ));
        }
        Ok(self.fourfold / self.herald)
    }
}

/// Brute-force fourfold probability from the full truncated source states.
///
/// Matched photons share the coupler in modes `[s_A, i_A, s_B, i_B]`.
/// Distinguishable photons each get their own copy of the coupler with vacuum
/// in the unused port, and the detector counts photons from both copies.
pub fn fock_coincidences(
    source_a: &PairSource,
    source_b: &PairSource,
    detectors: &DetectorSet,
    coupler: &BeamSplitter,
    overlap: Overlap,
) -> Result<HeraldedCoincidence> {
    let a = source_a.two_mode_state()?;
    let b = source_b.two_mode_state()?;
    let n_max = a.n_max() + b.n_max();
    let pair = a.with_n_max(n_max)?.tensor(&b)?;

    let (state, s3_modes, s4_modes): (PureState, Vec<usize>, Vec<usize>) = match overlap {
        Overlap::Matched => (pair.apply_beamsplitter(0, 2, coupler)?, vec![0], vec![2]),
        Overlap::Distinguishable => {
            // [s_A, i_A, s_B, i_B, v_A, v_B]
            let state = pair
                .tensor(&PureState::vacuum(2, 0))?
                .apply_beamsplitter(0, 4, coupler)?
                .apply_beamsplitter(5, 2, coupler)?;
            (state, vec![0, 5], vec![4, 2])
        }
    };

    let count =
        |occ: &FockOccupation, modes: &[usize]| modes.iter().map(|&m| occ.get(m)).sum::<u32>();
    let herald = |occ: &FockOccupation| {
        detectors.i1.click_probability(occ.get(1)) * detectors.i2.click_probability(occ.get(3))
    };
    let herald_p = state.expectation(herald)?;
    let fourfold_p = state.expectation(|occ| {
        herald(occ)
            * detectors.s3.click_probability(count(occ, &s3_modes))
            * detectors.s4.click_probability(count(occ, &s4_modes))
    })?;
    Ok(HeraldedCoincidence {
        herald: herald_p,
        fourfold: fourfold_p,
    })
}

/// Complete description of one dual-source run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub source_a: PairSource,
    pub source_b: PairSource,
    pub detectors: DetectorSet,
    pub coupler: BeamSplitter,
    pub pump: PumpPulse,
    /// Filter in front of the signal detectors; its σ is the effective
    /// bandwidth used by the spectral overlap.
    pub signal_filter: GaussianFilter,
    pub idler_filter: GaussianFilter,
    /// Relative delay ΔT = δX/c between the two signal photons (s).
    pub delay: f64,
}

impl Default for ExperimentConfig {
    /// 708 nm pump of 1.5 ps transform-limited pulses at 82 MHz, signal at
    /// 583 nm with σ/σ_p = 0.80, idler at 900 nm behind a 2 nm filter,
    /// n̄ = 0.025 thermal, η_i = 0.05, η_s = 0.034, balanced coupler, ΔT = 0.
    fn default() -> Self {
        let nm = 1e-9;
        let pump = PumpPulse::transform_limited(
            spectral::wavelength_to_angular(708.0 * nm),
            1.5e-12,
            8.2e7,
        )
        .expect("valid pump");
        let signal_filter = GaussianFilter::new(
            spectral::wavelength_to_angular(583.0 * nm),
            0.80 * pump.sigma_p(),
        )
        .expect("valid filter");
        let idler_filter =
            GaussianFilter::from_wavelength(900.0 * nm, 2.0 * nm).expect("valid filter");
        let source = PairSource::new(0.025, PairStatistics::Thermal).expect("valid source");
        ExperimentConfig {
            source_a: source,
            source_b: source,
            detectors: DetectorSet::symmetric(0.05, 0.034).expect("valid efficiencies"),
            coupler: BeamSplitter::balanced(),
            pump,
            signal_filter,
            idler_filter,
            delay: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.source_a.statistics() != self.source_b.statistics() {
            return Err(Error::invalid(
                "statistics",
                "both sources must share one statistics kind",
            ));
        }
        if self.delay.is_nan() {
            return Err(Error::invalid("delay", "must not be NaN"));
        }
        Ok(())
    }

    /// Maximum (spectral) visibility for the configured bandwidths.
    pub fn v_max(&self) -> Result<f64> {
        spectral::fwm_visibility(self.signal_filter.sigma(), self.pump.sigma_p())
    }

    /// Fraction of mode overlap at delay `delta_t`: the dip envelope times
    /// the maximum visibility.
    pub fn overlap_weight(&self, delta_t: f64) -> Result<f64> {
        let sigma = self.signal_filter.sigma();
        let sigma_p = self.pump.sigma_p();
        Ok(spectral::overlap_envelope(delta_t, sigma, sigma_p)?
            * spectral::fwm_visibility(sigma, sigma_p)?)
    }
}

/// Output of [`run_exact`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceReport {
    /// Fourfold probability per pulse at the configured delay.
    pub p_fourfold: f64,
    /// `p_fourfold` times the repetition rate (counts/s).
    pub rate: f64,
    /// Fourfold probability per pulse with source A's signal blocked.
    pub blocked_a: f64,
    /// Same with source B's signal blocked.
    pub blocked_b: f64,
    /// `1 − P(0)/P(∞)` from raw fourfold probabilities.
    pub visibility_raw: f64,
    /// Same after subtracting `blocked_a + blocked_b` from both.
    pub visibility_net: f64,
}

/// Probability that both signal detectors fire for `n` photons entering port 1
/// and `m` entering port 2.
fn signal_coincidence(
    n: u32,
    m: u32,
    overlap: Overlap,
    coupler: &BeamSplitter,
    s3: &ThresholdDetector,
    s4: &ThresholdDetector,
) -> f64 {
    let total = n + m;
    let both = |p: u32| s3.click_probability(p) * s4.click_probability(total - p);
    match overlap {
        Overlap::Matched => coupler
            .output_distribution(n, m)
            .iter()
            .enumerate()
            .map(|(p, w)| w * both(p as u32))
            .sum(),
        Overlap::Distinguishable => {
            let (tt, rr) = (coupler.transmittance(), coupler.reflectance());
            let mut acc = 0.0;
            for a in 0..=n {
                let pa = binomial(n, a) * tt.powi(a as i32) * rr.powi((n - a) as i32);
                for b in 0..=m {
                    let pb = binomial(m, b) * rr.powi(b as i32) * tt.powi((m - b) as i32);
                    acc += pa * pb * both(a + b);
                }
            }
            acc
        }
    }
}

/// Pair-number decomposition of the truncated experiment.
///
/// Idler and signal photon numbers are equal within each source, and the
/// detectors are diagonal in photon number, so the fourfold probability is a
/// sum over pair numbers `(n_A, n_B)` of `p_A p_B h₁ h₂ c(n_A, n_B)`.
/// Partially overlapping photons are the mixture `w·matched + (1−w)·distinguishable`.
#[derive(Debug, Clone)]
pub struct ExactModel {
    config: ExperimentConfig,
    herald: f64,
    /// Conditional on both heralds.
    matched: f64,
    distinguishable: f64,
    blocked_a: f64,
    blocked_b: f64,
}

impl ExactModel {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let d = &config.detectors;
        let pa = config.source_a.truncated_pair_distribution()?;
        let pb = config.source_b.truncated_pair_distribution()?;
        let wa: Vec<f64> = pa
            .iter()
            .enumerate()
            .map(|(n, p)| p * d.i1.click_probability(n as u32))
            .collect();
        let wb: Vec<f64> = pb
            .iter()
            .enumerate()
            .map(|(n, p)| p * d.i2.click_probability(n as u32))
            .collect();
        let (ha, hb) = (wa.iter().sum::<f64>(), wb.iter().sum::<f64>());
        let herald = ha * hb;

        // Conditional pair-number weights; with no possible herald fall back
        // to the n̄ → 0 limit of exactly one pair per source.
        let conditional = |w: Vec<f64>, h: f64| {
            if h > 0.0 {
                w.into_iter().map(|x| x / h).collect()
            } else {
                vec![0.0, 1.0]
            }
        };
        let ca: Vec<f64> = conditional(wa, ha);
        let cb: Vec<f64> = conditional(wb, hb);

        let sum_over = |f: &dyn Fn(u32, u32) -> f64| {
            let mut acc = 0.0;
            for (na, x) in ca.iter().enumerate() {
                for (nb, y) in cb.iter().enumerate() {
                    if *x > 0.0 && *y > 0.0 {
                        acc += x * y * f(na as u32, nb as u32);
                    }
                }
            }
            acc
        };
        let c = |n, m, o| signal_coincidence(n, m, o, &config.coupler, &d.s3, &d.s4);
        Ok(ExactModel {
            config: *config,
            herald,
            matched: sum_over(&|n, m| c(n, m, Overlap::Matched)),
            distinguishable: sum_over(&|n, m| c(n, m, Overlap::Distinguishable)),
            blocked_a: sum_over(&|_, m| c(0, m, Overlap::Distinguishable)),
            blocked_b: sum_over(&|n, _| c(n, 0, Overlap::Distinguishable)),
        })
    }

    /// Probability per pulse that both idler detectors fire.
    pub fn herald_probability(&self) -> f64 {
        self.herald
    }

    /// Signal coincidence probability given heralds at delay `delta_t`.
    pub fn conditional_fourfold(&self, delta_t: f64) -> Result<f64> {
        let w = self.config.overlap_weight(delta_t)?;
        Ok(w * self.matched + (1.0 - w) * self.distinguishable)
    }

    /// Fourfold probability per pulse at delay `delta_t`.
    pub fn fourfold(&self, delta_t: f64) -> Result<f64> {
        Ok(self.herald * self.conditional_fourfold(delta_t)?)
    }

    pub fn blocked(&self) -> (f64, f64) {
        (self.herald * self.blocked_a, self.herald * self.blocked_b)
    }

    pub fn report(&self) -> Result<CoincidenceReport> {
        let p = self.fourfold(self.config.delay)?;
        let zero = self.conditional_fourfold(0.0)?;
        let far = self.conditional_fourfold(f64::INFINITY)?;
        if far <= 0.0 {
            return Err(Error::ZeroDenominator("raw visibility"));
        }
        let background = self.blocked_a + self.blocked_b;
        if far - background <= 0.0 {
            return Err(Error::ZeroDenominator("background-subtracted visibility"));
        }
        let (blocked_a, blocked_b) = self.blocked();
        Ok(CoincidenceReport {
            p_fourfold: p,
            rate: p * self.config.pump.rep_rate(),
            blocked_a,
            blocked_b,
            visibility_raw: 1.0 - zero / far,
            visibility_net: 1.0 - (zero - background) / (far - background),
        })
    }
}

/// Exact fourfold probability, blocked-input backgrounds and visibilities for
/// `config`.
pub fn run_exact(config: &ExperimentConfig) -> Result<CoincidenceReport> {
    ExactModel::new(config)?.report()
}
