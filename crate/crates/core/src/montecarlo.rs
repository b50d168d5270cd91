//! Pulse-by-pulse counting simulation of the two-source experiment.
//!
//! Each pulse draws untruncated pair numbers for both sources, heralds with
//! the idler detectors, mixes the signal photons on the coupler and records
//! which detectors fired. The same pulse is also evaluated with each coupler
//! input blocked, which is how the multi-pair background is measured.
//!
//! Partial overlap uses two temporal modes: source A's signal photons define
//! the reference mode and each of source B's signal photons lies in it with
//! probability `w(ΔT)` (the overlap weight of [`ExperimentConfig`]). Photons in
//! the reference mode interfere through the exact Fock-space output
//! distribution; the rest are routed independently.
//!
//! Randomness: batch `k` of a plan with root seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `k`, so batches are
//! independent and the result does not depend on thread scheduling.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::fock::BeamSplitter;

pub const DETECTOR_LABELS: [&str; 4] = ["i1", "i2", "s3", "s4"];

/// Detector index pairs of [`CountRecord::twofold`].
pub const TWOFOLD_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPlan {
    pub config: ExperimentConfig,
    pub pulses: u64,
    pub seed: u64,
    pub batches: u32,
    /// Largest photon number allowed in the interfering mode of one pulse.
    pub max_matched_photons: u32,
}

impl TrialPlan {
    pub const DEFAULT_MAX_MATCHED_PHOTONS: u32 = 24;

    pub fn new(config: ExperimentConfig, pulses: u64, seed: u64) -> Self {
        TrialPlan {
            config,
            pulses,
            seed,
            batches: 1,
            max_matched_photons: Self::DEFAULT_MAX_MATCHED_PHOTONS,
        }
    }

    pub fn with_batches(mut self, batches: u32) -> Self {
        self.batches = batches;
        self
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.config.delay = delay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses == 0 {
            return Err(Error::invalid("pulses", "need at least one pulse"));
        }
        if self.batches == 0 {
            return Err(Error::invalid("batches", "need at least one batch"));
        }
        self.config.validate()
    }

    /// Pulses assigned to batch `k`; the remainder goes to the first batches.
    pub fn batch_pulses(&self, k: u32) -> u64 {
        let b = u64::from(self.batches);
        self.pulses / b + u64::from(u64::from(k) < self.pulses % b)
    }
}

/// Counts accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountRecord {
    pub pulses: u64,
    /// Clicks per detector, ordered as [`DETECTOR_LABELS`].
    pub singles: [u64; 4],
    /// Pairwise coincidences, ordered as [`TWOFOLD_PAIRS`].
    pub twofold: [u64; 6],
    pub fourfold: u64,
    /// Fourfolds with source A's signal blocked before the coupler.
    pub blocked_a_fourfold: u64,
    /// Fourfolds with source B's signal blocked.
    pub blocked_b_fourfold: u64,
}

impl CountRecord {
    pub fn merge(&mut self, other: &CountRecord) {
        self.pulses += other.pulses;
        for (a, b) in self.singles.iter_mut().zip(other.singles) {
            *a += b;
        }
        for (a, b) in self.twofold.iter_mut().zip(other.twofold) {
            *a += b;
        }
        self.fourfold += other.fourfold;
        self.blocked_a_fourfold += other.blocked_a_fourfold;
        self.blocked_b_fourfold += other.blocked_b_fourfold;
    }

    /// Coincidences between detectors `a` and `b` (indices into [`DETECTOR_LABELS`]).
    pub fn twofold_between(&self, a: usize, b: usize) -> Option<u64> {
        let key = (a.min(b), a.max(b));
        TWOFOLD_PAIRS
            .iter()
            .position(|&p| p == key)
            .map(|k| self.twofold[k])
    }

    /// Unheralded signal coincidences `s3 ∧ s4`.
    pub fn signal_twofold(&self) -> u64 {
        self.twofold[5]
    }

    pub fn fourfold_frequency(&self) -> f64 {
        self.fourfold as f64 / self.pulses as f64
    }

    pub fn csv_header() -> String {
        let mut cols = vec!["pulses".to_string()];
        cols.extend(DETECTOR_LABELS.iter().map(|s| s.to_string()));
        cols.extend(
            TWOFOLD_PAIRS
                .iter()
                .map(|&(a, b)| format!("{}_{}", DETECTOR_LABELS[a], DETECTOR_LABELS[b])),
        );
        cols.extend(["fourfold", "blocked_a", "blocked_b"].map(String::from));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.pulses];
        cols.extend(self.singles);
        cols.extend(self.twofold);
        cols.extend([
            self.fourfold,
            self.blocked_a_fourfold,
            self.blocked_b_fourfold,
        ]);
        cols.iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn write_csv<W: Write>(records: &[CountRecord], mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::csv_header())?;
        for r in records {
            writeln!(out, "{}", r.csv_row())?;
        }
        Ok(())
    }
}

/// RNG for batch `batch` of a run seeded with `seed`.
pub fn batch_rng(seed: u64, batch: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(batch));
    rng
}

fn sample_binomial<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> u32 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else if n <= 16 {
        (0..n).filter(|_| rng.random::<f64>() < p).count() as u32
    } else {
        Binomial::new(u64::from(n), p)
            .expect("p in (0, 1)")
            .sample(rng) as u32
    }
}

/// Cached output-port distributions for photons sharing the reference mode.
struct CouplerSampler {
    coupler: BeamSplitter,
    max_photons: u32,
    cumulative: HashMap<(u32, u32), Vec<f64>>,
}

impl CouplerSampler {
    fn new(coupler: BeamSplitter, max_photons: u32) -> Self {
        CouplerSampler {
            coupler,
            max_photons,
            cumulative: HashMap::new(),
        }
    }

    /// Photons leaving output 3 for `|n⟩₁|m⟩₂` in the shared mode.
    fn sample<R: Rng + ?Sized>(&mut self, n: u32, m: u32, rng: &mut R) -> Result<u32> {
        if n + m == 0 {
            return Ok(0);
        }
        if n + m > self.max_photons {
            return Err(Error::TruncationOverflow {
                photons: n + m,
                n_max: self.max_photons,
            });
        }
        let coupler = self.coupler;
        let cdf = self.cumulative.entry((n, m)).or_insert_with(|| {
            let mut acc = 0.0;
            coupler
                .output_distribution(n, m)
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect()
        });
        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
        Ok(cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u32)
    }
}

/// Runs batch `batch` of `plan`.
pub fn simulate_batch(plan: &TrialPlan, batch: u32) -> Result<CountRecord> {
    let cfg = &plan.config;
    let det = &cfg.detectors;
    let w = cfg.overlap_weight(cfg.delay)?;
    let (tt, rr) = (cfg.coupler.transmittance(), cfg.coupler.reflectance());
    let mut sampler = CouplerSampler::new(cfg.coupler, plan.max_matched_photons);
    let mut rng = batch_rng(plan.seed, batch);
    let pulses = plan.batch_pulses(batch);
    let mut rec = CountRecord {
        pulses,
        ..CountRecord::default()
    };

    for _ in 0..pulses {
        let na = cfg.source_a.sample_pair_count(&mut rng);
        let nb = cfg.source_b.sample_pair_count(&mut rng);
        let i1 = det.i1.clicks(na, &mut rng);
        let i2 = det.i2.clicks(nb, &mut rng);

        let kb = sample_binomial(nb, w, &mut rng);
        let matched_3 = sampler.sample(na, kb, &mut rng)?;
        // Port-2 photons outside the shared mode reach output 3 on reflection.
        let free_3 = sample_binomial(nb - kb, rr, &mut rng);
        let n3 = matched_3 + free_3;
        let n4 = na + nb - n3;
        let s3 = det.s3.clicks(n3, &mut rng);
        let s4 = det.s4.clicks(n4, &mut rng);

        let fired = [i1, i2, s3, s4];
        for (k, &f) in fired.iter().enumerate() {
            rec.singles[k] += u64::from(f);
        }
        for (k, &(a, b)) in TWOFOLD_PAIRS.iter().enumerate() {
            rec.twofold[k] += u64::from(fired[a] && fired[b]);
        }
        if !(i1 && i2) {
            continue;
        }
        rec.fourfold += u64::from(s3 && s4);

        let b3 = sample_binomial(nb, rr, &mut rng);
        let blocked_a = det.s3.clicks(b3, &mut rng) && det.s4.clicks(nb - b3, &mut rng);
        rec.blocked_a_fourfold += u64::from(blocked_a);

        let a3 = sample_binomial(na, tt, &mut rng);
        let blocked_b = det.s3.clicks(a3, &mut rng) && det.s4.clicks(na - a3, &mut rng);
        rec.blocked_b_fourfold += u64::from(blocked_b);
    }
    Ok(rec)
}

/// Runs every batch of `plan` (in parallel) and merges the counts.
pub fn simulate(plan: &TrialPlan) -> Result<CountRecord> {
    plan.validate()?;
    let records = (0..plan.batches)
        .into_par_iter()
        .map(|k| simulate_batch(plan, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(records.iter().fold(CountRecord::default(), |mut acc, r| {
        acc.merge(r);
        acc
    }))
}

/// Visibility with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityEstimate {
    /// From raw fourfold counts.
    pub raw: Estimate,
    /// After subtracting blocked-input fourfolds.
    pub net: Estimate,
    /// From unheralded `s3 ∧ s4` coincidences, when any were recorded.
    pub unheralded: Option<Estimate>,
}

/// `1 − (x0/n0)/(x1/n1)` with Poisson variances `v0`, `v1` on the counts.
fn ratio_visibility(x0: f64, v0: f64, n0: f64, x1: f64, v1: f64, n1: f64) -> Estimate {
    let f0 = x0 / n0;
    let f1 = x1 / n1;
    let ratio = f0 / f1;
    let var = v0 / (n0 * n0) / (f1 * f1) + ratio * ratio * v1 / (n1 * n1) / (f1 * f1);
    Estimate {
        value: 1.0 - ratio,
        std_error: var.sqrt(),
    }
}

/// Dip visibilities from a record at zero delay and one far outside the dip.
///
/// Standard errors treat every count as independent Poisson; the correlation
/// between fourfold and blocked counts taken on the same pulses is ignored.
pub fn estimate_visibility(
    at_zero: &CountRecord,
    at_far: &CountRecord,
) -> Result<VisibilityEstimate> {
    if at_zero.pulses == 0 || at_far.pulses == 0 {
        return Err(Error::ZeroDenominator("visibility (empty record)"));
    }
    if at_far.fourfold == 0 {
        return Err(Error::ZeroDenominator("raw visibility"));
    }
    let (n0, n1) = (at_zero.pulses as f64, at_far.pulses as f64);
    let c0 = at_zero.fourfold as f64;
    let c1 = at_far.fourfold as f64;
    let raw = ratio_visibility(c0, c0, n0, c1, c1, n1);

    let b0 = (at_zero.blocked_a_fourfold + at_zero.blocked_b_fourfold) as f64;
    let b1 = (at_far.blocked_a_fourfold + at_far.blocked_b_fourfold) as f64;
    if c1 - b1 <= 0.0 {
        return Err(Error::ZeroDenominator("background-subtracted visibility"));
    }
    let net = ratio_visibility(c0 - b0, c0 + b0, n0, c1 - b1, c1 + b1, n1);

    let unheralded = (at_far.signal_twofold() > 0).then(|| {
        let u0 = at_zero.signal_twofold() as f64;
        let u1 = at_far.signal_twofold() as f64;
        ratio_visibility(u0, u0, n0, u1, u1, n1)
    });
    Ok(VisibilityEstimate {
        raw,
        net,
        unheralded,
    })
}
