//! Run configuration: a TOML file with one section per component, plus
//! `section.key=value` overrides.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hom_core::experiment::DetectorSet;
use hom_core::spectral::{wavelength_to_angular, GaussianFilter, PumpPulse};
use hom_core::{BeamSplitter, ExperimentConfig, PairSource, PairStatistics, ThresholdDetector};
use serde::Deserialize;
use toml::{Table, Value};

const NM: f64 = 1e-9;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceSection,
    pub detectors: DetectorSection,
    pub coupler: CouplerSection,
    pub pump: PumpSection,
    pub filters: FilterSection,
    pub scan: ScanSection,
    pub run: RunSection,
    pub rates: RatesSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Thermal,
    /// Same as thermal.
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub n_bar: f64,
    /// Mean pairs per pulse of source B; defaults to `n_bar`.
    pub n_bar_b: Option<f64>,
    pub statistics: Statistics,
    pub truncation: u32,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            n_bar: 0.025,
            n_bar_b: None,
            statistics: Statistics::Thermal,
            truncation: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub eta_i: f64,
    pub eta_s: f64,
    pub eta_i1: Option<f64>,
    pub eta_i2: Option<f64>,
    pub eta_s3: Option<f64>,
    pub eta_s4: Option<f64>,
    pub dark_per_pulse: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection {
            eta_i: 0.05,
            eta_s: 0.034,
            eta_i1: None,
            eta_i2: None,
            eta_s3: None,
            eta_s4: None,
            dark_per_pulse: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplerSection {
    /// Intensity transmittance `t²`.
    pub transmittance: f64,
}

impl Default for CouplerSection {
    fn default() -> Self {
        CouplerSection { transmittance: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpSection {
    pub center_nm: f64,
    /// Transform-limited FWHM duration; ignored when `sigma_p` is set.
    pub duration_s: f64,
    /// Spectral amplitude width (rad/s).
    pub sigma_p: Option<f64>,
    pub rep_rate: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        PumpSection {
            center_nm: 708.0,
            duration_s: 1.5e-12,
            sigma_p: None,
            rep_rate: 8.2e7,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub signal_center_nm: f64,
    /// Signal σ in units of the pump σ_p; ignored when `signal_sigma` is set.
    pub sigma_ratio: f64,
    /// Signal σ (rad/s).
    pub signal_sigma: Option<f64>,
    pub idler_center_nm: f64,
    pub idler_fwhm_nm: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            signal_center_nm: 583.0,
            sigma_ratio: 0.80,
            signal_sigma: None,
            idler_center_nm: 900.0,
            idler_fwhm_nm: 2.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Delay for single-point commands (s).
    pub delay: f64,
    pub delay_min: f64,
    pub delay_max: f64,
    pub delay_steps: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            delay: 0.0,
            delay_min: -3e-12,
            delay_max: 3e-12,
            delay_steps: 25,
        }
    }
}

impl ScanSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.delay_steps < 2 {
            bail!("scan.delay_steps must be at least 2");
        }
        if !(self.delay_max > self.delay_min) {
            bail!("scan.delay_max must exceed scan.delay_min");
        }
        let n = self.delay_steps - 1;
        Ok((0..=n)
            .map(|k| self.delay_min + (self.delay_max - self.delay_min) * k as f64 / n as f64)
            .collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub pulses: u64,
    pub seed: u64,
    pub batches: u32,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            pulses: 1_000_000,
            seed: 1,
            batches: 8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    pub sixfold_rep_rate: f64,
    pub sixfold_n_bar: f64,
    /// Efficiencies (applied to both channels) of the six-fold projections.
    pub sixfold_eta: Vec<f64>,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            sixfold_rep_rate: 1.64e8,
            sixfold_n_bar: 0.1,
            sixfold_eta: vec![0.1, 0.2],
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()))
}

fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("--set `{assignment}`: expected KEY=VALUE"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("--set `{assignment}`: malformed key");
    }
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("--set `{assignment}`: `{p}` is not a section"))?;
    }
    node.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => {
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
            }
            None => String::new(),
        };
        let origin = path.map_or_else(|| "configuration".to_string(), |p| p.display().to_string());
        if overrides.is_empty() {
            return toml::from_str(&text).map_err(|e| anyhow!("{origin}: {e}"));
        }
        let mut table: Table = toml::from_str(&text).map_err(|e| anyhow!("{origin}: {e}"))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Value::Table(table)
            .try_into()
            .map_err(|e| anyhow!("{origin} with --set overrides: {e}"))
    }

    pub fn statistics(&self) -> PairStatistics {
        match self.source.statistics {
            Statistics::Thermal | Statistics::Gaussian => PairStatistics::Thermal,
            Statistics::Poisson => PairStatistics::Poisson,
        }
    }

    pub fn pump(&self) -> Result<PumpPulse> {
        let p = &self.pump;
        let center = wavelength_to_angular(p.center_nm * NM);
        let pulse = match p.sigma_p {
            Some(s) => PumpPulse::new(center, s, p.rep_rate),
            None => PumpPulse::transform_limited(center, p.duration_s, p.rep_rate),
        };
        pulse.context("invalid [pump] section")
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let pump = self.pump()?;
        let f = &self.filters;
        let sigma = f.signal_sigma.unwrap_or(f.sigma_ratio * pump.sigma_p());
        let signal_filter =
            GaussianFilter::new(wavelength_to_angular(f.signal_center_nm * NM), sigma)
                .context("invalid signal filter (filters.sigma_ratio / filters.signal_sigma)")?;
        let idler_filter =
            GaussianFilter::from_wavelength(f.idler_center_nm * NM, f.idler_fwhm_nm * NM)
                .context("invalid idler filter")?;

        let s = &self.source;
        let source = |n_bar: f64| -> Result<PairSource> {
            PairSource::new(n_bar, self.statistics())
                .and_then(|src| src.with_truncation(s.truncation))
                .context("invalid [source] section")
        };
        let d = &self.detectors;
        let det = |eta: f64, name: &str| {
            ThresholdDetector::with_dark_counts(eta, d.dark_per_pulse)
                .with_context(|| format!("detector {name}"))
        };
        let detectors = DetectorSet {
            i1: det(d.eta_i1.unwrap_or(d.eta_i), "i1")?,
            i2: det(d.eta_i2.unwrap_or(d.eta_i), "i2")?,
            s3: det(d.eta_s3.unwrap_or(d.eta_s), "s3")?,
            s4: det(d.eta_s4.unwrap_or(d.eta_s), "s4")?,
        };
        let config = ExperimentConfig {
            source_a: source(s.n_bar)?,
            source_b: source(s.n_bar_b.unwrap_or(s.n_bar))?,
            detectors,
            coupler: BeamSplitter::from_transmittance(self.coupler.transmittance)
                .context("invalid [coupler]")?,
            pump,
            signal_filter,
            idler_filter,
            delay: self.scan.delay,
        };
        config.validate()?;
        Ok(config)
    }
}
