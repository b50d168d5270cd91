//! Gaussian pump and filter model for the two-photon overlap.
//!
//! Bandwidths follow the amplitude convention `f(ω) ∝ exp(−(ω₀ − ω)²/σ²)`,
//! so the intensity FWHM in angular frequency is `σ·√(2 ln 2)`.

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::BeamSplitter;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Time-bandwidth product of a transform-limited Gaussian pulse (intensity FWHMs).
pub const GAUSSIAN_TIME_BANDWIDTH: f64 = 0.441;

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::invalid(
            name,
            format!("{value} must be positive and finite"),
        ));
    }
    Ok(())
}

/// Intensity FWHM (Hz) of an amplitude-Gaussian with parameter `sigma` (rad/s).
pub fn sigma_to_fwhm_hz(sigma: f64) -> f64 {
    sigma * (2.0 * LN_2).sqrt() / (2.0 * PI)
}

/// Converts a filter quoted as centre wavelength and intensity FWHM (both in
/// metres) to the amplitude bandwidth σ in rad/s.
pub fn wavelength_filter_to_sigma(center_wavelength: f64, fwhm_wavelength: f64) -> Result<f64> {
    require_positive("center_wavelength", center_wavelength)?;
    if fwhm_wavelength < 0.0 || !fwhm_wavelength.is_finite() {
        return Err(Error::invalid(
            "fwhm_wavelength",
            "must be non-negative and finite",
        ));
    }
    if fwhm_wavelength >= center_wavelength {
        return Err(Error::invalid(
            "fwhm_wavelength",
            "filter width must be smaller than its centre wavelength",
        ));
    }
    let delta_nu = SPEED_OF_LIGHT * fwhm_wavelength / (center_wavelength * center_wavelength);
    Ok(2.0 * PI * delta_nu / (2.0 * LN_2).sqrt())
}

pub fn wavelength_to_angular(wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFilter {
    center: f64,
    sigma: f64,
}

impl GaussianFilter {
    pub fn new(center: f64, sigma: f64) -> Result<Self> {
        require_positive("center", center)?;
        require_positive("sigma", sigma)?;
        Ok(GaussianFilter { center, sigma })
    }

    /// Filter from centre wavelength and intensity FWHM, both in metres.
    pub fn from_wavelength(center_wavelength: f64, fwhm_wavelength: f64) -> Result<Self> {
        let sigma = wavelength_filter_to_sigma(center_wavelength, fwhm_wavelength)?;
        Self::new(wavelength_to_angular(center_wavelength), sigma)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Unnormalized amplitude transmission at angular frequency `omega`.
    pub fn amplitude(&self, omega: f64) -> f64 {
        let x = (omega - self.center) / self.sigma;
        (-x * x).exp()
    }
}

/// Pulsed pump: spectral amplitude width and repetition rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpPulse {
    center: f64,
    sigma_p: f64,
    rep_rate: f64,
    duration: Option<f64>,
}

impl PumpPulse {
    pub fn new(center: f64, sigma_p: f64, rep_rate: f64) -> Result<Self> {
        require_positive("center", center)?;
        require_positive("sigma_p", sigma_p)?;
        require_positive("rep_rate", rep_rate)?;
        Ok(PumpPulse {
            center,
            sigma_p,
            rep_rate,
            duration: None,
        })
    }

    /// Transform-limited Gaussian pulse of the given intensity FWHM duration.
    pub fn transform_limited(center: f64, duration: f64, rep_rate: f64) -> Result<Self> {
        require_positive("duration", duration)?;
        let fwhm_hz = GAUSSIAN_TIME_BANDWIDTH / duration;
        let sigma_p = 2.0 * PI * fwhm_hz / (2.0 * LN_2).sqrt();
        Self::new(center, sigma_p, rep_rate)?.with_duration(duration)
    }

    /// Attaches a pulse duration; it must be transform limited to within 1%.
    pub fn with_duration(mut self, duration: f64) -> Result<Self> {
        require_positive("duration", duration)?;
        let product = duration * sigma_to_fwhm_hz(self.sigma_p);
        if (product / GAUSSIAN_TIME_BANDWIDTH - 1.0).abs() > 0.01 {
            return Err(Error::invalid(
                "duration",
                format!("time-bandwidth product {product:.4} is not transform limited"),
            ));
        }
        self.duration = Some(duration);
        Ok(self)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }

    pub fn rep_rate(&self) -> f64 {
        self.rep_rate
    }

    pub fn duration(&self) -> Option<f64> {
        self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthTriple {
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub lambda_i: f64,
}

impl WavelengthTriple {
    pub fn new(lambda_p: f64, lambda_s: f64, lambda_i: f64) -> Result<Self> {
        require_positive("lambda_p", lambda_p)?;
        require_positive("lambda_s", lambda_s)?;
        require_positive("lambda_i", lambda_i)?;
        Ok(WavelengthTriple {
            lambda_p,
            lambda_s,
            lambda_i,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    pub passed: bool,
    pub mismatch: f64,
}

/// Relative mismatch of `2ω_p = ω_s + ω_i` for a degenerate-pump process.
pub fn check_energy_conservation(triple: &WavelengthTriple, rel_tol: f64) -> EnergyCheck {
    let pump = 2.0 / triple.lambda_p;
    let mismatch = (pump - 1.0 / triple.lambda_s - 1.0 / triple.lambda_i).abs() / pump;
    EnergyCheck {
        passed: mismatch <= rel_tol,
        mismatch,
    }
}

/// Maximum heralded-photon interference visibility for four-wave mixing,
/// where two pump photons are absorbed per pair.
pub fn fwm_visibility(sigma: f64, sigma_p: f64) -> Result<f64> {
    require_positive("sigma", sigma)?;
    require_positive("sigma_p", sigma_p)?;
    let u = (sigma / sigma_p).powi(2);
    Ok((1.0 + u).sqrt() / (1.0 + u / 2.0))
}

/// Same quantity for parametric down-conversion (one pump photon per pair).
pub fn pdc_visibility(sigma: f64, sigma_p: f64) -> Result<f64> {
    require_positive("sigma", sigma)?;
    require_positive("sigma_p", sigma_p)?;
    let u = (sigma / sigma_p).powi(2);
    Ok((1.0 + 2.0 * u).sqrt() / (1.0 + u))
}

/// Bandwidth ratio σ/σ_p at which [`fwm_visibility`] equals `visibility`.
pub fn fwm_ratio_for_visibility(visibility: f64) -> Result<f64> {
    if !(visibility > 0.0 && visibility < 1.0) {
        return Err(Error::invalid(
            "visibility",
            "must lie strictly inside (0, 1)",
        ));
    }
    let v = |ratio: f64| {
        let u = ratio * ratio;
        (1.0 + u).sqrt() / (1.0 + u / 2.0)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while v(hi) > visibility {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::invalid("visibility", "not reachable"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v(mid) > visibility {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gaussian overlap factor `exp(−ΔT²σ²/(2(1+σ²/2σ_p²)))` of the dip.
pub fn overlap_envelope(delta_t: f64, sigma: f64, sigma_p: f64) -> Result<f64> {
    require_positive("sigma", sigma)?;
    require_positive("sigma_p", sigma_p)?;
    if delta_t.is_nan() {
        return Err(Error::invalid("delta_t", "must not be NaN"));
    }
    if delta_t.is_infinite() {
        return Ok(0.0);
    }
    let stretch = 1.0 + sigma * sigma / (2.0 * sigma_p * sigma_p);
    Ok((-(delta_t * delta_t) * sigma * sigma / (2.0 * stretch)).exp())
}

/// FWHM in ΔT of [`overlap_envelope`].
pub fn dip_envelope_fwhm(sigma: f64, sigma_p: f64) -> Result<f64> {
    require_positive("sigma", sigma)?;
    require_positive("sigma_p", sigma_p)?;
    let stretch = 1.0 + sigma * sigma / (2.0 * sigma_p * sigma_p);
    Ok(2.0 * (2.0 * LN_2 * stretch).sqrt() / sigma)
}

/// Relative fourfold probability versus delay, with the normalization factor
/// set to 1: `n̄²(r⁴ + t⁴ − 2V r²t² e^{…})`.
pub fn dip_profile(
    delta_t: f64,
    sigma: f64,
    sigma_p: f64,
    bs: &BeamSplitter,
    n_bar: f64,
) -> Result<f64> {
    if !(n_bar >= 0.0) {
        return Err(Error::invalid("n_bar", "must be non-negative"));
    }
    let v = fwm_visibility(sigma, sigma_p)?;
    let g = overlap_envelope(delta_t, sigma, sigma_p)?;
    let (t2, r2) = (bs.transmittance(), bs.reflectance());
    Ok(n_bar * n_bar * (r2 * r2 + t2 * t2 - 2.0 * v * r2 * t2 * g))
}

/// Pair-generation process: how many pump photons feed each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairProcess {
    FourWaveMixing,
    DownConversion,
}

/// Numerical route to the heralded-photon overlap.
///
/// Samples the joint spectral amplitude `f_s(ω_s) f_i(ω_i) g(ω_s + ω_i)` on a
/// uniform grid, where `g` is the pump amplitude for down-conversion and its
/// self-convolution for four-wave mixing (the energy delta is integrated out
/// over one pump frequency). The visibility is the purity of the reduced
/// signal spectrum; delayed overlaps weight `|ρ(ω,ω′)|²` by `cos((ω−ω′)τ)`.
#[derive(Debug, Clone)]
pub struct OverlapQuadrature {
    sigma: f64,
    /// Signal grid in units of σ.
    grid: Vec<f64>,
    rho: DMatrix<f64>,
    error_estimate: f64,
}

impl OverlapQuadrature {
    pub const DEFAULT_TOL: f64 = 1e-6;
    const HALF_SPAN: f64 = 6.0;
    const MAX_POINTS: usize = 1024;

    pub fn new(sigma: f64, sigma_p: f64, process: PairProcess) -> Result<Self> {
        Self::with_tolerance(sigma, sigma_p, process, Self::DEFAULT_TOL)
    }

    pub fn with_tolerance(
        sigma: f64,
        sigma_p: f64,
        process: PairProcess,
        tol: f64,
    ) -> Result<Self> {
        require_positive("sigma", sigma)?;
        require_positive("sigma_p", sigma_p)?;
        let u = (sigma / sigma_p).powi(2);
        // Pump factor exponent coefficient on (x + y)² in units of σ.
        let pump_coeff = match process {
            PairProcess::FourWaveMixing => u / 2.0,
            PairProcess::DownConversion => u,
        };

        let mut points = 32;
        let mut previous: Option<f64> = None;
        let mut error_estimate = f64::INFINITY;
        loop {
            let (grid, rho) = Self::reduced_density(points, pump_coeff);
            let purity = purity_of(&rho);
            if let Some(prev) = previous {
                error_estimate = (purity - prev).abs();
                if error_estimate <= tol && points >= 64 {
                    return Ok(OverlapQuadrature {
                        sigma,
                        grid,
                        rho,
                        error_estimate,
                    });
                }
            }
            if points >= Self::MAX_POINTS {
                return Err(Error::QuadratureNotConverged { error_estimate });
            }
            previous = Some(purity);
            points *= 2;
        }
    }

    fn reduced_density(points: usize, pump_coeff: f64) -> (Vec<f64>, DMatrix<f64>) {
        let h = 2.0 * Self::HALF_SPAN / points as f64;
        let grid: Vec<f64> = (0..points)
            .map(|k| -Self::HALF_SPAN + (k as f64 + 0.5) * h)
            .collect();
        let phi = DMatrix::from_fn(points, points, |s, i| {
            let (x, y) = (grid[s], grid[i]);
            (-x * x - y * y - pump_coeff * (x + y) * (x + y)).exp()
        });
        let rho = &phi * phi.transpose();
        (grid, rho)
    }

    /// Purity of the heralded signal photon, equal to the maximum visibility.
    pub fn visibility(&self) -> f64 {
        purity_of(&self.rho)
    }

    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    /// Normalized overlap at relative delay `delta_t` (s); 1 at zero delay.
    pub fn relative_overlap(&self, delta_t: f64) -> f64 {
        let n = self.grid.len();
        let scale = self.sigma * delta_t;
        let mut total = 0.0;
        let mut at_zero = 0.0;
        for a in 0..n {
            for b in 0..n {
                let w = self.rho[(a, b)] * self.rho[(a, b)];
                at_zero += w;
                total += w * ((self.grid[a] - self.grid[b]) * scale).cos();
            }
        }
        total / at_zero
    }

    /// Full width at half maximum of [`Self::relative_overlap`] in delay.
    pub fn overlap_fwhm(&self) -> f64 {
        let mut hi = 1.0 / self.sigma;
        while self.relative_overlap(hi) > 0.5 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.relative_overlap(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo + hi
    }
}

fn purity_of(rho: &DMatrix<f64>) -> f64 {
    let trace = rho.trace();
    rho.norm_squared() / (trace * trace)
}

/// Four-wave-mixing visibility from numerical integration of the joint
/// spectral amplitude, independent of the closed form.
pub fn visibility_by_quadrature(sigma: f64, sigma_p: f64) -> Result<f64> {
    Ok(OverlapQuadrature::new(sigma, sigma_p, PairProcess::FourWaveMixing)?.visibility())
}
