//! Least-squares fitting of coincidence dips.
//!
//! The model for counts at delay `ΔT` behind a coupler with intensity
//! reflectance `R = r²` and transmittance `T = t²` is
//!
//! ```text
//! B · (R² + T² − 2 V R T · exp(−(ΔT − ΔT₀)² / (2 σ²)))
//! ```
//!
//! with baseline amplitude `B`, visibility `V`, width `σ` and centre `ΔT₀` all
//! floated. [`fit_dip`] minimises the weighted squared residuals with a
//! Levenberg–Marquardt iteration and an analytic Jacobian.

use std::io::{self, Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fock::BeamSplitter;

/// Upper end of the accepted visibility range; values above 1 up to this are
/// attributed to noise.
pub const VISIBILITY_SOFT_MAX: f64 = 1.05;

pub const MAX_ITERATIONS: usize = 200;

const REL_TOL: f64 = 1e-9;

const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipSample {
    /// Delay in seconds.
    pub delay: f64,
    pub counts: f64,
    pub error: Option<f64>,
}

/// Coincidence counts against delay, sorted by strictly increasing delay.
#[derive(Debug, Clone, PartialEq)]
pub struct DipData {
    samples: Vec<DipSample>,
}

impl DipData {
    pub fn new(samples: Vec<DipSample>) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::DegenerateData(format!(
                "{} samples, need at least {MIN_SAMPLES}",
                samples.len()
            )));
        }
        for (k, s) in samples.iter().enumerate() {
            if !s.delay.is_finite() {
                return Err(Error::Csv {
                    row: k + 1,
                    message: "delay is not finite".into(),
                });
            }
            if !(s.counts >= 0.0) || !s.counts.is_finite() {
                return Err(Error::Csv {
                    row: k + 1,
                    message: format!("counts {} must be finite and ≥ 0", s.counts),
                });
            }
            if let Some(e) = s.error {
                if !(e > 0.0) || !e.is_finite() {
                    return Err(Error::Csv {
                        row: k + 1,
                        message: format!("error bar {e} must be positive"),
                    });
                }
            }
        }
        if samples.windows(2).any(|w| w[1].delay <= w[0].delay) {
            if samples.iter().all(|s| s.delay == samples[0].delay) {
                return Err(Error::DegenerateData("all delays are equal".into()));
            }
            return Err(Error::DegenerateData(
                "delays must be strictly increasing".into(),
            ));
        }
        Ok(DipData { samples })
    }

    pub fn from_counts(delays: &[f64], counts: &[f64]) -> Result<Self> {
        if delays.len() != counts.len() {
            return Err(Error::DegenerateData(format!(
                "{} delays but {} counts",
                delays.len(),
                counts.len()
            )));
        }
        Self::new(
            delays
                .iter()
                .zip(counts)
                .map(|(&delay, &counts)| DipSample {
                    delay,
                    counts,
                    error: None,
                })
                .collect(),
        )
    }

    /// Reads `delay_s,counts[,error]` rows. A header line is skipped when its
    /// first field is not a number; blank lines and `#` comments are ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut samples = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let row = k + 1;
            let record = record.map_err(|e| Error::Csv {
                row,
                message: e.to_string(),
            })?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            if k == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            if !(2..=3).contains(&record.len()) {
                return Err(Error::Csv {
                    row,
                    message: format!("expected 2 or 3 fields, found {}", record.len()),
                });
            }
            let field = |i: usize, name: &str| -> Result<f64> {
                record[i].parse::<f64>().map_err(|_| Error::Csv {
                    row,
                    message: format!("{name} `{}` is not a number", &record[i]),
                })
            };
            let error = if record.len() == 3 && !record[2].is_empty() {
                Some(field(2, "error")?)
            } else {
                None
            };
            samples.push(DipSample {
                delay: field(0, "delay")?,
                counts: field(1, "counts")?,
                error,
            });
        }
        Self::new(samples)
    }

    pub fn samples(&self) -> &[DipSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Parameters of the dip model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipModel {
    pub baseline: f64,
    pub visibility: f64,
    /// Gaussian width σ of the dip (s).
    pub width: f64,
    pub center: f64,
}

impl DipModel {
    pub fn evaluate(&self, delay: f64, coupler: &BeamSplitter) -> f64 {
        let (rr, tt) = (coupler.reflectance(), coupler.transmittance());
        let x = (delay - self.center) / self.width;
        self.baseline * (rr * rr + tt * tt - 2.0 * self.visibility * rr * tt * (-0.5 * x * x).exp())
    }

    /// Noiseless samples of the model at `delays`.
    pub fn generate(&self, delays: &[f64], coupler: &BeamSplitter) -> Result<DipData> {
        let counts: Vec<f64> = delays.iter().map(|&d| self.evaluate(d, coupler)).collect();
        DipData::from_counts(delays, &counts)
    }

    pub fn fwhm(&self) -> f64 {
        2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipFitResult {
    pub model: DipModel,
    /// Standard errors in the order baseline, visibility, width, center.
    pub std_errors: [f64; 4],
    /// `√χ²` of the weighted residuals.
    pub residual_norm: f64,
    pub degrees_of_freedom: usize,
    pub iterations: usize,
}

impl DipFitResult {
    pub fn visibility(&self) -> f64 {
        self.model.visibility
    }

    pub fn visibility_error(&self) -> f64 {
        self.std_errors[1]
    }

    /// Whether the visibility lies in `[0, VISIBILITY_SOFT_MAX]`.
    pub fn visibility_in_range(&self) -> bool {
        (0.0..=VISIBILITY_SOFT_MAX).contains(&self.model.visibility)
    }

    pub fn reduced_chi_square(&self) -> f64 {
        self.residual_norm.powi(2) / self.degrees_of_freedom.max(1) as f64
    }

    pub fn csv_header() -> &'static str {
        "visibility,visibility_err,width_s,width_err_s,center_s,center_err_s,baseline,baseline_err,fwhm_s,residual_norm,dof,iterations,in_range"
    }

    pub fn csv_row(&self) -> String {
        let m = &self.model;
        let e = &self.std_errors;
        format!(
            "{:.9e},{:.6e},{:.9e},{:.6e},{:.9e},{:.6e},{:.9e},{:.6e},{:.9e},{:.6e},{},{},{}",
            m.visibility,
            e[1],
            m.width,
            e[2],
            m.center,
            e[3],
            m.baseline,
            e[0],
            m.fwhm(),
            self.residual_norm,
            self.degrees_of_freedom,
            self.iterations,
            self.visibility_in_range()
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::csv_header())?;
        writeln!(out, "{}", self.csv_row())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub delay: f64,
    pub counts: f64,
    pub model: f64,
    /// `(counts − model)/σ` with the weight used by the fit.
    pub normalized: f64,
}

fn sample_sigma(s: &DipSample) -> f64 {
    s.error.unwrap_or_else(|| s.counts.max(1.0).sqrt())
}

pub fn residuals(data: &DipData, fit: &DipFitResult, coupler: &BeamSplitter) -> Vec<Residual> {
    data.samples
        .iter()
        .map(|s| {
            let model = fit.model.evaluate(s.delay, coupler);
            Residual {
                delay: s.delay,
                counts: s.counts,
                model,
                normalized: (s.counts - model) / sample_sigma(s),
            }
        })
        .collect()
}

pub fn write_residuals_csv<W: Write>(rows: &[Residual], mut out: W) -> io::Result<()> {
    writeln!(out, "delay_s,counts,model,normalized_residual")?;
    for r in rows {
        writeln!(
            out,
            "{:.9e},{:.9e},{:.9e},{:.6e}",
            r.delay, r.counts, r.model, r.normalized
        )?;
    }
    Ok(())
}

/// `observed_depth · (R² + T²)/(2RT)`: the visibility a balanced coupler
/// would show given the dip depth measured through `coupler`.
pub fn coupler_corrected_visibility(observed_depth: f64, coupler: &BeamSplitter) -> Result<f64> {
    if !(0.0..=1.0).contains(&observed_depth) {
        return Err(Error::invalid(
            "observed_depth",
            format!("{observed_depth} must lie in [0, 1]"),
        ));
    }
    let (rr, tt) = (coupler.reflectance(), coupler.transmittance());
    if rr * tt == 0.0 {
        return Err(Error::ZeroDenominator("coupler correction (R·T = 0)"));
    }
    let v = observed_depth * (rr * rr + tt * tt) / (2.0 * rr * tt);
    if v > VISIBILITY_SOFT_MAX {
        return Err(Error::invalid(
            "observed_depth",
            format!("corrected visibility {v:.4} exceeds {VISIBILITY_SOFT_MAX}; depth inconsistent with coupler"),
        ));
    }
    Ok(v)
}

/// Problem in scaled coordinates: `x = (ΔT − offset)/scale`, baseline in
/// units of `b_scale`.
struct Scaled {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    a: f64,
    c: f64,
}

impl Scaled {
    /// Model values and Jacobian at `p = [B, V, s, x0]`.
    fn eval(&self, p: &[f64; 4]) -> (DVector<f64>, DMatrix<f64>) {
        let [b, v, s, x0] = *p;
        let n = self.x.len();
        let mut f = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, 4);
        for (i, &x) in self.x.iter().enumerate() {
            let d = x - x0;
            let g = (-0.5 * d * d / (s * s)).exp();
            f[i] = b * (self.a - 2.0 * v * self.c * g);
            let k = -2.0 * b * v * self.c * g;
            j[(i, 0)] = self.a - 2.0 * v * self.c * g;
            j[(i, 1)] = -2.0 * b * self.c * g;
            j[(i, 2)] = k * d * d / (s * s * s);
            j[(i, 3)] = k * d / (s * s);
        }
        (f, j)
    }

    fn chi_square(&self, f: &DVector<f64>) -> f64 {
        self.y
            .iter()
            .zip(f.iter())
            .zip(&self.w)
            .map(|((y, f), w)| w * (y - f).powi(2))
            .sum()
    }

    /// `JᵀWJ` and `JᵀW(y − f)`.
    fn normal_equations(&self, f: &DVector<f64>, j: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let mut jtj = DMatrix::zeros(4, 4);
        let mut jtr = DVector::zeros(4);
        for i in 0..self.x.len() {
            let r = self.y[i] - f[i];
            for a in 0..4 {
                jtr[a] += self.w[i] * j[(i, a)] * r;
                for b in 0..4 {
                    jtj[(a, b)] += self.w[i] * j[(i, a)] * j[(i, b)];
                }
            }
        }
        (jtj, jtr)
    }
}

fn initial_guess(data: &DipData, a: f64, c: f64) -> Result<[f64; 4]> {
    let s = &data.samples;
    let n = s.len();
    let edge = (n / 10).max(1);
    let outer: Vec<f64> = s[..edge]
        .iter()
        .chain(&s[n - edge..])
        .map(|p| p.counts)
        .collect();
    let level = outer.iter().sum::<f64>() / outer.len() as f64;
    if !(level > 0.0) {
        return Err(Error::DegenerateData("baseline counts are zero".into()));
    }
    let (imin, min) =
        s.iter()
            .enumerate()
            .map(|(i, p)| (i, p.counts))
            .fold(
                (0, f64::INFINITY),
                |acc, (i, c)| if c < acc.1 { (i, c) } else { acc },
            );
    let depth = (1.0 - min / level).clamp(0.0, 1.0);
    let visibility = (depth * a / (2.0 * c)).clamp(0.05, VISIBILITY_SOFT_MAX);

    let span = s[n - 1].delay - s[0].delay;
    let half = level - 0.5 * (level - min);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imin;
        for i in range {
            if s[i].counts >= half {
                let (d0, d1) = (s[prev].delay, s[i].delay);
                let (c0, c1) = (s[prev].counts, s[i].counts);
                let frac = if c1 > c0 {
                    (half - c0) / (c1 - c0)
                } else {
                    1.0
                };
                return Some(((d0 + frac * (d1 - d0)) - s[imin].delay).abs());
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..imin).rev());
    let right = crossing(&mut (imin + 1..n));
    let hwhm = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (l + r),
        (Some(h), None) | (None, Some(h)) => h,
        (None, None) => 0.0,
    };
    let sigma = if depth > 0.0 && hwhm > 0.0 {
        hwhm / (2.0 * std::f64::consts::LN_2).sqrt()
    } else {
        span / 10.0
    };
    Ok([level / a, visibility, sigma, s[imin].delay])
}

/// Weighted least-squares fit of the dip model to `data`.
///
/// Weights are `1/error²` when a sample carries an error bar and
/// `1/max(counts, 1)` otherwise. Standard errors come from the inverse of the
/// weighted normal matrix and are not rescaled by the reduced χ².
pub fn fit_dip(data: &DipData, coupler: &BeamSplitter) -> Result<DipFitResult> {
    let (rr, tt) = (coupler.reflectance(), coupler.transmittance());
    let (a, c) = (rr * rr + tt * tt, rr * tt);
    if c == 0.0 {
        return Err(Error::invalid(
            "coupler",
            "one output port receives no light",
        ));
    }
    let init = initial_guess(data, a, c)?;

    let s = &data.samples;
    let offset = s[0].delay;
    let scale = s[s.len() - 1].delay - offset;
    let b_scale = init[0];
    let problem = Scaled {
        x: s.iter().map(|p| (p.delay - offset) / scale).collect(),
        y: s.iter().map(|p| p.counts / b_scale).collect(),
        w: s.iter()
            .map(|p| b_scale * b_scale / sample_sigma(p).powi(2))
            .collect(),
        a,
        c,
    };

    let mut p = [1.0, init[1], init[2] / scale, (init[3] - offset) / scale];
    let (mut f, mut j) = problem.eval(&p);
    let mut chi2 = problem.chi_square(&f);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = problem.normal_equations(&f, &j);
        let floor = 1e-12 * (0..4).map(|k| jtj[(k, k)]).fold(0.0, f64::max);
        let mut damped = jtj.clone();
        for k in 0..4 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(floor);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        if (0..4).all(|k| step[k].abs() <= REL_TOL * (p[k].abs() + REL_TOL)) {
            converged = true;
            break;
        }
        let trial = [
            p[0] + step[0],
            p[1] + step[1],
            p[2] + step[2],
            p[3] + step[3],
        ];
        if !(trial[2] > 0.0) {
            lambda *= 4.0;
            continue;
        }
        let (ft, jt) = problem.eval(&trial);
        let chi2_t = problem.chi_square(&ft);
        if chi2_t <= chi2 {
            p = trial;
            f = ft;
            j = jt;
            chi2 = chi2_t;
            lambda = (lambda / 3.0).max(1e-12);
        } else {
            lambda *= 4.0;
            if lambda > 1e16 {
                // No descent direction left within floating-point resolution.
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::FitNotConverged { iterations });
    }

    let (jtj, _) = problem.normal_equations(&f, &j);
    let cov = jtj
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::DegenerateData(format!("covariance: {e}")))?;
    let se = |k: usize| cov[(k, k)].max(0.0).sqrt();
    Ok(DipFitResult {
        model: DipModel {
            baseline: p[0] * b_scale,
            visibility: p[1],
            width: p[2] * scale,
            center: p[3] * scale + offset,
        },
        std_errors: [se(0) * b_scale, se(1), se(2) * scale, se(3) * scale],
        residual_norm: chi2.sqrt(),
        degrees_of_freedom: s.len().saturating_sub(4),
        iterations,
    })
}
