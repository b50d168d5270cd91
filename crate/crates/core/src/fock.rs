//! Truncated multimode Fock states and the two-port beamsplitter.
//!
//! States are sparse maps from occupation vectors to complex amplitudes.
//! Every state carries a total-photon truncation bound; building a term above
//! that bound is an error rather than a silent drop, so norms stay honest.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Photon number in each mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockOccupation(Vec<u32>);

impl FockOccupation {
    pub fn new(occupations: Vec<u32>) -> Self {
        FockOccupation(occupations)
    }

    pub fn vacuum(mode_count: usize) -> Self {
        FockOccupation(vec![0; mode_count])
    }

    pub fn mode_count(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn get(&self, mode: usize) -> u32 {
        self.0[mode]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for FockOccupation {
    fn from(v: Vec<u32>) -> Self {
        FockOccupation(v)
    }
}

impl From<&[u32]> for FockOccupation {
    fn from(v: &[u32]) -> Self {
        FockOccupation(v.to_vec())
    }
}

impl fmt::Display for FockOccupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, n) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

/// Lossless two-port beamsplitter with real amplitude coefficients.
///
/// Input creation operators map as `a1† → t a3† + i r a4†` and
/// `a2† → i r a3† + t a4†`; the reflected path picks up a phase of `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitter {
    t: f64,
    r: f64,
}

impl BeamSplitter {
    pub const UNITARITY_TOL: f64 = 1e-12;

    pub fn new(t: f64, r: f64) -> Result<Self> {
        if !(t.is_finite() && r.is_finite()) || t < 0.0 || r < 0.0 {
            return Err(Error::invalid(
                "t/r",
                "amplitudes must be finite and non-negative",
            ));
        }
        if (t * t + r * r - 1.0).abs() > Self::UNITARITY_TOL {
            return Err(Error::invalid(
                "t/r",
                format!("t² + r² = {} is not 1", t * t + r * r),
            ));
        }
        Ok(BeamSplitter { t, r })
    }

    /// 50:50 coupler.
    pub fn balanced() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        BeamSplitter { t: s, r: s }
    }

    /// Builds the splitter from its intensity transmittance `T = t²`.
    pub fn from_transmittance(transmittance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(Error::invalid(
                "transmittance",
                format!("{transmittance} is outside [0, 1]"),
            ));
        }
        Ok(BeamSplitter {
            t: transmittance.sqrt(),
            r: (1.0 - transmittance).sqrt(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn transmittance(&self) -> f64 {
        self.t * self.t
    }

    pub fn reflectance(&self) -> f64 {
        self.r * self.r
    }

    /// Output amplitudes for `|n⟩₁|m⟩₂`, indexed by the photon number `p` in
    /// output 3 (output 4 then holds `n + m − p`).
    ///
    /// Expands `(t a3† + i r a4†)ⁿ (i r a3† + t a4†)ᵐ |0,0⟩ / √(n! m!)`: with
    /// `j` transmitted photons from input 1 and `k` reflected photons from
    /// input 2 the term lands on `|j+k, n+m−j−k⟩` with coefficient
    /// `tʲ⁺ᵐ⁻ᵏ (ir)ⁿ⁻ʲ⁺ᵏ √(C(n,j) C(m,k) C(j+k,j) C(n+m−j−k,n−j))`.
    pub fn output_amplitudes(&self, n: u32, m: u32) -> Vec<Complex64> {
        let total = (n + m) as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); total + 1];
        for j in 0..=n {
            for k in 0..=m {
                let p = j + k;
                let q = n + m - p;
                let magnitude =
                    (binomial(n, j) * binomial(m, k) * binomial(p, j) * binomial(q, n - j)).sqrt();
                let t_pow = (j + m - k) as i32;
                let r_pow = n - j + k;
                let coeff = self.t.powi(t_pow) * self.r.powi(r_pow as i32) * magnitude;
                out[p as usize] += i_pow(r_pow) * coeff;
            }
        }
        out
    }

    /// Probability of finding `p` photons in output 3 for input `|n⟩₁|m⟩₂`.
    pub fn output_distribution(&self, n: u32, m: u32) -> Vec<f64> {
        self.output_amplitudes(n, m)
            .into_iter()
            .map(|a| a.norm_sqr())
            .collect()
    }
}

fn i_pow(e: u32) -> Complex64 {
    match e % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Sparse pure state over a fixed number of bosonic modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    terms: BTreeMap<FockOccupation, Complex64>,
    mode_count: usize,
    n_max: u32,
}

impl PureState {
    /// Default total-photon truncation bound.
    pub const DEFAULT_N_MAX: u32 = 4;
    /// Tolerance on `|‖ψ‖² − 1|` for operations that require a normalized state.
    pub const NORM_TOL: f64 = 1e-10;

    /// The zero vector.
    pub fn zero(mode_count: usize, n_max: u32) -> Self {
        PureState {
            terms: BTreeMap::new(),
            mode_count,
            n_max,
        }
    }

    pub fn vacuum(mode_count: usize, n_max: u32) -> Self {
        let mut s = Self::zero(mode_count, n_max);
        s.terms
            .insert(FockOccupation::vacuum(mode_count), Complex64::new(1.0, 0.0));
        s
    }

    /// Single Fock basis ket with unit amplitude.
    pub fn fock(occupations: &[u32], n_max: u32) -> Result<Self> {
        let mut s = Self::zero(occupations.len(), n_max);
        s.add_term(occupations.into(), Complex64::new(1.0, 0.0))?;
        Ok(s)
    }

    pub fn from_terms<I>(mode_count: usize, n_max: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FockOccupation, Complex64)>,
    {
        let mut s = Self::zero(mode_count, n_max);
        for (occ, amp) in terms {
            s.add_term(occ, amp)?;
        }
        Ok(s)
    }

    /// Adds `amp` to the amplitude of `occ`.
    pub fn add_term(&mut self, occ: FockOccupation, amp: Complex64) -> Result<()> {
        if occ.mode_count() != self.mode_count {
            return Err(Error::ModeCountMismatch {
                expected: self.mode_count,
                got: occ.mode_count(),
            });
        }
        let photons = occ.total();
        if photons > self.n_max {
            return Err(Error::TruncationOverflow {
                photons,
                n_max: self.n_max,
            });
        }
        *self.terms.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += amp;
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Same state with a different truncation bound.
    pub fn with_n_max(mut self, n_max: u32) -> Result<Self> {
        if let Some(photons) = self.terms.keys().map(FockOccupation::total).max() {
            if photons > n_max {
                return Err(Error::TruncationOverflow { photons, n_max });
            }
        }
        self.n_max = n_max;
        Ok(self)
    }

    pub fn amplitude(&self, occ: &[u32]) -> Complex64 {
        self.terms
            .get(&FockOccupation::from(occ))
            .copied()
            .unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockOccupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Unnormalized { norm_sqr: n * n });
        }
        for a in self.terms.values_mut() {
            *a /= n;
        }
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for a in self.terms.values_mut() {
            *a *= factor;
        }
        self
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.terms
            .iter()
            .filter_map(|(occ, a)| other.terms.get(occ).map(|b| a.conj() * b))
            .sum()
    }

    /// Tensor product; modes of `other` are appended after those of `self`.
    /// The result uses the larger of the two truncation bounds.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let n_max = self.n_max.max(other.n_max);
        let mut out = PureState::zero(self.mode_count + other.mode_count, n_max);
        for (oa, aa) in &self.terms {
            for (ob, ab) in &other.terms {
                let mut occ = Vec::with_capacity(out.mode_count);
                occ.extend_from_slice(oa.as_slice());
                occ.extend_from_slice(ob.as_slice());
                out.add_term(FockOccupation(occ), aa * ab)?;
            }
        }
        Ok(out)
    }

    /// Mixes `mode_a` (input 1) and `mode_b` (input 2) on `bs`; the outputs
    /// replace the inputs in place, output 3 in `mode_a` and output 4 in
    /// `mode_b`.
    pub fn apply_beamsplitter(
        &self,
        mode_a: usize,
        mode_b: usize,
        bs: &BeamSplitter,
    ) -> Result<PureState> {
        for index in [mode_a, mode_b] {
            if index >= self.mode_count {
                return Err(Error::InvalidMode {
                    index,
                    mode_count: self.mode_count,
                });
            }
        }
        if mode_a == mode_b {
            return Err(Error::InvalidMode {
                index: mode_b,
                mode_count: self.mode_count,
            });
        }
        let mut out = PureState::zero(self.mode_count, self.n_max);
        for (occ, amp) in &self.terms {
            let n = occ.get(mode_a);
            let m = occ.get(mode_b);
            for (p, c) in bs.output_amplitudes(n, m).into_iter().enumerate() {
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut next = occ.0.clone();
                next[mode_a] = p as u32;
                next[mode_b] = n + m - p as u32;
                out.add_term(FockOccupation(next), amp * c)?;
            }
        }
        out.terms.retain(|_, a| a.norm_sqr() > 0.0);
        Ok(out)
    }

    fn require_normalized(&self) -> Result<()> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::Unnormalized { norm_sqr });
        }
        Ok(())
    }

    /// Total probability of the occupations accepted by `pattern`.
    pub fn projection_probability<F>(&self, pattern: F) -> Result<f64>
    where
        F: Fn(&FockOccupation) -> bool,
    {
        self.expectation(|occ| if pattern(occ) { 1.0 } else { 0.0 })
    }

    /// `Σ |amp|² · f(occ)` for a diagonal observable `f`, such as a product of
    /// detector click probabilities.
    pub fn expectation<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&FockOccupation) -> f64,
    {
        self.require_normalized()?;
        Ok(self
            .terms
            .iter()
            .map(|(occ, a)| a.norm_sqr() * f(occ))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tensor_of_unit_kets() {
        let a = PureState::fock(&[1], 4).unwrap();
        let b = PureState::fock(&[1], 4).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.len(), 1);
        assert_eq!(ab.amplitude(&[1, 1]), c(1.0, 0.0));
    }

    #[test]
    fn tensor_distributes() {
        let s = FRAC_1_SQRT_2;
        let a = PureState::from_terms(
            1,
            4,
            [(vec![0].into(), c(s, 0.0)), (vec![1].into(), c(s, 0.0))],
        )
        .unwrap();
        let b = PureState::vacuum(1, 4);
        let ab = a.tensor(&b).unwrap();
        assert_abs_diff_eq!(ab.amplitude(&[0, 0]).re, s);
        assert_abs_diff_eq!(ab.amplitude(&[1, 0]).re, s);
        assert_eq!(ab.mode_count(), 2);
    }

    #[test]
    fn tensor_overflow_is_an_error() {
        let a = PureState::fock(&[3], 4).unwrap();
        let b = PureState::fock(&[2], 4).unwrap();
        assert_eq!(
            a.tensor(&b).unwrap_err(),
            Error::TruncationOverflow {
                photons: 5,
                n_max: 4
            }
        );
    }

    #[test]
    fn hom_output_for_balanced_splitter() {
        let s = PureState::fock(&[1, 1], 4).unwrap();
        let out = s
            .apply_beamsplitter(0, 1, &BeamSplitter::balanced())
            .unwrap();
        assert!(out.amplitude(&[1, 1]).norm() <= 1e-15);
        assert_abs_diff_eq!(out.amplitude(&[2, 0]).im, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amplitude(&[0, 2]).im, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(out.amplitude(&[2, 0]).re, 0.0, epsilon = 1e-15);

        let cc = out
            .projection_probability(|o| o.as_slice() == [1, 1])
            .unwrap();
        assert!(cc <= 1e-12);
        let bunched = out
            .projection_probability(|o| o.as_slice() == [2, 0] || o.as_slice() == [0, 2])
            .unwrap();
        assert_abs_diff_eq!(bunched, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            out.projection_probability(|_| true).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn identity_splitter() {
        let bs = BeamSplitter::new(1.0, 0.0).unwrap();
        let s = PureState::fock(&[1, 0], 4).unwrap();
        let out = s.apply_beamsplitter(0, 1, &bs).unwrap();
        assert_eq!(out.amplitude(&[1, 0]), c(1.0, 0.0));
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn invalid_modes_rejected() {
        let s = PureState::fock(&[1, 1], 4).unwrap();
        let bs = BeamSplitter::balanced();
        assert!(matches!(
            s.apply_beamsplitter(0, 2, &bs),
            Err(Error::InvalidMode { index: 2, .. })
        ));
        assert!(s.apply_beamsplitter(1, 1, &bs).is_err());
    }

    #[test]
    fn unnormalized_projection_rejected() {
        let s = PureState::fock(&[1, 1], 4).unwrap().scaled(c(2.0, 0.0));
        assert!(matches!(
            s.projection_probability(|_| true),
            Err(Error::Unnormalized { .. })
        ));
    }

    #[test]
    fn splitter_validation() {
        assert!(BeamSplitter::new(0.6, 0.6).is_err());
        assert!(BeamSplitter::new(-0.6, 0.8).is_err());
        assert!(BeamSplitter::new(0.6, 0.8).is_ok());
        let bs = BeamSplitter::from_transmittance(0.54).unwrap();
        assert_abs_diff_eq!(bs.transmittance() + bs.reflectance(), 1.0, epsilon = 1e-15);
        assert!(BeamSplitter::from_transmittance(1.2).is_err());
    }

    #[test]
    fn two_photon_coefficients_for_any_split() {
        for &tt in &[0.0, 0.1, 0.3, 0.5, 0.54, 0.77, 1.0] {
            let bs = BeamSplitter::from_transmittance(tt).unwrap();
            let (t, r) = (bs.t(), bs.r());
            let amps = bs.output_amplitudes(1, 1);
            assert_abs_diff_eq!(amps[1].re, t * t - r * r, epsilon = 1e-12);
            assert_abs_diff_eq!(amps[1].im, 0.0, epsilon = 1e-12);
            for p in [0, 2] {
                assert_abs_diff_eq!(amps[p].re, 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(amps[p].im, r * t * 2f64.sqrt(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn four_balanced_passes_return_input() {
        let bs = BeamSplitter::balanced();
        for (n, m) in [(1, 0), (1, 1), (2, 1), (2, 2), (3, 1), (0, 4)] {
            let input = PureState::fock(&[n, m], 8).unwrap();
            let mut s = input.clone();
            for _ in 0..4 {
                s = s.apply_beamsplitter(0, 1, &bs).unwrap();
            }
            let overlap = input.inner(&s);
            assert_abs_diff_eq!(overlap.norm(), 1.0, epsilon = 1e-10);
        }
    }

    fn arb_state() -> impl Strategy<Value = PureState> {
        prop::collection::vec(
            ((0u32..3, 0u32..3, 0u32..2), (-1.0f64..1.0, -1.0f64..1.0)),
            1..6,
        )
        .prop_filter_map("nonzero", |terms| {
            let s = PureState::from_terms(
                3,
                8,
                terms
                    .into_iter()
                    .map(|((a, b, c), (re, im))| (vec![a, b, c].into(), Complex64::new(re, im))),
            )
            .ok()?;
            s.normalized().ok()
        })
    }

    proptest! {
        #[test]
        fn beamsplitter_is_unitary_and_conserves_photons(
            state in arb_state(),
            transmittance in 0.0f64..=1.0,
            pair in prop::sample::select(vec![(0usize, 1usize), (1, 0), (0, 2), (2, 1)]),
        ) {
            let bs = BeamSplitter::from_transmittance(transmittance).unwrap();
            let out = state.apply_beamsplitter(pair.0, pair.1, &bs).unwrap();
            prop_assert!((out.norm() - state.norm()).abs() <= 1e-12);
            let totals_in: std::collections::BTreeSet<u32> = state.terms().map(|(o, _)| o.total()).collect();
            for (occ, _) in out.terms() {
                prop_assert!(totals_in.contains(&occ.total()));
            }
        }

        #[test]
        fn tensor_norm_multiplies(a in arb_state(), b in arb_state()) {
            let a = a.scaled(Complex64::new(0.7, 0.0)).with_n_max(16).unwrap();
            let ab = a.tensor(&b).unwrap();
            prop_assert!((ab.norm() - a.norm() * b.norm()).abs() <= 1e-12);
        }
    }
}
