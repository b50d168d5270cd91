use hom_core::experiment::{DetectorSet, ExactModel};
use hom_core::montecarlo::{simulate, TrialPlan};
use hom_core::spectral::dip_envelope_fwhm;
use hom_core::{ExperimentConfig, PairSource, PairStatistics};

fn config(n_bar: f64, statistics: PairStatistics) -> ExperimentConfig {
    let src = PairSource::new(n_bar, statistics)
        .unwrap()
        .with_truncation(6)
        .unwrap();
    ExperimentConfig {
        source_a: src,
        source_b: src,
        detectors: DetectorSet::symmetric(0.8, 0.8).unwrap(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn monte_carlo_tracks_exact_scan() {
    for (statistics, seed) in [(PairStatistics::Thermal, 1), (PairStatistics::Poisson, 50)] {
        let cfg = config(0.01, statistics);
        let exact = ExactModel::new(&cfg).unwrap();
        let fwhm = dip_envelope_fwhm(cfg.signal_filter.sigma(), cfg.pump.sigma_p()).unwrap();
        for (k, x) in [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0]
            .into_iter()
            .enumerate()
        {
            let delay = x * fwhm;
            let plan = TrialPlan::new(cfg, 3_000_000, seed + k as u64)
                .with_batches(8)
                .with_delay(delay);
            let rec = simulate(&plan).unwrap();
            let p = exact.fourfold(delay).unwrap();
            let se = (p / rec.pulses as f64).sqrt();
            let z = (rec.fourfold_frequency() - p) / se;
            assert!(z.abs() <= 3.0, "{statistics:?} ΔT = {x}·FWHM: z = {z:.2}");
        }
    }
}

#[test]
fn exact_scan_is_symmetric_with_minimum_at_zero() {
    let cfg = config(0.025, PairStatistics::Thermal);
    let exact = ExactModel::new(&cfg).unwrap();
    let fwhm = dip_envelope_fwhm(cfg.signal_filter.sigma(), cfg.pump.sigma_p()).unwrap();
    let at = |x: f64| exact.fourfold(x * fwhm).unwrap();
    for x in [0.1, 0.5, 1.0, 3.0] {
        assert!((at(x) - at(-x)).abs() <= 1e-15 * at(x));
        assert!(at(x) > at(0.0));
    }
    let half = at(0.0) + 0.5 * (at(f64::INFINITY) - at(0.0));
    assert!((at(0.5) - half).abs() < 1e-12 * half);
}

#[test]
fn blocked_counts_match_exact_backgrounds() {
    let cfg = config(0.05, PairStatistics::Thermal);
    let (ba, bb) = ExactModel::new(&cfg).unwrap().blocked();
    let rec = simulate(&TrialPlan::new(cfg, 4_000_000, 77).with_batches(8)).unwrap();
    for (count, p) in [(rec.blocked_a_fourfold, ba), (rec.blocked_b_fourfold, bb)] {
        let freq = count as f64 / rec.pulses as f64;
        let se = (p / rec.pulses as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se + 0.01 * p, "{freq} vs {p}");
    }
}
