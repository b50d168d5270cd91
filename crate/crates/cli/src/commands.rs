use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use hom_core::dipfit::{fit_dip, residuals, write_residuals_csv, DipData, DipFitResult};
use hom_core::experiment::{fourfold_rate, multifold_rate, visibility_multipair, ExactModel};
use hom_core::montecarlo::{estimate_visibility, simulate, CountRecord, TrialPlan};
use hom_core::spectral::{check_energy_conservation, pdc_visibility};
use hom_core::{run_exact, WavelengthTriple};

use crate::config::RunConfig;

fn fmt_delay(d: f64) -> String {
    if d.is_finite() {
        format!("{d:.6e}")
    } else {
        "inf".to_string()
    }
}

fn plan(cfg: &RunConfig, delay: f64, seed: u64) -> Result<TrialPlan> {
    let plan = TrialPlan::new(cfg.experiment()?, cfg.run.pulses, seed)
        .with_batches(cfg.run.batches)
        .with_delay(delay);
    plan.validate().context("invalid [run] section")?;
    Ok(plan)
}

pub fn visibility(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let exp = cfg.experiment()?;
    let v_max = exp.v_max()?;
    let v_pdc = pdc_visibility(exp.signal_filter.sigma(), exp.pump.sigma_p())?;
    let gamma = 1.0 - exp.detectors.i1.eta() / 2.0;
    let gamma_prime = 1.0 - exp.detectors.s3.eta() / 2.0;
    let multipair = visibility_multipair(exp.source_a.n_bar(), gamma, gamma_prime)?;
    let report = run_exact(&exp)?;

    writeln!(out, "quantity,value")?;
    let rows = [
        ("v_max_fwm", v_max),
        ("v_max_pdc", v_pdc),
        ("v_multipair_first_order", multipair.first_order),
        ("v_multipair_ratio", multipair.exact_ratio),
        ("v_expected", v_max * multipair.first_order),
        ("v_exact_raw", report.visibility_raw),
        ("v_exact_net", report.visibility_net),
    ];
    for (name, value) in rows {
        writeln!(out, "{name},{value:.9}")?;
    }
    Ok(())
}

pub fn dip(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let exp = cfg.experiment()?;
    let exact = ExactModel::new(&exp)?;
    let grid = cfg.scan.grid()?;
    writeln!(out, "delay_s,p_exact,expected_counts,mc_counts,mc_error")?;
    for (k, &delay) in grid.iter().enumerate() {
        let p = exact.fourfold(delay)?;
        let rec = simulate(&plan(cfg, delay, cfg.run.seed.wrapping_add(k as u64))?)?;
        writeln!(
            out,
            "{},{:.6e},{:.6e},{},{:.6e}",
            fmt_delay(delay),
            p,
            p * rec.pulses as f64,
            rec.fourfold,
            (rec.fourfold as f64).sqrt()
        )?;
    }
    Ok(())
}

pub fn rates(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let exp = cfg.experiment()?;
    let (eta_s, eta_i) = (exp.detectors.s3.eta(), exp.detectors.i1.eta());
    let rep = exp.pump.rep_rate();
    let n_bar = exp.source_a.n_bar();
    writeln!(
        out,
        "scenario,rep_rate,n_bar,eta_s,eta_i,photons,rate_per_s,counts_per_60s"
    )?;
    let c4 = fourfold_rate(rep, n_bar, eta_s, eta_i);
    writeln!(
        out,
        "fourfold,{rep:.6e},{n_bar},{eta_s},{eta_i},4,{c4:.6e},{:.6e}",
        60.0 * c4
    )?;
    let r = &cfg.rates;
    for &eta in &r.sixfold_eta {
        let c6 = multifold_rate(r.sixfold_rep_rate, r.sixfold_n_bar, eta, eta, 3)?;
        writeln!(
            out,
            "sixfold_raw,{:.6e},{},{eta},{eta},6,{c6:.6e},{:.6e}",
            r.sixfold_rep_rate,
            r.sixfold_n_bar,
            60.0 * c6
        )?;
    }
    Ok(())
}

pub fn montecarlo(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let delay = cfg.scan.delay;
    let at_delay = simulate(&plan(cfg, delay, cfg.run.seed)?)?;
    let far = simulate(&plan(cfg, f64::INFINITY, cfg.run.seed.wrapping_add(1))?)?;
    writeln!(out, "delay_s,{}", CountRecord::csv_header())?;
    for (d, rec) in [(delay, &at_delay), (f64::INFINITY, &far)] {
        writeln!(out, "{},{}", fmt_delay(d), rec.csv_row())?;
    }
    match estimate_visibility(&at_delay, &far) {
        Ok(v) => {
            eprintln!("raw visibility {:.4} ± {:.4}", v.raw.value, v.raw.std_error);
            eprintln!("net visibility {:.4} ± {:.4}", v.net.value, v.net.std_error);
            if let Some(u) = v.unheralded {
                eprintln!("unheralded visibility {:.4} ± {:.4}", u.value, u.std_error);
            }
        }
        Err(e) => eprintln!("visibility unavailable: {e}"),
    }
    Ok(())
}

pub fn fit(
    cfg: &RunConfig,
    data_path: &Path,
    residuals_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let coupler = cfg.experiment()?.coupler;
    let file = File::open(data_path).with_context(|| format!("opening {}", data_path.display()))?;
    let data =
        DipData::read_csv(file).with_context(|| format!("reading {}", data_path.display()))?;
    let result = fit_dip(&data, &coupler)?;
    if !result.visibility_in_range() {
        eprintln!(
            "warning: fitted visibility {:.4} is outside [0, 1.05]",
            result.visibility()
        );
    }
    writeln!(out, "{}", DipFitResult::csv_header())?;
    writeln!(out, "{}", result.csv_row())?;
    if let Some(path) = residuals_path {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_residuals_csv(&residuals(&data, &result, &coupler), &mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Returns whether the check passed.
pub fn energy_check(
    pump_nm: f64,
    signal_nm: f64,
    idler_nm: f64,
    tol: f64,
    out: &mut dyn Write,
) -> Result<bool> {
    if !(tol > 0.0) {
        anyhow::bail!("tolerance must be positive");
    }
    let nm = 1e-9;
    let triple = WavelengthTriple::new(pump_nm * nm, signal_nm * nm, idler_nm * nm)?;
    let check = check_energy_conservation(&triple, tol);
    writeln!(
        out,
        "lambda_p_nm,lambda_s_nm,lambda_i_nm,mismatch,tolerance,passed"
    )?;
    writeln!(
        out,
        "{pump_nm},{signal_nm},{idler_nm},{:.6e},{tol:.6e},{}",
        check.mismatch, check.passed
    )?;
    Ok(check.passed)
}
