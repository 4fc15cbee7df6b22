use cohdisc_core::collective::{pe_opt_asymptotic, pe_opt_gram, GramOptions, RiskCurvePoint};
use cohdisc_core::eand::{
    montecarlo_eand, optimal_squeezing, pe_eand_asymptotic, pe_eand_finite, EandQuadrature, HeterodyneSettings,
    McOptions, Receiver, Scoring,
};
use cohdisc_core::twopoint::{optimal_c, p_plus_minus, two_point_collective_excess_risk, two_point_local_excess_risk};
use cohdisc_core::LocalModel;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, Context};
use crate::table::{Cell, Table};

/// A finished table plus any invariant the rows break.
#[derive(Debug)]
pub struct Report {
    pub table: Table,
    pub violations: Vec<String>,
}

impl Report {
    fn clean(table: Table) -> Self {
        Self { table, violations: Vec::new() }
    }
}

fn collect<T: Send>(items: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    items.into_iter().collect()
}

pub fn risk_curve(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = cfg.grid(0.3, 3.0, 28)?;
    let points = collect(grid.par_iter().map(|&a| RiskCurvePoint::compute(a).context("risk-curve")).collect())?;
    let mut table = Table::new(&["alpha0", "r_opt_risk", "r_eand_risk", "ratio"]);
    let mut violations = Vec::new();
    for p in points {
        if p.r_eand < p.r_opt {
            violations.push(format!("E&D risk below collective risk at alpha0 = {}", p.alpha0));
        }
        table.push(vec![Cell::Real(p.alpha0), Cell::Real(p.r_opt), Cell::Real(p.r_eand), Cell::Real(p.ratio())]);
    }
    Ok(Report { table, violations })
}

pub fn squeezing(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = cfg.grid(0.1, 6.0, 60)?;
    let mut table = Table::new(&["alpha0", "r_star"]);
    let mut violations = Vec::new();
    for a in grid {
        let r = optimal_squeezing(a).context("squeezing")?;
        if r >= 0.0 {
            violations.push(format!("optimal squeezing is not negative at alpha0 = {a}"));
        }
        table.push(vec![Cell::Real(a), Cell::Real(r)]);
    }
    Ok(Report { table, violations })
}

/// `n`, `4n`, `16n`, ... with `steps` entries (three by default).
fn ladder(cfg: &RunConfig, default_n: u64) -> Result<Vec<u64>, CliError> {
    let n0 = cfg.n.unwrap_or(default_n);
    let steps = cfg.steps.unwrap_or(3);
    if n0 == 0 || steps == 0 {
        return Err(CliError::Config("n and steps must be at least 1".into()));
    }
    (0..steps as u32)
        .map(|k| {
            4u64.checked_pow(k)
                .and_then(|f| f.checked_mul(n0))
                .ok_or_else(|| CliError::Config("n ladder overflows".into()))
        })
        .collect()
}

fn model(alpha0: f64, mu: f64, n: u64, what: &str) -> Result<LocalModel, CliError> {
    LocalModel::new(alpha0, mu, n).context(what)
}

fn finite_n_table(rows: Vec<(u64, f64, f64)>) -> Report {
    let mut table = Table::new(&["n", "pe_finite", "pe_asymptotic", "n_times_residual"]);
    let mut violations = Vec::new();
    for (n, fin, asy) in rows {
        if !(fin < 0.5) {
            violations.push(format!("finite-n error {fin} is not below 1/2 at n = {n}"));
        }
        table.push(vec![Cell::Int(n), Cell::Real(fin), Cell::Real(asy), Cell::Real(n as f64 * (fin - asy))]);
    }
    Report { table, violations }
}

pub fn finite_n(cfg: &RunConfig) -> Result<Report, CliError> {
    let alpha0 = cfg.single_alpha0(1.0);
    let mu = cfg.mu.unwrap_or(1.0);
    let ns = ladder(cfg, 1000)?;
    let rows = collect(
        ns.par_iter()
            .map(|&n| {
                let m = model(alpha0, mu, n, "finite-n")?;
                let fin = pe_opt_gram(&m, GramOptions::default()).context("finite-n")?.error;
                let asy = pe_opt_asymptotic(alpha0, mu, n).context("finite-n")?;
                Ok((n, fin, asy))
            })
            .collect(),
    )?;
    Ok(finite_n_table(rows))
}

fn settings(cfg: &RunConfig, alpha0: f64, what: &str) -> Result<HeterodyneSettings, CliError> {
    let r = match cfg.squeezing {
        Some(r) => r,
        None => optimal_squeezing(alpha0).context(what)?,
    };
    HeterodyneSettings::along_real_axis(r).context(what)
}

fn quadrature(cfg: &RunConfig) -> EandQuadrature {
    let base = EandQuadrature::default();
    match cfg.quad_order {
        Some(q) => EandQuadrature { v_order: q, u_order: q, ..base },
        None => base,
    }
}

pub fn eand_finite_n(cfg: &RunConfig) -> Result<Report, CliError> {
    let alpha0 = cfg.single_alpha0(1.0);
    let mu = cfg.mu.unwrap_or(1.0);
    let s = settings(cfg, alpha0, "eand-finite-n")?;
    let quad = quadrature(cfg);
    let ns = ladder(cfg, 100)?;
    let mut rows = Vec::new();
    // the quadrature itself runs in parallel over outcomes
    for n in ns {
        let m = model(alpha0, mu, n, "eand-finite-n")?;
        let fin = pe_eand_finite(&m, s, quad).context("eand-finite-n")?;
        let asy = pe_eand_asymptotic(alpha0, mu, n, s).context("eand-finite-n")?;
        rows.push((n, fin, asy));
    }
    Ok(finite_n_table(rows))
}

pub fn montecarlo(cfg: &RunConfig) -> Result<Report, CliError> {
    let alpha0 = cfg.single_alpha0(1.0);
    let mu = cfg.mu.unwrap_or(1.0);
    let n = cfg.n.unwrap_or(400);
    let trials = cfg.trials.unwrap_or(100_000);
    let seed = cfg.seed()?;
    let s = settings(cfg, alpha0, "montecarlo")?;
    let m = model(alpha0, mu, n, "montecarlo")?;
    let mut opts = McOptions::default();
    if cfg.plug_in {
        opts.receiver = Receiver::PlugIn;
    }
    if cfg.binary {
        opts.scoring = Scoring::Binary;
    }
    if let Some(q) = cfg.quad_order {
        opts.u_order = q;
    }
    let est = montecarlo_eand(&m, s, trials, seed, opts).context("montecarlo")?;
    let quad = pe_eand_finite(&m, s, quadrature(cfg)).context("montecarlo")?;
    let mut table = Table::new(&["n", "trials", "seed", "mc_mean", "mc_std_error", "quadrature", "z_score"]);
    table.push(vec![
        Cell::Int(n),
        Cell::Int(trials),
        Cell::Int(seed),
        Cell::Real(est.mean),
        Cell::Real(est.std_error),
        Cell::Real(quad),
        Cell::Real((est.mean - quad) / est.std_error),
    ]);
    Ok(Report::clean(table))
}

pub fn twopoint(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = cfg.grid(0.5, 2.0, 4)?;
    let n = cfg.n.unwrap_or(1000);
    if n == 0 {
        return Err(CliError::Config("n must be at least 1".into()));
    }
    let c = optimal_c();
    let (pp, pm) = p_plus_minus(c).context("twopoint")?;
    let rows = collect(
        grid.par_iter()
            .map(|&a| {
                let local = two_point_local_excess_risk(a, c).context("twopoint")?;
                let coll = two_point_collective_excess_risk(a, n).context("twopoint")?;
                Ok((a, local, coll))
            })
            .collect(),
    )?;
    let mut table =
        Table::new(&["alpha0", "c_star", "p_plus", "p_minus", "local_excess_risk", "collective_excess_risk"]);
    let mut violations = Vec::new();
    for (a, local, coll) in rows {
        if !(coll < local) {
            violations.push(format!("collective risk {coll} not below local risk {local} at alpha0 = {a}"));
        }
        table.push(vec![
            Cell::Real(a),
            Cell::Real(c),
            Cell::Real(pp),
            Cell::Real(pm),
            Cell::Real(local),
            Cell::Real(coll),
        ]);
    }
    Ok(Report { table, violations })
}
