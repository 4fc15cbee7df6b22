//! Fast invariant checks across the library, run by the `selftest` command.

use cohdisc_core::collective::{
    collective_expansion, excess_risk_opt, lambda2_pm, lambda2_series, pe_opt_finite, pe_opt_gram,
    second_order_perturbation, GramOptions, RiskCurvePoint,
};
use cohdisc_core::eand::{
    averaged_moments, excess_risk_eand, excess_risk_eand_finite_mu, gaussian_overlap, golden_section,
    local_posterior_moments, mean_vector, optimal_squeezing, pv_variances, squeezed_covariance, HeterodyneSettings,
};
use cohdisc_core::fock::{coherent_ket, helstrom_error, squeezed_coherent_ket, C64};
use cohdisc_core::localmodel::{averaged_sigma2, averaged_sigma2_exact, gaussian_grid};
use cohdisc_core::twopoint::{optimal_c, p_plus_minus, two_point_collective_excess_risk, two_point_local_excess_risk};
use cohdisc_core::{ComplexAmplitude, LocalModel};

type Outcome = Result<(), String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: cohdisc_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn amp(re: f64, im: f64) -> Result<ComplexAmplitude, String> {
    lib(ComplexAmplitude::new(re, im))
}

fn coherent_overlap() -> Outcome {
    let a = lib(coherent_ket(amp(1.2, -0.4)?, 60))?;
    let b = lib(coherent_ket(amp(-0.3, 0.5)?, 60))?;
    let want = (-(1.5f64.powi(2) + 0.9f64.powi(2))).exp();
    let got = a.inner(&b).norm_sqr();
    ensure((got - want).abs() < 1e-12 && a.norm_deficit() < 1e-12, || format!("{got} vs {want}"))
}

fn helstrom_identical_states() -> Outcome {
    let rho = lib(coherent_ket(amp(0.7, 0.1)?, 30))?.projector();
    let p = lib(helstrom_error(&rho, &rho, 0.5))?;
    ensure((p - 0.5).abs() < 1e-12, || format!("error {p}"))
}

fn sigma2_exact_vs_quadrature() -> Outcome {
    let m = lib(LocalModel::new(1.0, 1.0, 50))?;
    let q = lib(averaged_sigma2(&m, [20, 10]))?;
    let e = lib(averaged_sigma2_exact(&m, [20, 10]))?;
    let diff = (q.entries() - e.entries()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    ensure(diff < 1e-10, || format!("max difference {diff:e}"))
}

fn lambda_closed_form_vs_series() -> Outcome {
    let (lp, lm) = lib(lambda2_pm(1.0, 1.0))?;
    let (sp, sm) = lib(lambda2_series(1.0, 1.0, 200))?;
    ensure((lp - sp).abs() < 1e-8 * lp.abs() && (lm - sm).abs() < 1e-8 * lm.abs(), || format!("{lp} vs {sp}"))
}

fn no_first_order_term() -> Outcome {
    let m = lib(LocalModel::new(1.0, 1.0, 1000))?;
    let (a, b, c) = lib(collective_expansion(&m, [30, 14]))?;
    let r = lib(second_order_perturbation(&a, &b, &c))?;
    let worst = r.first_order.iter().map(|g| g.abs()).fold(0.0, f64::max);
    ensure(worst < 1e-10, || format!("largest first-order shift {worst:e}"))
}

fn gram_vs_dense() -> Outcome {
    let m = lib(LocalModel::new(1.0, 1.0, 20))?;
    let g = lib(pe_opt_gram(&m, GramOptions::default()))?.error;
    let d = lib(pe_opt_finite(&m, [40, 24]))?;
    ensure((g - d).abs() < 1e-9, || format!("{g} vs {d}"))
}

fn risk_ordering() -> Outcome {
    for k in 1..=30 {
        let a = 0.1 * k as f64;
        let p = lib(RiskCurvePoint::compute(a))?;
        ensure(p.r_opt > 0.0 && p.r_eand >= p.r_opt, || format!("alpha0 = {a}: {} vs {}", p.r_eand, p.r_opt))?;
    }
    Ok(())
}

fn optimal_squeezing_checks() -> Outcome {
    let r = lib(optimal_squeezing(1.0))?;
    ensure((r + 0.0967).abs() < 1e-3, || format!("r*(1) = {r}"))?;
    let (arg, _) = golden_section(|x| excess_risk_eand(1.0, x).unwrap_or(f64::INFINITY), -2.0, 2.0, 1e-10);
    ensure((arg - r).abs() < 1e-6, || format!("argmin {arg} vs {r}"))
}

fn averaged_moment_formulas() -> Outcome {
    let (mu, r) = (1.0, 0.3);
    let s = lib(HeterodyneSettings::along_real_axis(r))?;
    let [a, b] = pv_variances(mu, s);
    let grid = lib(gaussian_grid(C64::new(0.0, 0.0), a, b, 40))?;
    let (mut abs1, mut sq1, mut i2) = (0.0, 0.0, 0.0);
    for (v, w) in grid.iter() {
        let m = lib(local_posterior_moments(v, mu, s))?;
        abs1 += w * m.i1.norm_sqr();
        sq1 += w * (m.i1 * m.i1).re;
        i2 += w * m.i2;
    }
    let am = lib(averaged_moments(mu, s))?;
    let worst = [(abs1, am.abs_first_sq), (sq1, am.first_sq), (i2, mu * mu)]
        .iter()
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-10, || format!("moment mismatch {worst:e}"))
}

fn gaussian_overlap_vs_fock() -> Outcome {
    let cases = [((0.3, -0.2), 0.2, 0.4, (-0.5, 0.1), -0.3, 1.9), ((1.0, 0.5), 0.0, 0.0, (0.2, 0.2), 0.5, 0.7)];
    for ((ar, ai), ra, pa, (br, bi), rb, pb) in cases {
        let ka = lib(squeezed_coherent_ket(amp(ar, ai)?, ra, pa, 80))?;
        let kb = lib(squeezed_coherent_ket(amp(br, bi)?, rb, pb, 80))?;
        let fock = ka.inner(&kb).norm_sqr();
        let formula = lib(gaussian_overlap(
            &squeezed_covariance(ra, pa),
            &mean_vector(C64::new(ar, ai)),
            &squeezed_covariance(rb, pb),
            &mean_vector(C64::new(br, bi)),
        ))?;
        ensure((fock - formula).abs() < 1e-8, || format!("{fock} vs {formula}"))?;
    }
    Ok(())
}

fn eand_wide_prior_limit() -> Outcome {
    for r in [-0.2, 0.0, 0.3] {
        let s = lib(HeterodyneSettings::along_real_axis(r))?;
        let fin = lib(excess_risk_eand_finite_mu(1.0, 1e4, s))?;
        let lim = lib(excess_risk_eand(1.0, r))?;
        ensure((fin / lim - 1.0).abs() < 1e-3, || format!("r = {r}: {fin} vs {lim}"))?;
    }
    Ok(())
}

fn symmetric_two_point_optimum() -> Outcome {
    let c = optimal_c();
    let (pp, pm) = lib(p_plus_minus(c))?;
    ensure((c - 0.997697).abs() < 1e-6 && (pp - pm).abs() < 1e-10, || format!("c* = {c}, p+ - p- = {}", pp - pm))
}

fn two_point_gap() -> Outcome {
    for a in [0.5, 1.0, 2.0] {
        let local = lib(two_point_local_excess_risk(a, optimal_c()))?;
        let coll = lib(two_point_collective_excess_risk(a, 1000))?;
        ensure(coll > 0.0 && coll < local, || format!("alpha0 = {a}: {coll} vs {local}"))?;
    }
    Ok(())
}

fn known_amplitude_limit() -> Outcome {
    let r = lib(excess_risk_opt(0.01))?;
    ensure(r > 0.0 && r.is_finite(), || format!("risk {r}"))
}

const CHECKS: &[Check] = &[
    ("fock: coherent overlaps", coherent_overlap),
    ("fock: Helstrom error of identical states", helstrom_identical_states),
    ("localmodel: averaged state closed form vs quadrature", sigma2_exact_vs_quadrature),
    ("collective: second-order shifts closed form vs series", lambda_closed_form_vs_series),
    ("collective: no first-order term after averaging", no_first_order_term),
    ("collective: banded Gram path vs dense Fock", gram_vs_dense),
    ("collective: small-amplitude risk finite", known_amplitude_limit),
    ("eand: optimal squeezing", optimal_squeezing_checks),
    ("eand: averaged posterior moments", averaged_moment_formulas),
    ("eand: Gaussian overlap vs Fock traces", gaussian_overlap_vs_fock),
    ("eand: wide-prior limit of the finite-width risk", eand_wide_prior_limit),
    ("risk-curve: E&D risk never below collective", risk_ordering),
    ("twopoint: symmetric optimum", symmetric_two_point_optimum),
    ("twopoint: collective gap", two_point_gap),
];

/// Run every check, printing one line each; returns the number of failures.
pub fn run(out: &mut impl std::io::Write) -> std::io::Result<usize> {
    let mut failures = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => writeln!(out, "PASS {name}")?,
            Err(why) => {
                failures += 1;
                writeln!(out, "FAIL {name}: {why}")?;
            }
        }
    }
    writeln!(out, "{} checks, {failures} failed", CHECKS.len())?;
    Ok(failures)
}
