//! Collective strategy: exact finite-n Helstrom error, second-order eigenvalue
//! perturbation, closed-form asymptotics, the known-amplitude baseline and the
//! excess risk.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::banded::SymBand;
use crate::error::{invalid, Error, Result};
use crate::fock::{coherent_ket, helstrom_error, hermitian_eigen, ComplexAmplitude, FockKet, FockMatrix, C64};
use crate::localmodel::{
    averaged_sigma1, averaged_sigma2_exact, known_amplitude_error, sigma2_expansion_terms, thermal_coefficients,
    thermal_cutoff, LocalModel,
};
use crate::quadrature::composite_legendre;
use crate::special::{bessel_i0_scaled, ln_factorial, one_minus_sqrt_one_minus_exp, poisson_cutoff};

/// Zero-order eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-12;

/// Eigenvalue corrections for `A + eps B + eps^2 C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult {
    pub zero_order: Vec<f64>,
    pub first_order: Vec<f64>,
    pub second_order: Vec<f64>,
}

impl PerturbationResult {
    /// `sum |g0 + eps g1 + eps^2 g2|`.
    pub fn trace_norm_at(&self, eps: f64) -> f64 {
        self.zero_order
            .iter()
            .zip(&self.first_order)
            .zip(&self.second_order)
            .map(|((a, b), c)| (a + eps * b + eps * eps * c).abs())
            .sum()
    }
}

/// Rayleigh–Schrödinger corrections to first and second order.
///
/// Nondegenerate levels use the sum-over-states formula. A cluster of
/// (numerically) equal zero-order eigenvalues is accepted only when `B`
/// vanishes inside it; its second-order shifts are then the eigenvalues of
/// `P (C + B R B) P` with `R` the reduced resolvent. Any other degeneracy is
/// reported as an error naming the colliding levels.
pub fn second_order_perturbation(a: &FockMatrix, b: &FockMatrix, c: &FockMatrix) -> Result<PerturbationResult> {
    if a.dims() != b.dims() || a.dims() != c.dims() {
        return Err(invalid("perturbation operators must share dimensions"));
    }
    perturb_dense(a.entries(), b.entries(), c.entries())
}

pub(crate) fn perturb_dense(a: &DMatrix<C64>, b: &DMatrix<C64>, c: &DMatrix<C64>) -> Result<PerturbationResult> {
    let n = a.nrows();
    let h = FockMatrix::hermitian(vec![n], a.clone(), 0.0)?;
    let (vals, vecs) = hermitian_eigen(&h)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let g0: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let v = DMatrix::from_fn(n, n, |r, k| vecs[(r, order[k])]);
    let bp = v.adjoint() * b * &v;
    let cp = v.adjoint() * c * &v;
    let scale = bp.iter().map(|z| z.norm()).fold(1.0, f64::max);

    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || g0[i] - g0[i - 1] > DEGENERACY_GAP {
            clusters.push((start, i));
            start = i;
        }
    }

    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    for &(lo, hi) in &clusters {
        let center = g0[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        let m = hi - lo;
        if m > 1 {
            for i in lo..hi {
                for j in lo..hi {
                    if bp[(i, j)].norm() > 1e-9 * scale {
                        return Err(Error::Degenerate { i, j, gap: (g0[i] - g0[j]).abs() });
                    }
                }
            }
        }
        let mut eff = DMatrix::<C64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut s = cp[(lo + i, lo + j)];
                for k in (0..lo).chain(hi..n) {
                    s += bp[(lo + i, k)] * bp[(k, lo + j)] / (center - g0[k]);
                }
                eff[(i, j)] = s;
            }
        }
        if m == 1 {
            g1[lo] = bp[(lo, lo)].re;
            g2[lo] = eff[(0, 0)].re;
        } else {
            let eff = (&eff + eff.adjoint()).scale(0.5);
            let mut e: Vec<f64> = SymmetricEigen::new(eff).eigenvalues.iter().copied().collect();
            e.sort_by(f64::total_cmp);
            g2[lo..hi].copy_from_slice(&e);
        }
    }
    Ok(PerturbationResult { zero_order: g0, first_order: g1, second_order: g2 })
}

/// Zero-order operator and first/second-order perturbations of
/// `sigma1 - sigma2` in powers of `1/sqrt(n)`.
pub fn collective_expansion(model: &LocalModel, dims: [usize; 2]) -> Result<(FockMatrix, FockMatrix, FockMatrix)> {
    let s1 = averaged_sigma1(model, dims)?;
    let (z, f, s) = sigma2_expansion_terms(model, dims)?;
    Ok((s1.combine(1.0, &z, -1.0)?, f.scale(-1.0), s.scale(-1.0)))
}

/// Overlaps of the two nonzero eigenvectors of `[-a] - [0]` with low Fock states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOverlaps {
    /// `sqrt(1 + e^{-a^2/2})`, `sqrt(1 - e^{-a^2/2})`.
    pub norm_plus: f64,
    pub norm_minus: f64,
    /// `sqrt(1 - e^{-a^2})`: the nonzero eigenvalues are `+s` and `-s`.
    pub gap: f64,
    /// `<0|v+>`, `<0|v->`.
    pub vac: [f64; 2],
    /// `<1|v+>`, `<1|v->`.
    pub one: [f64; 2],
    /// `<2|v+>`, `<2|v->`.
    pub two: [f64; 2],
    /// Weight of `|1>` outside the span of `v+` and `v-`.
    pub one_null: f64,
}

/// Eigenvectors `v+`, `v-` of `[-a] - [0]` together with their overlaps.
#[derive(Debug, Clone)]
pub struct HelstromEigenstructure {
    pub v_plus: FockKet,
    pub v_minus: FockKet,
    pub overlaps: EigenOverlaps,
}

pub fn eigen_overlaps(alpha0: f64) -> Result<EigenOverlaps> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::Singular(format!("eigenstructure needs alpha0 > 0, got {alpha0}")));
    }
    let x = alpha0 * alpha0;
    let eps = (-0.5 * x).exp();
    let np = (1.0 + eps).sqrt();
    let nm = (-(-0.5 * x).exp_m1()).sqrt();
    let gap = np * nm;
    let sum = 1.0 / np + 1.0 / nm;
    let dif = 1.0 / np - 1.0 / nm;
    let b = -alpha0 * eps / 2.0;
    let g = x * eps / (2.0 * 2f64.sqrt());
    // 1 - x e^{-x} / (1 - e^{-x}); series near zero avoids 0/0
    let one_null = if x < 1e-4 { x / 2.0 - x * x / 12.0 } else { 1.0 - x * (-x).exp() / (-(-x).exp_m1()) };
    Ok(EigenOverlaps {
        norm_plus: np,
        norm_minus: nm,
        gap,
        vac: [0.5 * (np - nm), 0.5 * (np + nm)],
        one: [b * sum, b * dif],
        two: [g * sum, g * dif],
        one_null,
    })
}

pub fn helstrom_eigenstructure(alpha0: f64) -> Result<HelstromEigenstructure> {
    let overlaps = eigen_overlaps(alpha0)?;
    let dim = poisson_cutoff(alpha0 * alpha0, 1e-18).max(4);
    let vac = coherent_ket(ComplexAmplitude::ZERO, dim)?;
    let shifted = coherent_ket(ComplexAmplitude::real(-alpha0)?, dim)?;
    let eps = (-0.5 * alpha0 * alpha0).exp();
    let e_plus = (vac.entries() + shifted.entries()) / C64::new(2f64.sqrt() * (1.0 + eps).sqrt(), 0.0);
    let e_minus = (shifted.entries() - vac.entries()) / C64::new(2f64.sqrt() * overlaps.norm_minus, 0.0);
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok(HelstromEigenstructure {
        v_plus: FockKet::from_entries((&e_plus + &e_minus) * r)?,
        v_minus: FockKet::from_entries((&e_plus - &e_minus) * r)?,
        overlaps,
    })
}

/// Second-order trace-norm coefficients for the positive and negative branches.
pub fn lambda2_pm(alpha0: f64, mu: f64) -> Result<(f64, f64)> {
    if !(alpha0 > 0.0) {
        return Err(Error::Singular(format!("second-order coefficients need alpha0 > 0, got {alpha0}")));
    }
    if !(mu > 0.0) {
        return Err(invalid(format!("mu must be positive, got {mu}")));
    }
    let x = alpha0 * alpha0;
    let m2 = mu * mu;
    let em1 = x.exp_m1();
    let pre = m2 * (-0.5 * x).exp() / (2.0 * em1.sqrt());
    let bracket = 1.0 - (m2 + 1.0) / (2.0 * m2 + 1.0) * x * (2.0 * x.exp() - 1.0) / em1;
    let v = pre * bracket;
    Ok((v, -v))
}

/// The same coefficients summed level by level from the eigenvector overlaps.
pub fn lambda2_series(alpha0: f64, mu: f64, max_levels: usize) -> Result<(f64, f64)> {
    let o = eigen_overlaps(alpha0)?;
    let c = thermal_coefficients(mu, max_levels + 2);
    let vac2 = [o.vac[0].powi(2), o.vac[1].powi(2)];
    let one2 = [o.one[0].powi(2), o.one[1].powi(2)];
    let sign = [1.0, -1.0];
    let mut out = [0.0, 0.0];
    for (p, total) in out.iter_mut().enumerate() {
        for i in 0..max_levels {
            let gi = sign[p] * c[i] * o.gap;
            let e = c[i + 1] * (i as f64 + 1.0);
            let mut term = e * (vac2[p] - one2[p]);
            for q in 0..2 {
                let up = sign[q] * c[i + 1] * o.gap;
                term += c[i + 1].powi(2) * (i as f64 + 1.0) * one2[p] * vac2[q] / (gi - up);
                if i > 0 {
                    let down = sign[q] * c[i - 1] * o.gap;
                    term += c[i].powi(2) * i as f64 * vac2[p] * one2[q] / (gi - down);
                }
            }
            // the level below also carries a null direction with weight on |1>
            if i > 0 {
                term += c[i].powi(2) * i as f64 * vac2[p] * o.one_null / gi;
            }
            *total += term;
            if term.abs() < 1e-14 * total.abs() && i > 10 {
                break;
            }
        }
    }
    Ok((out[0], out[1]))
}

/// Large-n collective error `(1 - s - (L+ - L-)/(2n)) / 2`.
pub fn pe_opt_asymptotic(alpha0: f64, mu: f64, n: u64) -> Result<f64> {
    let (lp, lm) = lambda2_pm(alpha0, mu)?;
    Ok(known_amplitude_error(alpha0) - (lp - lm) / (4.0 * n as f64))
}

/// Second-order coefficient of the known-amplitude error averaged over the prior.
pub fn lambda_star(alpha0: f64, mu: f64) -> Result<f64> {
    if !(alpha0 > 0.0) {
        return Err(Error::Singular(format!("baseline coefficient needs alpha0 > 0, got {alpha0}")));
    }
    let x = alpha0 * alpha0;
    let e = (-x).exp();
    let num = mu * mu * (2.0 * (e - 1.0) + x * (2.0 - e));
    let den = 4.0 * x.exp_m1() * (-(-x).exp_m1()).sqrt();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeStarMode {
    Finite,
    Asymptotic,
}

/// Known-amplitude error averaged over the prior.
///
/// The finite mode integrates over the distance `rho = |sqrt(n) alpha0 + u|`
/// with the exact Rician radial density, which keeps the integrand smooth even
/// where the amplitude passes through zero.
pub fn pe_star(alpha0: f64, mu: f64, n: u64, mode: PeStarMode) -> Result<f64> {
    if !(alpha0 >= 0.0 && alpha0.is_finite()) || !(mu > 0.0) || n == 0 {
        return Err(invalid("pe_star needs alpha0 >= 0, mu > 0, n >= 1"));
    }
    match mode {
        PeStarMode::Asymptotic => Ok(known_amplitude_error(alpha0) + lambda_star(alpha0, mu)? / (2.0 * n as f64)),
        PeStarMode::Finite => {
            let nf = n as f64;
            let a = alpha0 * nf.sqrt();
            let m2 = mu * mu;
            let reach = 9.0 * mu;
            let lo = (a - reach).max(0.0);
            let hi = a + reach;
            let panels = (((hi - lo) / (0.25 * mu)).ceil() as usize).max(8);
            let rule = composite_legendre(16, panels, lo, hi)?;
            Ok(rule
                .iter()
                .map(|(rho, w)| {
                    let dens = 2.0 * rho / m2 * (-(rho - a).powi(2) / m2).exp() * bessel_i0_scaled(2.0 * rho * a / m2);
                    w * dens * 0.5 * one_minus_sqrt_one_minus_exp(rho * rho / nf)
                })
                .sum())
        }
    }
}

/// Limiting collective excess risk for an infinitely wide prior.
pub fn excess_risk_opt(alpha0: f64) -> Result<f64> {
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(invalid(format!("alpha0 must be positive, got {alpha0}")));
    }
    let x = alpha0 * alpha0;
    let e = (-x).exp();
    let m = -(-x).exp_m1();
    Ok(x * e * (2.0 - e) / (16.0 * m.powf(1.5)))
}

/// Collective excess risk at finite prior width.
pub fn excess_risk_opt_finite_mu(alpha0: f64, mu: f64) -> Result<f64> {
    let (lp, lm) = lambda2_pm(alpha0, mu)?;
    Ok(-(lp - lm) / 4.0 - lambda_star(alpha0, mu)? / 2.0)
}

/// Collective error from dense Fock-space averaged states.
pub fn pe_opt_finite(model: &LocalModel, dims: [usize; 2]) -> Result<f64> {
    let s1 = averaged_sigma1(model, dims)?;
    let s2 = averaged_sigma2_exact(model, dims)?;
    helstrom_error(&s1, &s2, 0.5)
}

/// Settings for [`pe_opt_gram`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramOptions {
    /// Thermal tail dropped by the truncation.
    pub tail: f64,
    /// Overlaps below this are treated as zero.
    pub overlap_floor: f64,
    /// Initial diagonal shift for the Gram factorization.
    pub regularization: f64,
}

impl Default for GramOptions {
    fn default() -> Self {
        Self { tail: 1e-11, overlap_floor: 1e-17, regularization: 1e-12 }
    }
}

/// Diagnostics of a Gram-matrix evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramReport {
    pub error: f64,
    pub levels: usize,
    pub bandwidth: usize,
    pub regularization: f64,
}

/// Collective error without a Fock cutoff on the auxiliary mode.
///
/// Both averaged states are sums of rank-one terms: `c_k [k (x) -a]` and
/// `p_N [psi_N]`, where `psi_N` is the beam-splitter image of `|N>|0>`.
/// Cross overlaps vanish unless `0 <= N - k <= J` for a small `J`, so the
/// Gram matrix of all vectors is banded once the two families are
/// interleaved. The nonzero spectrum of `sum w_i [x_i]` equals that of
/// `L^T W L` with `G = L L^T`, which keeps the work at `O(bw * K^2)` for
/// thousands of levels.
pub fn pe_opt_gram(model: &LocalModel, opts: GramOptions) -> Result<GramReport> {
    let a = model.alpha0();
    let nf = model.n() as f64;
    let m2 = model.mu() * model.mu();
    let m2n = m2 * (1.0 + 1.0 / nf);
    let levels = thermal_cutoff(model.mu() * (1.0 + 1.0 / nf).sqrt(), opts.tail).max(2);
    let c = thermal_coefficients(model.mu(), levels);
    let p = thermal_coefficients(m2n.sqrt(), levels);

    // widest j that can still carry an overlap above the floor
    let ln_floor = opts.overlap_floor.ln();
    let rate = a * (levels as f64 / nf).sqrt();
    let mut reach = 0usize;
    if a > 0.0 {
        let mut j = 1usize;
        loop {
            let lb = -0.5 * a * a + j as f64 * rate.ln() - ln_factorial(j as u64);
            if lb > ln_floor {
                reach = j;
            } else if j as f64 > rate {
                break;
            }
            j += 1;
        }
    }

    let lf: Vec<f64> = (0..=levels).map(|k| ln_factorial(k as u64)).collect();
    let ln_shrink = -0.5 * (1.0 + 1.0 / nf).ln();
    let overlap = |k: usize, big: usize| -> f64 {
        let j = big - k;
        let mut ln = -0.5 * a * a - 0.5 * lf[j] + 0.5 * (lf[big] - lf[j] - lf[k]) - 0.5 * j as f64 * nf.ln()
            + big as f64 * ln_shrink;
        if j > 0 {
            if a == 0.0 {
                return 0.0;
            }
            ln += j as f64 * a.ln();
        }
        let v = ln.exp();
        if j % 2 == 1 {
            -v
        } else {
            v
        }
    };

    // interleave: phi_k sits beside psi_{k + reach/2}
    let half = reach / 2;
    let mut pos_phi = vec![0usize; levels];
    let mut pos_psi = vec![0usize; levels];
    let (mut i, mut j, mut pos) = (0usize, 0usize, 0usize);
    while i < levels || j < levels {
        let take_phi = j >= levels || (i < levels && i + half <= j);
        if take_phi {
            pos_phi[i] = pos;
            i += 1;
        } else {
            pos_psi[j] = pos;
            j += 1;
        }
        pos += 1;
    }
    let size = 2 * levels;
    let mut bw = 1;
    for k in 0..levels {
        for big in k..(k + reach + 1).min(levels) {
            bw = bw.max(pos_phi[k].abs_diff(pos_psi[big]));
        }
    }

    let mut gram = SymBand::zeros(size, bw);
    let mut weights = vec![0.0; size];
    for k in 0..levels {
        weights[pos_phi[k]] = c[k];
        weights[pos_psi[k]] = -p[k];
    }
    for k in 0..levels {
        for big in k..(k + reach + 1).min(levels) {
            let v = overlap(k, big);
            if v.abs() > opts.overlap_floor {
                gram.set(pos_phi[k], pos_psi[big], v);
            }
        }
    }

    let mut eta = opts.regularization;
    let chol = loop {
        let mut g = gram.clone();
        for d in 0..size {
            g.set(d, d, 1.0 + eta);
        }
        match g.cholesky() {
            Ok(l) => break l,
            Err(e) if eta >= 1e-8 => return Err(e),
            Err(_) => eta *= 10.0,
        }
    };
    let eig = chol.congruence(&weights).eigenvalues()?;
    let norm: f64 = eig.iter().map(|l| l.abs()).sum();
    Ok(GramReport { error: 0.5 * (1.0 - 0.5 * norm), levels, bandwidth: bw, regularization: eta })
}

/// `(4 f(4n) - f(n)) / 3`: removes the leading `1/n` term of a sequence in `1/n`.
pub fn richardson(at_n: f64, at_4n: f64) -> f64 {
    (4.0 * at_4n - at_n) / 3.0
}

/// `n (P_opt - P*)` at the model's `n`, using the Gram path and the radial baseline.
pub fn excess_risk_opt_at(model: &LocalModel, opts: GramOptions) -> Result<f64> {
    let pe = pe_opt_gram(model, opts)?.error;
    let star = pe_star(model.alpha0(), model.mu(), model.n(), PeStarMode::Finite)?;
    Ok(model.n() as f64 * (pe - star))
}

/// Richardson-extrapolated finite-n collective excess risk from `n` and `4n`.
pub fn excess_risk_opt_extrapolated(model: &LocalModel, opts: GramOptions) -> Result<f64> {
    let f1 = excess_risk_opt_at(model, opts)?;
    let f4 = excess_risk_opt_at(&model.with_n(4 * model.n())?, opts)?;
    Ok(richardson(f1, f4))
}

/// One point of the excess-risk comparison curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskCurvePoint {
    pub alpha0: f64,
    pub r_opt: f64,
    pub r_eand: f64,
    pub r_star: f64,
}

impl RiskCurvePoint {
    pub fn compute(alpha0: f64) -> Result<Self> {
        let r_star = crate::eand::optimal_squeezing(alpha0)?;
        Ok(Self {
            alpha0,
            r_opt: excess_risk_opt(alpha0)?,
            r_eand: crate::eand::excess_risk_eand(alpha0, r_star)?,
            r_star,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.r_eand / self.r_opt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::trace_norm;
    use crate::localmodel::averaged_sigma2_exact;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn herm(m: DMatrix<C64>) -> FockMatrix {
        let n = m.nrows();
        FockMatrix::hermitian(vec![n], (&m + m.adjoint()).scale(0.5), 0.0).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
        DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn spectral_norm(m: &FockMatrix) -> f64 {
        let (v, _) = hermitian_eigen(m).unwrap();
        v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn no_perturbation_gives_no_corrections() {
        let a =
            herm(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-2.0, 0.0)])));
        let z = FockMatrix::hermitian(vec![2], DMatrix::zeros(2, 2), 0.0).unwrap();
        let r = second_order_perturbation(&a, &z, &z).unwrap();
        assert!(r.first_order.iter().chain(&r.second_order).all(|&v| v == 0.0));
    }

    #[test]
    fn two_level_textbook_case() {
        let b12 = C64::new(0.3, 0.4);
        let a = herm(DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        ));
        let b = herm(DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), b12, b12.conj(), C64::new(0.0, 0.0)]));
        let z = FockMatrix::hermitian(vec![2], DMatrix::zeros(2, 2), 0.0).unwrap();
        let r = second_order_perturbation(&a, &b, &z).unwrap();
        // ascending: level -1 then level +1
        assert!((r.second_order[0] + 0.5 * b12.norm_sqr()).abs() < 1e-15);
        assert!((r.second_order[1] - 0.5 * b12.norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn degeneracy_coupled_by_b_is_rejected() {
        let a = herm(DMatrix::identity(2, 2));
        let b = herm(DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ));
        let z = FockMatrix::hermitian(vec![2], DMatrix::zeros(2, 2), 0.0).unwrap();
        assert!(matches!(second_order_perturbation(&a, &b, &z), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn random_triples_match_exact_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eps = 1e-3;
        for trial in 0..100 {
            let n = 2 + trial % 5;
            // well-separated spectrum in a random basis
            let mut spectrum = Vec::new();
            let mut x = rng.random_range(-3.0..-1.0);
            for _ in 0..n {
                spectrum.push(x);
                x += rng.random_range(1.0..2.0);
            }
            let q = random_matrix(&mut rng, n).qr().q();
            let d =
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, spectrum.iter().map(|&s| C64::new(s, 0.0))));
            let a = herm(&q * d * q.adjoint());
            let b = herm(random_matrix(&mut rng, n));
            let c = herm(random_matrix(&mut rng, n));
            let b = b.scale(1.0 / spectral_norm(&b));
            let c = c.scale(1.0 / spectral_norm(&c));
            let r = second_order_perturbation(&a, &b, &c).unwrap();
            let full = a.combine(1.0, &b, eps).unwrap().combine(1.0, &c, eps * eps).unwrap();
            let (mut exact, _) = hermitian_eigen(&full).unwrap();
            exact.sort_by(f64::total_cmp);
            for k in 0..n {
                let approx = r.zero_order[k] + eps * r.first_order[k] + eps * eps * r.second_order[k];
                assert!((approx - exact[k]).abs() < 1e-8, "trial {trial} level {k}: {approx} vs {}", exact[k]);
            }
        }
    }

    #[test]
    fn eigenstructure_overlaps() {
        let e = helstrom_eigenstructure(1.0).unwrap();
        assert!(e.v_plus.inner(&e.v_minus).norm() < 1e-12);
        let o = e.overlaps;
        assert!((o.vac[0].powi(2) - 0.102470).abs() < 1e-6);
        assert!((o.vac[1].powi(2) - 0.897530).abs() < 1e-6);
        assert!((o.one_null - 0.418023).abs() < 1e-6);
        assert!(helstrom_eigenstructure(0.0).is_err());

        // against a numerical eigensolve of [-a] - [0]
        for a in [0.3, 1.0, 2.2] {
            let e = helstrom_eigenstructure(a).unwrap();
            let dim = e.v_plus.dim();
            let d = coherent_ket(ComplexAmplitude::real(-a).unwrap(), dim)
                .unwrap()
                .projector()
                .combine(1.0, &coherent_ket(ComplexAmplitude::ZERO, dim).unwrap().projector(), -1.0)
                .unwrap();
            let (vals, vecs) = hermitian_eigen(&d).unwrap();
            let top = (0..dim).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
            let bot = (0..dim).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
            assert!((vals[top] - e.overlaps.gap).abs() < 1e-12);
            assert!((vals[bot] + e.overlaps.gap).abs() < 1e-12);
            for (col, ket, idx) in [(top, &e.v_plus, 0), (bot, &e.v_minus, 1)] {
                let v = vecs.column(col);
                let sign = if (v[0] * ket.entries()[0].conj()).re < 0.0 { -1.0 } else { 1.0 };
                for k in 0..dim {
                    assert!((v[k] * sign - ket.entries()[k]).norm() < 1e-10);
                }
                assert!((ket.entries()[0].re - e.overlaps.vac[idx]).abs() < 1e-12);
                assert!((ket.entries()[1].re - e.overlaps.one[idx]).abs() < 1e-12);
                assert!((ket.entries()[2].re - e.overlaps.two[idx]).abs() < 1e-12);
            }
            let nul = 1.0 - e.overlaps.one[0].powi(2) - e.overlaps.one[1].powi(2);
            assert!((nul - e.overlaps.one_null).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda2_closed_form_matches_series() {
        for (a, mu) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.7)] {
            let (lp, lm) = lambda2_pm(a, mu).unwrap();
            let (sp, sm) = lambda2_series(a, mu, 200).unwrap();
            assert_eq!(lp, -lm);
            assert!((lp - sp).abs() < 1e-8 * lp.abs(), "{lp} vs {sp}");
            assert!((lm - sm).abs() < 1e-8 * lm.abs());
        }
        let small = lambda2_pm(1.0, 1e-3).unwrap().0;
        let smaller = lambda2_pm(1.0, 1e-3 / 2f64.sqrt()).unwrap().0;
        assert!((small / smaller - 2.0).abs() < 1e-5);
        assert!(lambda2_pm(0.0, 1.0).is_err());
    }

    #[test]
    fn lambda_star_value_and_derivative_form() {
        let ls = lambda_star(1.0, 1.0).unwrap();
        // independent route: -(h' m2 + h'' x q / 2) with h(y) = sqrt(1 - e^{-y}), m2 = mu^2, q = 2 mu^2
        let h = |y: f64| (1.0 - (-y).exp()).sqrt();
        let d = 1e-4;
        let h1 = (h(1.0 + d) - h(1.0 - d)) / (2.0 * d);
        let h2 = (h(1.0 + d) - 2.0 * h(1.0) + h(1.0 - d)) / (d * d);
        let alt = -(h1 + 0.5 * h2 * 2.0);
        assert!((ls - alt).abs() < 1e-7);
        assert!((ls - 0.0673211).abs() < 1e-6);
    }

    #[test]
    fn opt_excess_risk_limits() {
        assert!((excess_risk_opt(1.0).unwrap() - 0.074669).abs() < 1e-6);
        assert!(excess_risk_opt(6.0).unwrap() < 1e-5);
        assert!((1e-3 * excess_risk_opt(1e-3).unwrap() * 16.0 - 1.0).abs() < 1e-4);
        assert!(excess_risk_opt(0.0).is_err());
        let big = excess_risk_opt_finite_mu(1.0, 1e3).unwrap();
        assert!((big / excess_risk_opt(1.0).unwrap() - 1.0).abs() < 1e-3);
        let sweep: Vec<f64> =
            [1.0, 4.0, 16.0, 64.0].iter().map(|&m| excess_risk_opt_finite_mu(1.0, m).unwrap()).collect();
        assert!(sweep.windows(2).all(|w| w[1] > w[0]));
        assert!(sweep[3] < excess_risk_opt(1.0).unwrap());
    }

    #[test]
    fn asymptotic_error_below_half() {
        for a in [0.05, 0.5, 1.0, 3.0] {
            assert!(pe_opt_asymptotic(a, 1.0, 10).unwrap() < 0.5);
        }
        let far = pe_opt_asymptotic(1.0, 1.0, 1 << 50).unwrap();
        assert!((far - known_amplitude_error(1.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_order_sign_structure() {
        let m = LocalModel::new(1.0, 1.0, 1_000_000).unwrap();
        let dims = [52, 16];
        let (a, _, _) = collective_expansion(&m, dims).unwrap();
        let (mut vals, _) = hermitian_eigen(&a).unwrap();
        vals.sort_by(f64::total_cmp);
        let c = thermal_coefficients(1.0, 52);
        let s = (1.0 - (-1f64).exp()).sqrt();
        let mut pos: Vec<f64> = vals.iter().copied().filter(|&v| v > 1e-14).collect();
        pos.sort_by(|x, y| y.total_cmp(x));
        for i in 0..=30 {
            assert!((pos[i] - c[i] * s).abs() < 1e-12, "level {i}");
        }
        let neg: f64 = vals.iter().filter(|&&v| v < -1e-14).sum();
        assert!((neg + s * c.iter().take(46).sum::<f64>()).abs() < 1e-10);
        let full: f64 = thermal_coefficients(1.0, 400).iter().sum();
        assert!((full * s - s).abs() < 1e-10);
    }

    #[test]
    fn assembled_expansion_has_no_first_order_and_matches_trace_norm() {
        let m = LocalModel::new(1.0, 1.0, 1000).unwrap();
        let dims = [30, 14];
        let (a, b, c) = collective_expansion(&m, dims).unwrap();
        let r = second_order_perturbation(&a, &b, &c).unwrap();
        assert!(r.first_order.iter().all(|g| g.abs() < 1e-10));
        // sum over levels of the second-order shifts reproduces the closed form
        let (lp, lm) = lambda2_pm(1.0, 1.0).unwrap();
        let pos: f64 = r.zero_order.iter().zip(&r.second_order).filter(|(g, _)| **g > 1e-13).map(|(_, s)| s).sum();
        let neg: f64 = r.zero_order.iter().zip(&r.second_order).filter(|(g, _)| **g < -1e-13).map(|(_, s)| s).sum();
        assert!((pos - lp).abs() < 1e-6, "{pos} vs {lp}");
        assert!((neg - lm).abs() < 1e-6);

        for n in [1e3f64, 1e4] {
            let model = LocalModel::new(1.0, 1.0, n as u64).unwrap();
            let exact = averaged_sigma1(&model, dims)
                .unwrap()
                .combine(1.0, &averaged_sigma2_exact(&model, dims).unwrap(), -1.0)
                .unwrap();
            let want = trace_norm(&exact).unwrap();
            let got = r.trace_norm_at(1.0 / n.sqrt());
            assert!((want - got).abs() < 5.0 * n.powf(-1.5), "n={n}: {want} vs {got}");
        }
    }

    #[test]
    fn gram_path_matches_dense_fock() {
        for (a, n) in [(1.0, 100u64), (0.4, 30), (2.0, 500)] {
            let m = LocalModel::new(a, 1.0, n).unwrap();
            let dense = pe_opt_finite(&m, [48, 24]).unwrap();
            let gram = pe_opt_gram(&m, GramOptions::default()).unwrap();
            assert!((dense - gram.error).abs() < 1e-11, "a={a} n={n}: {dense} vs {}", gram.error);
        }
        let m = LocalModel::new(1.0, 1.0, 100).unwrap();
        assert!((pe_opt_gram(&m, GramOptions::default()).unwrap().error - 0.1032953358969).abs() < 1e-12);
    }

    #[test]
    fn finite_collective_error_examples() {
        let m = LocalModel::new(1.0, 1.0, 1_000_000).unwrap();
        let lead = known_amplitude_error(1.0);
        let pe = pe_opt_gram(&m, GramOptions::default()).unwrap().error;
        assert!((pe - lead).abs() < 2e-6);
        assert!((lead - 0.102470).abs() < 1e-6);

        // identical hypotheses up to O(1/sqrt(n))
        let gap = |n| 0.5 - pe_opt_gram(&LocalModel::new(0.0, 1.0, n).unwrap(), GramOptions::default()).unwrap().error;
        let (g3, g5) = (gap(1000), gap(100_000));
        assert!(g3 > 0.0 && g5 > 0.0 && g5 < g3 && g5 < 2e-3, "{g3} {g5}");
    }

    #[test]
    fn collective_one_over_n_coefficient() {
        let opts = GramOptions::default();
        let f = |n: u64| {
            let m = LocalModel::new(1.0, 1.0, n).unwrap();
            n as f64 * (pe_opt_gram(&m, opts).unwrap().error - known_amplitude_error(1.0))
        };
        let (lp, lm) = lambda2_pm(1.0, 1.0).unwrap();
        let want = -(lp - lm) / 4.0;
        let ext = richardson(f(10_000), f(40_000));
        assert!((ext / want - 1.0).abs() < 0.02, "{ext} vs {want}");
        let ext = richardson(f(1000), f(4000));
        assert!((ext / want - 1.0).abs() < 0.02);

        let m = LocalModel::new(1.0, 1.0, 100_000).unwrap();
        let pe = pe_opt_gram(&m, opts).unwrap().error;
        assert!((pe - pe_opt_asymptotic(1.0, 1.0, 100_000).unwrap()).abs() < 5e-9);
    }

    #[test]
    fn baseline_finite_vs_asymptotic() {
        let lead = known_amplitude_error(1.0);
        let far = pe_star(1.0, 1.0, 1 << 40, PeStarMode::Finite).unwrap();
        assert!((far - lead).abs() < 1e-11);
        let n = 100_000u64;
        let fin = pe_star(1.0, 1.0, n, PeStarMode::Finite).unwrap();
        let coef = n as f64 * (fin - lead);
        let want = lambda_star(1.0, 1.0).unwrap() / 2.0;
        assert!((coef / want - 1.0).abs() < 0.02);

        // the radial form agrees with a plain prior quadrature at small n
        let g = crate::localmodel::build_quadrature(1.0, 80).unwrap();
        let n = 4u64;
        let direct: f64 = g.integrate(|u| {
            let z = u.scale(1.0 / (n as f64).sqrt()) + ComplexAmplitude::real(0.3).unwrap();
            known_amplitude_error(z.norm_sqr().sqrt())
        });
        let radial = pe_star(0.3, 1.0, n, PeStarMode::Finite).unwrap();
        assert!((direct - radial).abs() < 1e-4, "{direct} vs {radial}");
    }

    #[test]
    fn finite_mu_risk_matches_finite_n() {
        let m = LocalModel::new(1.0, 1.0, 100_000).unwrap();
        let r = excess_risk_opt_at(&m, GramOptions::default()).unwrap();
        let want = excess_risk_opt_finite_mu(1.0, 1.0).unwrap();
        assert!((r / want - 1.0).abs() < 0.03, "{r} vs {want}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn opt_excess_risk_positive(a in 0.01..8.0f64) {
            let r = excess_risk_opt(a).unwrap();
            prop_assert!(r > 0.0 && r.is_finite());
        }

        #[test]
        fn lambda2_antisymmetric(a in 0.05..5.0f64, mu in 0.1..50.0f64) {
            let (p, m) = lambda2_pm(a, mu).unwrap();
            prop_assert_eq!(p, -m);
        }
    }
}
