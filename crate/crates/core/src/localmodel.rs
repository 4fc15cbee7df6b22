//! Local Gaussian-shift model: prior over the local parameter, the complex-plane
//! quadrature, thermal weights and the averaged two-mode states in the displaced frame.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::fock::{coherent_ket, tensor, ComplexAmplitude, FockMatrix, C64};
use crate::quadrature::gauss_hermite;
use crate::special::{ln_factorial, poisson_cutoff, poisson_tail};

/// Default Gauss–Hermite order per coordinate for prior averages.
pub const DEFAULT_ORDER: usize = 40;

/// Averaged states whose truncation loses more than this are rejected.
pub const MAX_TRACE_DEFICIT: f64 = 1e-4;

/// Signal amplitude `alpha0 + u/sqrt(n)` with `u` drawn from a Gaussian of width `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalModel {
    alpha0: f64,
    mu: f64,
    n: u64,
}

impl LocalModel {
    pub fn new(alpha0: f64, mu: f64, n: u64) -> Result<Self> {
        if !(alpha0.is_finite() && alpha0 >= 0.0) {
            return Err(invalid(format!("alpha0 must be a finite nonnegative real, got {alpha0}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        if n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        Ok(Self { alpha0, mu, n })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(self.alpha0, self.mu, n)
    }

    /// Error probability when the amplitude is exactly `alpha0`.
    pub fn known_amplitude_error(&self) -> f64 {
        known_amplitude_error(self.alpha0)
    }

    /// Truncation giving a total tail below `tol` for both averaged states.
    pub fn default_dims(&self, tol: f64) -> [usize; 2] {
        let d1 = thermal_cutoff(self.mu, tol);
        let u_max = self.mu * (1.0 / tol).ln().sqrt();
        let amp = self.alpha0.max(u_max / (self.n as f64).sqrt());
        [d1, poisson_cutoff(amp * amp, tol).max(2)]
    }
}

/// `(1 - sqrt(1 - e^{-a^2})) / 2`.
pub fn known_amplitude_error(alpha0: f64) -> f64 {
    0.5 * crate::special::one_minus_sqrt_one_minus_exp(alpha0 * alpha0)
}

/// Nodes and probability weights for averages over the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<ComplexAmplitude>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureGrid {
    pub fn iter(&self) -> impl Iterator<Item = (ComplexAmplitude, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Weighted sum of `f` over the grid.
    pub fn integrate<T, F>(&self, f: F) -> T
    where
        F: Fn(ComplexAmplitude) -> T,
        T: std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    {
        self.iter().map(|(u, w)| f(u) * w).sum()
    }
}

/// `exp(-|u|^2 / mu^2) / (pi mu^2)`.
///
/// The prior is written with `u^2` for complex `u`; only `|u|^2` gives a
/// normalized density with the stated second moment, so that is what is used.
pub fn gaussian_prior_pdf(u: ComplexAmplitude, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(invalid(format!("mu must be positive, got {mu}")));
    }
    let m2 = mu * mu;
    Ok((-u.norm_sqr() / m2).exp() / (std::f64::consts::PI * m2))
}

/// Tensor Gauss–Hermite grid for the prior of width `mu`.
pub fn build_quadrature(mu: f64, order: usize) -> Result<QuadratureGrid> {
    if !(mu > 0.0) {
        return Err(invalid(format!("mu must be positive, got {mu}")));
    }
    let var = 0.5 * mu * mu;
    gaussian_grid(C64::new(0.0, 0.0), var, var, order)
}

/// Product Gaussian grid with the given mean and per-coordinate variances.
pub fn gaussian_grid(mean: C64, var_re: f64, var_im: f64, order: usize) -> Result<QuadratureGrid> {
    if order < 2 {
        return Err(invalid(format!("quadrature order must be at least 2, got {order}")));
    }
    if !(var_re > 0.0 && var_im > 0.0) {
        return Err(invalid("grid variances must be positive"));
    }
    let rule = gauss_hermite(order)?;
    let (s1, s2) = ((2.0 * var_re).sqrt(), (2.0 * var_im).sqrt());
    let mut nodes = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for (x, wx) in rule.iter() {
        for (y, wy) in rule.iter() {
            nodes.push(ComplexAmplitude::new(mean.re + s1 * x, mean.im + s2 * y)?);
            weights.push(wx * wy / std::f64::consts::PI);
        }
    }
    Ok(QuadratureGrid { nodes, weights, order })
}

/// Thermal weights `mu^{2k} / (mu^2 + 1)^{k+1}` for `k < dim`.
pub fn thermal_coefficients(mu: f64, dim: usize) -> Vec<f64> {
    let m2 = mu * mu;
    let ratio = m2 / (m2 + 1.0);
    let mut c = 1.0 / (m2 + 1.0);
    (0..dim)
        .map(|_| {
            let v = c;
            c *= ratio;
            v
        })
        .collect()
}

/// Mass of the thermal weights at or beyond `dim`.
pub fn thermal_tail(mu: f64, dim: usize) -> f64 {
    let m2 = mu * mu;
    (m2 / (m2 + 1.0)).powi(dim as i32)
}

/// Smallest `dim` with thermal tail below `tol`.
pub fn thermal_cutoff(mu: f64, tol: f64) -> usize {
    let m2 = mu * mu;
    let d = (tol.ln() / (m2 / (m2 + 1.0)).ln()).ceil();
    (d as usize).max(1)
}

fn check_deficit(deficit: f64) -> Result<f64> {
    if deficit > MAX_TRACE_DEFICIT {
        Err(Error::Truncation { deficit, limit: MAX_TRACE_DEFICIT })
    } else {
        Ok(deficit)
    }
}

fn check_dims(dims: [usize; 2]) -> Result<()> {
    if dims[0] == 0 || dims[1] == 0 {
        return Err(invalid("mode dimensions must be positive"));
    }
    Ok(())
}

/// Hypothesis-one average: thermal first mode times the vacuum shifted to `-alpha0`.
pub fn averaged_sigma1(model: &LocalModel, dims: [usize; 2]) -> Result<FockMatrix> {
    check_dims(dims)?;
    let c = thermal_coefficients(model.mu, dims[0]);
    let t1 = thermal_tail(model.mu, dims[0]);
    let thermal = FockMatrix::diagonal(&c, t1);
    let shifted = coherent_ket(ComplexAmplitude::real(-model.alpha0)?, dims[1])?.projector();
    let out = tensor(&thermal, &shifted);
    check_deficit(out.trace_deficit())?;
    Ok(out)
}

/// Hypothesis-two average over the prior by quadrature (default order).
pub fn averaged_sigma2(model: &LocalModel, dims: [usize; 2]) -> Result<FockMatrix> {
    averaged_sigma2_on(model, dims, &build_quadrature(model.mu, DEFAULT_ORDER)?)
}

/// Hypothesis-two average `sum_i w_i [u_i] (x) [u_i/sqrt(n)]` on a given grid.
pub fn averaged_sigma2_on(model: &LocalModel, dims: [usize; 2], grid: &QuadratureGrid) -> Result<FockMatrix> {
    check_dims(dims)?;
    let size = dims[0] * dims[1];
    let inv_sqrt_n = 1.0 / (model.n as f64).sqrt();
    let mut acc = DMatrix::<C64>::zeros(size, size);
    for (u, w) in grid.iter() {
        let a = coherent_ket(u, dims[0])?;
        let b = coherent_ket(u.scale(inv_sqrt_n), dims[1])?;
        let psi: DVector<C64> = a.entries().kronecker(b.entries());
        acc.gerc(C64::new(w, 0.0), &psi, &psi, C64::new(1.0, 0.0));
    }
    let deficit = 1.0 - acc.trace().re;
    let out = FockMatrix::hermitian(vec![dims[0], dims[1]], symmetrize(acc), deficit)?;
    check_deficit(deficit)?;
    Ok(out)
}

/// Hypothesis-two average from its exact Gaussian-integral entries.
///
/// Only entries with `k + j = k' + j'` survive the phase average; each is a
/// single Gamma integral, so no quadrature error enters.
pub fn averaged_sigma2_exact(model: &LocalModel, dims: [usize; 2]) -> Result<FockMatrix> {
    check_dims(dims)?;
    let [d1, d2] = dims;
    let m2 = model.mu * model.mu;
    let nf = model.n as f64;
    let s = 1.0 / m2 + 1.0 + 1.0 / nf;
    let lf: Vec<f64> = (0..d1 + d2).map(|k| ln_factorial(k as u64)).collect();
    let size = d1 * d2;
    let mut m = DMatrix::<C64>::zeros(size, size);
    for k in 0..d1 {
        for j in 0..d2 {
            let total = k + j;
            for k2 in total.saturating_sub(d2 - 1)..=total.min(d1 - 1) {
                let j2 = total - k2;
                let ln = lf[total]
                    - (total as f64 + 1.0) * s.ln()
                    - m2.ln()
                    - 0.5 * (lf[k] + lf[k2] + lf[j] + lf[j2])
                    - 0.5 * (j + j2) as f64 * nf.ln();
                m[(k * d2 + j, k2 * d2 + j2)] = C64::new(ln.exp(), 0.0);
            }
        }
    }
    let deficit = 1.0 - m.trace().re;
    let out = FockMatrix::hermitian(vec![d1, d2], m, deficit)?;
    check_deficit(deficit)?;
    Ok(out)
}

/// Prior moment ladder `int G(u) u^a conj(u)^b [u] d^2u` on one truncated mode.
///
/// Entry `|k><k'|` is nonzero only for `k + a = k' + b`, where it equals
/// `(k+a)! / (mu^2 t^{k+a+1} sqrt(k! k'!))` with `t = 1 + 1/mu^2`.
pub fn prior_moment_operator(mu: f64, a: usize, b: usize, dim: usize) -> DMatrix<C64> {
    let m2 = mu * mu;
    let t = 1.0 + 1.0 / m2;
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        if k + a < b {
            continue;
        }
        let k2 = k + a - b;
        if k2 >= dim {
            continue;
        }
        let p = k + a;
        let ln = ln_factorial(p as u64)
            - m2.ln()
            - (p as f64 + 1.0) * t.ln()
            - 0.5 * (ln_factorial(k as u64) + ln_factorial(k2 as u64));
        m[(k, k2)] = C64::new(ln.exp(), 0.0);
    }
    m
}

/// Coefficients of the `1/sqrt(n)` expansion of the hypothesis-two average:
/// zeroth, first and second order operators.
pub fn sigma2_expansion_terms(model: &LocalModel, dims: [usize; 2]) -> Result<(FockMatrix, FockMatrix, FockMatrix)> {
    check_dims(dims)?;
    let [d1, d2] = dims;
    if d2 < 3 {
        return Err(invalid("second mode needs at least three levels for the expansion"));
    }
    let mu = model.mu;
    let unit = |i: usize, j: usize| {
        let mut e = DMatrix::<C64>::zeros(d2, d2);
        e[(i, j)] = C64::new(1.0, 0.0);
        e
    };
    let mom = |a, b| prior_moment_operator(mu, a, b, d1);
    let kron = |x: DMatrix<C64>, y: DMatrix<C64>| x.kronecker(&y);

    let zeroth = kron(mom(0, 0), unit(0, 0));
    let first = kron(mom(1, 0), unit(1, 0)) + kron(mom(0, 1), unit(0, 1));
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let second = kron(mom(1, 1), unit(1, 1) - unit(0, 0))
        + (kron(mom(2, 0), unit(2, 0)) + kron(mom(0, 2), unit(0, 2))).scale(r2);

    let dims = vec![d1, d2];
    let deficit = thermal_tail(mu, d1);
    Ok((
        FockMatrix::hermitian(dims.clone(), zeroth, deficit)?,
        FockMatrix::hermitian(dims.clone(), first, 0.0)?,
        FockMatrix::hermitian(dims, second, 0.0)?,
    ))
}

fn symmetrize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()).scale(0.5)
}

/// Probability that a coherent state of amplitude `amp` lies beyond `dim`.
pub fn coherent_tail(amp: f64, dim: usize) -> f64 {
    poisson_tail(amp * amp, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::trace_norm;

    type Ladder = (usize, usize, fn(C64) -> C64);

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn model(a: f64, mu: f64, n: u64) -> LocalModel {
        LocalModel::new(a, mu, n).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(LocalModel::new(-0.1, 1.0, 1).is_err());
        assert!(LocalModel::new(1.0, 0.0, 1).is_err());
        assert!(LocalModel::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn prior_pdf_values() {
        let p = gaussian_prior_pdf(ComplexAmplitude::ZERO, 1.0).unwrap();
        assert!((p - 1.0 / std::f64::consts::PI).abs() < 1e-16);
        assert!(gaussian_prior_pdf(ComplexAmplitude::ZERO, 0.0).is_err());

        // normalization and second moment on a wider unrelated grid
        for (mu, want_m2) in [(2.0, 4.0), (1.5, 2.25)] {
            let g = gaussian_grid(C64::new(0.0, 0.0), mu * mu, mu * mu, 60).unwrap();
            let ref_pdf = |u: ComplexAmplitude| gaussian_prior_pdf(u, 2f64.sqrt() * mu).unwrap();
            let norm: f64 = g.integrate(|u| gaussian_prior_pdf(u, mu).unwrap() / ref_pdf(u));
            let m2: f64 = g.integrate(|u| u.norm_sqr() * gaussian_prior_pdf(u, mu).unwrap() / ref_pdf(u));
            assert!((norm - 1.0).abs() < 1e-10);
            assert!((m2 - want_m2).abs() < 1e-8);
        }
    }

    #[test]
    fn quadrature_basic_moments() {
        let g = build_quadrature(1.0, 20).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let m1: f64 = g.integrate(|u| 2.0 * u.re());
        let m2: f64 = g.integrate(|u| (2.0 * u.re()).powi(2));
        assert!(m1.abs() < 1e-12);
        assert!((m2 - 2.0).abs() < 1e-10);
        assert!(build_quadrature(1.0, 1).is_err());
    }

    #[test]
    fn thermal_weights() {
        let c = thermal_coefficients(1.0, 3);
        assert_eq!(c, vec![0.5, 0.25, 0.125]);
        let c = thermal_coefficients(2.0, 400);
        let mean: f64 = c.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
        assert!((mean - 4.0).abs() < 1e-8);
        let c = thermal_coefficients(1.3, 25);
        let deficit = 1.0 - c.iter().sum::<f64>();
        assert!((deficit - thermal_tail(1.3, 25)).abs() < 1e-14);
        assert!(c.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn sigma1_marginals() {
        let m = model(1.0, 1.0, 100);
        let s1 = averaged_sigma1(&m, [30, 20]).unwrap();
        let first = s1.partial_trace(0).unwrap();
        let c = thermal_coefficients(1.0, 30);
        let norm2 = 1.0 - coherent_tail(1.0, 20);
        for k in 0..30 {
            assert!((first.get(k, k).re - c[k] * norm2).abs() < 1e-12);
        }
        let second = s1.partial_trace(1).unwrap();
        let want = coherent_ket(ComplexAmplitude::real(-1.0).unwrap(), 20).unwrap().projector();
        let tc: f64 = c.iter().sum();
        assert!(max_diff(second.entries(), &want.entries().scale(tc)) < 1e-12);

        let tiny = averaged_sigma1(&model(1.0, 1e-3, 10), [3, 20]).unwrap();
        assert!(tiny.partial_trace(0).unwrap().get(0, 0).re > 1.0 - 1e-5);
    }

    #[test]
    fn sigma1_matches_quadrature_of_definition() {
        let m = model(0.7, 1.0, 10);
        let dims = [24, 16];
        let g = build_quadrature(1.0, DEFAULT_ORDER).unwrap();
        let shifted = coherent_ket(ComplexAmplitude::real(-0.7).unwrap(), dims[1]).unwrap().projector();
        let mut acc = DMatrix::<C64>::zeros(dims[0], dims[0]);
        for (u, w) in g.iter() {
            acc += coherent_ket(u, dims[0]).unwrap().projector().entries().scale(w);
        }
        let want = acc.kronecker(shifted.entries());
        assert!(max_diff(averaged_sigma1(&m, dims).unwrap().entries(), &want) < 1e-8);
    }

    #[test]
    fn truncation_deficit_is_enforced() {
        let m = model(1.0, 3.0, 10);
        assert!(matches!(averaged_sigma1(&m, [5, 20]), Err(Error::Truncation { .. })));
    }

    #[test]
    fn sigma2_quadrature_matches_exact_and_marginals() {
        let m = model(1.0, 1.0, 100);
        let dims = [24, 8];
        let q = averaged_sigma2(&m, dims).unwrap();
        let e = averaged_sigma2_exact(&m, dims).unwrap();
        assert!(max_diff(q.entries(), e.entries()) < 1e-12);
        assert!((q.trace().re - (1.0 - q.trace_deficit())).abs() < 1e-10);

        let first = e.partial_trace(0).unwrap();
        let thermal = thermal_coefficients(1.0, 24);
        for k in 0..24 {
            for l in 0..24 {
                let v = first.get(k, l);
                if k == l {
                    // the second-mode truncation removes a sliver of mass
                    assert!((v.re - thermal[k]).abs() < 1e-10, "{k}");
                } else {
                    assert!(v.norm() < 1e-12);
                }
            }
        }
        q.check_density().unwrap();
    }

    #[test]
    fn sigma2_quadrature_converges_with_order() {
        let m = model(1.0, 1.0, 100);
        let dims = [16, 6];
        let a = averaged_sigma2_on(&m, dims, &build_quadrature(1.0, 40).unwrap()).unwrap();
        let b = averaged_sigma2_on(&m, dims, &build_quadrature(1.0, 80).unwrap()).unwrap();
        assert!(max_diff(a.entries(), b.entries()) < 1e-10);
    }

    #[test]
    fn sigma2_large_n_second_mode_is_vacuum() {
        let m = model(1.0, 1.0, 100_000_000);
        let s = averaged_sigma2_exact(&m, [30, 4]).unwrap();
        let second = s.partial_trace(1).unwrap();
        assert!(second.get(0, 0).re > 1.0 - 1e-6);
    }

    #[test]
    fn prior_moment_ladders_match_quadrature() {
        let mu = 1.0;
        let dim = 60;
        let g = build_quadrature(mu, DEFAULT_ORDER).unwrap();
        let cases: [Ladder; 5] = [
            (1, 0, |u| u),
            (0, 1, |u| u.conj()),
            (1, 1, |u| C64::new(u.norm_sqr(), 0.0)),
            (2, 0, |u| u * u),
            (0, 2, |u| u.conj() * u.conj()),
        ];
        for (a, b, f) in cases {
            let mut acc = DMatrix::<C64>::zeros(dim, dim);
            for (u, w) in g.iter() {
                let k = coherent_ket(u, dim).unwrap();
                acc += (k.entries() * k.entries().adjoint()) * (f(u.value()) * w);
            }
            let want = prior_moment_operator(mu, a, b, dim);
            assert!(max_diff(&acc, &want) < 1e-8, "moment ({a},{b})");
        }
        // first ladder is d_{k+1} = c_{k+1} sqrt(k+1) above the diagonal
        let c = thermal_coefficients(mu, dim);
        let d = prior_moment_operator(mu, 1, 0, dim);
        for k in 0..dim - 1 {
            assert!((d[(k, k + 1)].re - c[k + 1] * ((k + 1) as f64).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn expansion_terms_structure_and_residual() {
        let n = 10_000;
        let m = model(1.0, 1.0, n);
        let dims = [40, 8];
        let (z, f, s) = sigma2_expansion_terms(&m, dims).unwrap();
        let c = thermal_coefficients(1.0, 40);
        for k in 0..40 {
            for j in 0..8 {
                let i = k * 8 + j;
                let want = if j == 0 { c[k] } else { 0.0 };
                assert!((z.get(i, i).re - want).abs() < 1e-12);
            }
        }
        assert!(f.trace().norm() < 1e-15);

        let exact = averaged_sigma2_exact(&m, dims).unwrap();
        let nf = n as f64;
        let recon = z.combine(1.0, &f, 1.0 / nf.sqrt()).unwrap().combine(1.0, &s, 1.0 / nf).unwrap();
        let resid = exact.combine(1.0, &recon, -1.0).unwrap();
        let r = trace_norm(&resid).unwrap();
        assert!(r < 10.0 * nf.powf(-1.5), "residual {r:e}");
    }
}
