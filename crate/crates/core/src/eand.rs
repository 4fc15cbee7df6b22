//! Estimate-and-discriminate: squeezed heterodyne statistics, the Bayesian
//! local model, the posterior signal state, finite-n and asymptotic error
//! probabilities, the excess risk and its optimal squeezing, and a Monte Carlo
//! check of the finite-n error.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::collective::{eigen_overlaps, lambda_star, perturb_dense, PerturbationResult};
use crate::error::{invalid, Error, Result};
use crate::fock::{coherent_ket, helstrom_projector, trace_norm, ComplexAmplitude, FockMatrix, C64};
use crate::localmodel::{gaussian_grid, known_amplitude_error, thermal_coefficients, thermal_cutoff, LocalModel};
use crate::special::poisson_cutoff;

/// Posterior states whose truncation loses more than this are rejected.
pub const MAX_POSTERIOR_DEFICIT: f64 = 1e-6;

/// Squeezing `r` and direction `phi` of the generalized heterodyne measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeterodyneSettings {
    r: f64,
    phi: f64,
}

impl HeterodyneSettings {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && r.abs() < 20.0) {
            return Err(invalid(format!("squeezing must satisfy |r| < 20, got {r}")));
        }
        if !(0.0..std::f64::consts::PI).contains(&phi) {
            return Err(invalid(format!("squeezing angle must lie in [0, pi), got {phi}")));
        }
        Ok(Self { r, phi })
    }

    /// Squeezing along the real axis, the only orientation needed for real `alpha0`.
    pub fn along_real_axis(r: f64) -> Result<Self> {
        Self::new(r, 0.0)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    fn t(&self) -> f64 {
        self.r.tanh()
    }

    /// Outcome noise variances along and across the squeezing axis.
    pub fn noise_variances(&self) -> [f64; 2] {
        let t = self.t();
        [0.5 / (1.0 + t), 0.5 / (1.0 - t)]
    }

    fn require_real_axis(&self) -> Result<()> {
        if self.phi != 0.0 {
            Err(invalid("local posterior is defined for squeezing along the real axis (phi = 0)"))
        } else {
            Ok(())
        }
    }
}

/// Posterior moments `E[u]`, `E[|u|^2]`, `E[u^2]` of the local parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments {
    pub i1: C64,
    pub i2: f64,
    pub i3: C64,
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

/// `2 / sqrt(det(VA + VB)) exp(-d^T (VA + VB)^{-1} d)`, the overlap `tr(rho_A rho_B)`
/// of two Gaussian states in the convention where the vacuum covariance is the
/// identity and a coherent state `|a>` has mean `sqrt(2) (Re a, Im a)`.
pub fn gaussian_overlap(va: &Matrix2<f64>, da: &Vector2<f64>, vb: &Matrix2<f64>, db: &Vector2<f64>) -> Result<f64> {
    let s = va + vb;
    let det = s.determinant();
    let inv = s
        .try_inverse()
        .filter(|_| det > 0.0)
        .ok_or_else(|| Error::Numerical(format!("covariance sum is singular (det = {det:.3e})")))?;
    let d = da - db;
    Ok(2.0 / det.sqrt() * (-(d.transpose() * inv * d)[(0, 0)]).exp())
}

/// Covariance of a pure squeezed state with squeezing `r` along angle `phi`.
pub fn squeezed_covariance(r: f64, phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    let rot = Matrix2::new(c, -s, s, c);
    rot * Matrix2::new((-2.0 * r).exp(), 0.0, 0.0, (2.0 * r).exp()) * rot.transpose()
}

/// Phase-space mean vector of a coherent amplitude in the overlap convention.
pub fn mean_vector(a: C64) -> Vector2<f64> {
    Vector2::new(a.re, a.im) * 2f64.sqrt()
}

/// Density of the outcome `beta_bar` given `n` copies at amplitude `alpha`.
pub fn heterodyne_pdf(
    beta_bar: ComplexAmplitude,
    alpha: ComplexAmplitude,
    n: u64,
    settings: HeterodyneSettings,
) -> f64 {
    let d = alpha.value() * (n as f64).sqrt() - beta_bar.value();
    let rot = C64::from_polar(1.0, -2.0 * settings.phi);
    let t = settings.t();
    (-(d.norm_sqr()) - (d * d * rot).re * t).exp() / (std::f64::consts::PI * settings.r.cosh())
}

/// Draw an outcome from [`heterodyne_pdf`].
pub fn sample_heterodyne<R: Rng + ?Sized>(
    alpha: ComplexAmplitude,
    n: u64,
    settings: HeterodyneSettings,
    rng: &mut R,
) -> ComplexAmplitude {
    let [v1, v2] = settings.noise_variances();
    let x: f64 = rng.sample::<f64, _>(StandardNormal) * v1.sqrt();
    let y: f64 = rng.sample::<f64, _>(StandardNormal) * v2.sqrt();
    let offset = C64::from_polar(1.0, settings.phi) * C64::new(x, y);
    ComplexAmplitude::from_complex(alpha.value() * (n as f64).sqrt() + offset).expect("finite sample")
}

/// Gaussian posterior of the local parameter given the local outcome `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPosterior {
    pub mean: C64,
    pub var: [f64; 2],
}

impl LocalPosterior {
    pub fn new(v: ComplexAmplitude, mu: f64, settings: HeterodyneSettings) -> Result<Self> {
        settings.require_real_axis()?;
        if !(mu > 0.0) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        let t = settings.t();
        let prec = [(1.0 + t) + 1.0 / (mu * mu), (1.0 - t) + 1.0 / (mu * mu)];
        Ok(Self {
            mean: C64::new(v.re() * (1.0 + t) / prec[0], v.im() * (1.0 - t) / prec[1]),
            var: [0.5 / prec[0], 0.5 / prec[1]],
        })
    }

    pub fn moments(&self) -> GaussianMoments {
        let m = self.mean;
        GaussianMoments { i1: m, i2: m.norm_sqr() + self.var[0] + self.var[1], i3: m * m + (self.var[0] - self.var[1]) }
    }
}

pub fn local_posterior_moments(v: ComplexAmplitude, mu: f64, settings: HeterodyneSettings) -> Result<GaussianMoments> {
    Ok(LocalPosterior::new(v, mu, settings)?.moments())
}

/// Per-coordinate variances of the local outcome `v` (prior width plus measurement noise).
pub fn pv_variances(mu: f64, settings: HeterodyneSettings) -> [f64; 2] {
    let [n1, n2] = settings.noise_variances();
    [0.5 * mu * mu + n1, 0.5 * mu * mu + n2]
}

/// Marginal density of the local outcome `v`.
pub fn pv_pdf(v: ComplexAmplitude, mu: f64, settings: HeterodyneSettings) -> Result<f64> {
    settings.require_real_axis()?;
    if !(mu > 0.0) {
        return Err(invalid(format!("mu must be positive, got {mu}")));
    }
    let [a, b] = pv_variances(mu, settings);
    Ok((-v.re().powi(2) / (2.0 * a) - v.im().powi(2) / (2.0 * b)).exp() / (2.0 * std::f64::consts::PI * (a * b).sqrt()))
}

/// Averages over `v` of the posterior moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedMoments {
    /// `E[I2]`
    pub second: f64,
    /// `E[|I1|^2]`
    pub abs_first_sq: f64,
    /// `E[I1^2]` (real for squeezing along the real axis)
    pub first_sq: f64,
    /// `E[Re I3]`
    pub third: f64,
    /// `I2 - |I1|^2`, the same for every `v`
    pub variance: f64,
}

pub fn averaged_moments(mu: f64, settings: HeterodyneSettings) -> Result<AveragedMoments> {
    settings.require_real_axis()?;
    let t = settings.t();
    let m2 = mu * mu;
    let along = m2 * m2 * (1.0 + t) / (2.0 * (m2 * (1.0 + t) + 1.0));
    let across = m2 * m2 * (1.0 - t) / (2.0 * (m2 * (1.0 - t) + 1.0));
    let post = LocalPosterior::new(ComplexAmplitude::ZERO, mu, settings)?;
    let variance = post.var[0] + post.var[1];
    Ok(AveragedMoments {
        second: along + across + variance,
        abs_first_sq: along + across,
        first_sq: along - across,
        third: along - across + post.var[0] - post.var[1],
        variance,
    })
}

/// Second-order eigenvalue shifts of `[-a] - rho(v)` at order `1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EandCorrections {
    /// Shift of the `+s` and `-s` eigenvalues.
    pub branches: [f64; 2],
    /// Nonzero eigenvalue of the null-space block (nonpositive).
    pub null: f64,
}

/// Second-order shifts for given posterior moments.
///
/// Every term is linear in the moments, so passing averaged moments gives the
/// average of the shifts.
pub fn eand_corrections(alpha0: f64, m: &AveragedMoments) -> Result<EandCorrections> {
    let o = eigen_overlaps(alpha0)?;
    let s = o.gap;
    let mut branches = [0.0; 2];
    for (k, out) in branches.iter_mut().enumerate() {
        let other = 1 - k;
        let sign = if k == 0 { 1.0 } else { -1.0 };
        let (a, b, g) = (o.vac[k], o.one[k], o.two[k]);
        let direct = m.second * (a * a - b * b) - 2f64.sqrt() * m.third * a * g;
        let w = a * o.one[other];
        let w2 = b * o.vac[other];
        let cross = (m.abs_first_sq * (w * w + w2 * w2) + 2.0 * w * w2 * m.first_sq) / (sign * 2.0 * s);
        let null = m.abs_first_sq * a * a * o.one_null / (sign * s);
        *out = direct + cross + null;
    }
    Ok(EandCorrections { branches, null: -m.variance * o.one_null })
}

/// Coefficient `Delta` in `P_E&D = (1 - s + Delta/n) / 2`.
pub fn delta_eand(alpha0: f64, mu: f64, settings: HeterodyneSettings) -> Result<f64> {
    let c = eand_corrections(alpha0, &averaged_moments(mu, settings)?)?;
    Ok(-0.5 * (c.null.abs() + c.branches[0] - c.branches[1]))
}

/// Null-space shifts in the basis where the first null vector has no `|2>` component.
///
/// The two values are the diagonal entries of the rank-one null block; their
/// sum is its only nonzero eigenvalue, so the split depends on the basis but
/// the trace norm does not.
pub fn null_space_corrections(alpha0: f64, mu: f64, settings: HeterodyneSettings) -> Result<[f64; 2]> {
    let var = averaged_moments(mu, settings)?.variance;
    let frame = PhiFrame::new(alpha0)?;
    Ok([var * frame.one[2].powi(2), var * frame.one[3].powi(2)])
}

/// Orthonormal frame `(v+, v-, v3, v4)` of the span of `|0>, |-a>, |1>, |2>`.
#[derive(Debug, Clone)]
pub struct PhiFrame {
    /// Columns are the frame vectors in the Fock basis.
    pub basis: DMatrix<f64>,
    /// `<0|.>`, `<1|.>`, `<2|.>` for each frame vector.
    pub vac: [f64; 4],
    pub one: [f64; 4],
    pub two: [f64; 4],
}

impl PhiFrame {
    pub fn new(alpha0: f64) -> Result<Self> {
        let e = crate::collective::helstrom_eigenstructure(alpha0)?;
        let dim = e.v_plus.dim().max(4);
        let re = |k: &crate::fock::FockKet| DVector::from_iterator(dim, k.entries().iter().map(|z| z.re));
        let vp = re(&e.v_plus);
        let vm = re(&e.v_minus);
        let unit = |i: usize| DVector::from_fn(dim, |k, _| if k == i { 1.0 } else { 0.0 });
        // v4 along the null-space part of |2>, so v3 has no |2> component
        let project = |x: DVector<f64>, prev: &[&DVector<f64>]| {
            let mut y = x;
            for p in prev {
                let c = p.dot(&y);
                y -= *p * c;
            }
            let nrm = y.norm();
            y / nrm
        };
        let v4 = project(unit(2), &[&vp, &vm]);
        let v3 = project(unit(1), &[&vp, &vm, &v4]);
        let basis = DMatrix::from_columns(&[vp, vm, v3, v4]);
        let row = |i: usize| [basis[(i, 0)], basis[(i, 1)], basis[(i, 2)], basis[(i, 3)]];
        Ok(Self { vac: row(0), one: row(1), two: row(2), basis })
    }

    /// `A`, `B`, `C` of `[-a] - rho(v) = A + B/sqrt(n) + C/n + ...` in this frame.
    pub fn expansion(&self, alpha0: f64, m: &GaussianMoments) -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
        let dim = self.basis.nrows();
        let shifted = coherent_ket(ComplexAmplitude::real(-alpha0).expect("finite"), dim).expect("dim > 0");
        let mut a_full = DMatrix::<C64>::zeros(dim, dim);
        let mut b_full = DMatrix::<C64>::zeros(dim, dim);
        let mut c_full = DMatrix::<C64>::zeros(dim, dim);
        let psi = shifted.entries();
        a_full += psi * psi.adjoint();
        a_full[(0, 0)] -= C64::new(1.0, 0.0);
        b_full[(1, 0)] = -m.i1;
        b_full[(0, 1)] = -m.i1.conj();
        c_full[(1, 1)] = C64::new(-m.i2, 0.0);
        c_full[(0, 0)] = C64::new(m.i2, 0.0);
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        c_full[(2, 0)] = -m.i3 * r2;
        c_full[(0, 2)] = -m.i3.conj() * r2;
        let q = self.basis.map(|x| C64::new(x, 0.0));
        let tf = |x: &DMatrix<C64>| q.adjoint() * x * &q;
        (tf(&a_full), tf(&b_full), tf(&c_full))
    }

    /// Perturbative eigenvalues of `[-a] - rho(v)` for one outcome.
    pub fn perturbation(&self, alpha0: f64, m: &GaussianMoments) -> Result<PerturbationResult> {
        let (a, b, c) = self.expansion(alpha0, m);
        perturb_dense(&a, &b, &c)
    }
}

/// `(1 - s + Delta/n) / 2`.
pub fn pe_eand_asymptotic(alpha0: f64, mu: f64, n: u64, settings: HeterodyneSettings) -> Result<f64> {
    Ok(known_amplitude_error(alpha0) + delta_eand(alpha0, mu, settings)? / (2.0 * n as f64))
}

/// Limiting E&D excess risk as a function of the squeezing `r`.
pub fn excess_risk_eand(alpha0: f64, r: f64) -> Result<f64> {
    let x = check_alpha(alpha0)?;
    let e = (-x).exp();
    let m = -(-x).exp_m1();
    let s = m.sqrt();
    let quad = 4.0 * m / (1.0 + s) + x * (4.0 * s - 2.0 * e);
    Ok(e / (16.0 * s * m) * (quad * r.cosh().powi(2) + x * e * (2.0 * r).sinh()))
}

/// E&D excess risk at finite prior width.
pub fn excess_risk_eand_finite_mu(alpha0: f64, mu: f64, settings: HeterodyneSettings) -> Result<f64> {
    Ok(0.5 * (delta_eand(alpha0, mu, settings)? - lambda_star(alpha0, mu)?))
}

fn check_alpha(alpha0: f64) -> Result<f64> {
    if alpha0 > 0.0 && alpha0.is_finite() {
        Ok(alpha0 * alpha0)
    } else {
        Err(invalid(format!("alpha0 must be positive, got {alpha0}")))
    }
}

/// Squeezing that minimizes [`excess_risk_eand`].
pub fn optimal_squeezing(alpha0: f64) -> Result<f64> {
    let x = check_alpha(alpha0)?;
    let e = (-x).exp();
    let m = -(-x).exp_m1();
    let s = m.sqrt();
    // f e^{-x}, scaled so nothing overflows for large amplitudes
    let f = -2.0 * m / (1.0 + s) + x * (e - 2.0 * s);
    let arg = 2.0 * x * e / (f - x * e);
    if arg <= -1.0 {
        return Err(Error::Numerical(format!("optimal squeezing undefined at alpha0 = {alpha0}")));
    }
    Ok(0.25 * arg.ln_1p())
}

/// Weights of `e^{2r}` and `e^{-2r}` in the excess risk, read off numerically,
/// and the squeezing `ln(g_q / g_p) / 4` they imply.
pub fn squeezing_from_quadratic_form(alpha0: f64) -> Result<(f64, f64, f64)> {
    // R(r) = g_p e^{2r} + g_q e^{-2r} + const; three evaluations pin it down
    let h = 0.5;
    let r0 = excess_risk_eand(alpha0, 0.0)?;
    let rp = excess_risk_eand(alpha0, h)?;
    let rm = excess_risk_eand(alpha0, -h)?;
    let (ep, em) = ((2.0 * h).exp(), (-2.0 * h).exp());
    // rp - r0 = g_p (ep - 1) + g_q (em - 1); rm - r0 = g_p (em - 1) + g_q (ep - 1)
    let det = (ep - 1.0).powi(2) - (em - 1.0).powi(2);
    let g_p = ((rp - r0) * (ep - 1.0) - (rm - r0) * (em - 1.0)) / det;
    let g_q = ((rm - r0) * (ep - 1.0) - (rp - r0) * (em - 1.0)) / det;
    Ok((g_q, g_p, 0.25 * (g_q / g_p).ln()))
}

/// Golden-section minimizer on `[lo, hi]`; returns `(argmin, min)`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Excess risk at the optimal squeezing.
pub fn excess_risk_eand_min(alpha0: f64) -> Result<f64> {
    excess_risk_eand(alpha0, optimal_squeezing(alpha0)?)
}

/// Quadrature orders and truncation for the finite-n E&D error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EandQuadrature {
    /// Gauss–Hermite order per coordinate over the outcome.
    pub v_order: usize,
    /// Gauss–Hermite order per coordinate over the posterior.
    pub u_order: usize,
    /// Poisson tail allowed in the posterior-state truncation.
    pub tail: f64,
}

impl Default for EandQuadrature {
    fn default() -> Self {
        Self { v_order: 30, u_order: 30, tail: 1e-12 }
    }
}

fn posterior_dim(alpha0: f64, post: &LocalPosterior, n: u64, tail: f64, extra: f64) -> usize {
    let sn = (n as f64).sqrt();
    let spread = 7.0 * post.var[0].max(post.var[1]).sqrt();
    let amp = alpha0.max((post.mean.norm() + spread) / sn).max(extra / sn);
    poisson_cutoff(amp * amp, tail).max(3)
}

/// Posterior signal state `rho(v) = int p(u|v) [u/sqrt(n)] d^2u` with the default orders.
pub fn posterior_signal_state(
    v: ComplexAmplitude,
    model: &LocalModel,
    settings: HeterodyneSettings,
    dim: usize,
) -> Result<FockMatrix> {
    posterior_signal_state_with(v, model, settings, dim, EandQuadrature::default().u_order)
}

pub fn posterior_signal_state_with(
    v: ComplexAmplitude,
    model: &LocalModel,
    settings: HeterodyneSettings,
    dim: usize,
    u_order: usize,
) -> Result<FockMatrix> {
    let post = LocalPosterior::new(v, model.mu(), settings)?;
    posterior_state(&post, model.n(), dim, u_order)
}

fn posterior_state(post: &LocalPosterior, n: u64, dim: usize, u_order: usize) -> Result<FockMatrix> {
    let grid = gaussian_grid(post.mean, post.var[0], post.var[1], u_order)?;
    let inv = 1.0 / (n as f64).sqrt();
    let mut acc = DMatrix::<C64>::zeros(dim, dim);
    for (u, w) in grid.iter() {
        let k = coherent_ket(u.scale(inv), dim)?;
        acc.gerc(C64::new(w, 0.0), k.entries(), k.entries(), C64::new(1.0, 0.0));
    }
    let acc = (&acc + acc.adjoint()).scale(0.5);
    let deficit = 1.0 - acc.trace().re;
    if deficit > MAX_POSTERIOR_DEFICIT {
        return Err(Error::Truncation { deficit, limit: MAX_POSTERIOR_DEFICIT });
    }
    FockMatrix::hermitian(vec![dim], acc, deficit)
}

fn shifted_vacuum(alpha0: f64, dim: usize) -> Result<FockMatrix> {
    Ok(coherent_ket(ComplexAmplitude::real(-alpha0)?, dim)?.projector())
}

/// Finite-n E&D error by nested quadrature over the outcome and the posterior.
pub fn pe_eand_finite(model: &LocalModel, settings: HeterodyneSettings, quad: EandQuadrature) -> Result<f64> {
    settings.require_real_axis()?;
    let [a, b] = pv_variances(model.mu(), settings);
    let grid = gaussian_grid(C64::new(0.0, 0.0), a, b, quad.v_order)?;
    let terms: Vec<Result<f64>> = grid
        .nodes
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(&v, &w)| {
            if w < 1e-300 {
                return Ok(0.0);
            }
            let post = LocalPosterior::new(v, model.mu(), settings)?;
            let dim = posterior_dim(model.alpha0(), &post, model.n(), quad.tail, 0.0);
            let rho = posterior_state(&post, model.n(), dim, quad.u_order)?;
            let diff = shifted_vacuum(model.alpha0(), dim)?.combine(1.0, &rho, -1.0)?;
            Ok(w * trace_norm(&diff)?)
        })
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(0.5 * (1.0 - 0.5 * total))
}

/// Error when the auxiliary copies are ignored: `[-a]` against the prior-averaged signal.
pub fn pe_signal_only(model: &LocalModel) -> Result<f64> {
    let width = model.mu() / (model.n() as f64).sqrt();
    let dim = thermal_cutoff(width, 1e-13).max(poisson_cutoff(model.alpha0().powi(2), 1e-13)).max(2);
    let c = thermal_coefficients(width, dim);
    let thermal = FockMatrix::diagonal(&c, 0.0);
    crate::fock::helstrom_error(&shifted_vacuum(model.alpha0(), dim)?, &thermal, 0.5)
}

/// Which discrimination stage the Monte Carlo receiver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    /// Helstrom measurement against the posterior signal state.
    Posterior,
    /// Helstrom measurement against the coherent state at the point estimate.
    PlugIn,
}

/// How each Monte Carlo trial scores the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scoring {
    /// Exact conditional error probability given the outcome.
    Conditional,
    /// One simulated hypothesis and one simulated decision per trial.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub receiver: Receiver,
    pub scoring: Scoring,
    pub u_order: usize,
    /// Trials per independent random stream; fixed so results do not depend on thread count.
    pub chunk: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { receiver: Receiver::Posterior, scoring: Scoring::Conditional, u_order: 20, chunk: 1000 }
    }
}

/// Monte Carlo estimate of the finite-n E&D error.
pub fn montecarlo_eand(
    model: &LocalModel,
    settings: HeterodyneSettings,
    trials: u64,
    seed: u64,
    opts: McOptions,
) -> Result<McEstimate> {
    settings.require_real_axis()?;
    if trials < 1000 {
        return Err(invalid(format!("need at least 1000 trials, got {trials}")));
    }
    let chunk = opts.chunk.max(1);
    let chunks = trials.div_ceil(chunk);
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ci);
            let count = chunk.min(trials - ci * chunk);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..count {
                let x = mc_trial(model, settings, &opts, &mut rng)?;
                sum += x;
                sq += x * x;
            }
            Ok((sum, sq))
        })
        .collect();
    let (mut sum, mut sq) = (0.0, 0.0);
    for p in partial {
        let (s, q) = p?;
        sum += s;
        sq += q;
    }
    let nt = trials as f64;
    let mean = sum / nt;
    let var = ((sq / nt - mean * mean) * nt / (nt - 1.0)).max(0.0);
    Ok(McEstimate { mean, std_error: (var / nt).sqrt(), trials, seed })
}

fn mc_trial(model: &LocalModel, settings: HeterodyneSettings, opts: &McOptions, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mu = model.mu();
    let sn = (model.n() as f64).sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2 * mu;
    let u = C64::new(rng.sample::<f64, _>(StandardNormal) * half, rng.sample::<f64, _>(StandardNormal) * half);
    let alpha = ComplexAmplitude::from_complex(C64::new(model.alpha0(), 0.0) + u / sn)?;
    let beta = sample_heterodyne(alpha, model.n(), settings, rng);
    let v = ComplexAmplitude::from_complex(beta.value() - C64::new(model.alpha0() * sn, 0.0))?;

    let post = LocalPosterior::new(v, mu, settings)?;
    let dim = posterior_dim(model.alpha0(), &post, model.n(), 1e-12, u.norm().max(v.value().norm()) + 7.0);
    let candidate = match opts.receiver {
        Receiver::Posterior => posterior_state(&post, model.n(), dim, opts.u_order)?,
        Receiver::PlugIn => coherent_ket(v.scale(1.0 / sn), dim)?.projector(),
    };
    let signal = shifted_vacuum(model.alpha0(), dim)?;
    let truth = coherent_ket(ComplexAmplitude::from_complex(u / sn)?, dim)?.projector();
    // decide "no displacement" on the projector
    let pi = helstrom_projector(&signal, &candidate)?;
    let miss = 1.0 - pi.matmul(&signal)?.trace().re;
    let false_alarm = pi.matmul(&truth)?.trace().re;
    Ok(match opts.scoring {
        Scoring::Conditional => 0.5 * (miss + false_alarm),
        Scoring::Binary => {
            let p = if rng.random::<bool>() { miss } else { false_alarm };
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        }
    })
}
