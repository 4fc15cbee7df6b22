//! Two-value amplitude model: the amplitude is `alpha0 + 1/sqrt(n)` or
//! `alpha0 - 1/sqrt(n)` with equal probability. The auxiliary copies reduce to
//! the local states `|1>` and `|-1>`, read out by a two-outcome projective
//! measurement fixed by a single overlap `c`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::collective::richardson;
use crate::eand::{GaussianMoments, PhiFrame};
use crate::error::{invalid, Result};
use crate::fock::C64;
use crate::localmodel::known_amplitude_error;

/// `<1|-1>` for the local auxiliary states.
pub fn chi() -> f64 {
    (-2f64).exp()
}

/// Estimation measurement `{[e+], [e-]}` in the real plane of `|1>` and `|-1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointPovm {
    c: f64,
}

impl TwoPointPovm {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(invalid(format!("overlap c must lie in [0, 1], got {c}")));
        }
        Ok(Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Probabilities of reading `+` on `|1>` and `-` on `|-1>`.
    pub fn success(&self) -> (f64, f64) {
        let chi = chi();
        let c = self.c;
        let cross = c * chi - (1.0 - c * c).sqrt() * (1.0 - chi * chi).sqrt();
        (c * c, 1.0 - cross * cross)
    }

    /// The measurement with the roles of `|1>` and `|-1>` exchanged, when it
    /// stays in the same family (`c` close enough to one).
    pub fn reflected(&self) -> Option<Self> {
        let (_, p_minus) = self.success();
        let theta = chi().acos();
        let phi = self.c.acos();
        if phi > std::f64::consts::FRAC_PI_2 - theta + 1e-15 {
            return None;
        }
        Some(Self { c: p_minus.sqrt() })
    }

    /// Outcome probabilities and posterior means of the local parameter.
    fn outcomes(&self) -> [(f64, f64); 2] {
        let (pp, pm) = self.success();
        let plus = 0.5 * (pp + 1.0 - pm);
        let minus = 0.5 * (1.0 - pp + pm);
        let mean = |l1: f64, lm: f64| (l1 - lm) / (l1 + lm);
        [(plus, mean(pp, 1.0 - pm)), (minus, mean(1.0 - pp, pm))]
    }
}

pub fn p_plus_minus(c: f64) -> Result<(f64, f64)> {
    Ok(TwoPointPovm::new(c)?.success())
}

/// `(sqrt(1 + chi) + sqrt(1 - chi)) / 2`, where `p+ = p-`.
pub fn optimal_c() -> f64 {
    let chi = chi();
    0.5 * ((1.0 + chi).sqrt() + (1.0 - chi).sqrt())
}

fn check_alpha(alpha0: f64) -> Result<()> {
    if alpha0 > 0.0 && alpha0.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("alpha0 must be positive, got {alpha0}")))
    }
}

/// `n (P* - P_known)` as `n -> oo` for the two-point prior.
fn baseline_coefficient(alpha0: f64) -> f64 {
    let x = alpha0 * alpha0;
    let h = (-(-x).exp_m1()).sqrt();
    let e = (-x).exp();
    let h1 = e / (2.0 * h);
    let h2 = -e / (2.0 * h) - e * e / (4.0 * h.powi(3));
    // |a0 + u/sqrt(n)|^2 = x + 2 a0 u/sqrt(n) + u^2/n with u = +-1
    -0.5 * (h1 + 2.0 * h2 * x)
}

/// Limiting local excess risk for measurement overlap `c`.
///
/// Each estimation outcome leaves a two-point posterior; the Helstrom error
/// against it is expanded to second order in `1/sqrt(n)` and averaged.
pub fn two_point_local_excess_risk(alpha0: f64, c: f64) -> Result<f64> {
    check_alpha(alpha0)?;
    let povm = TwoPointPovm::new(c)?;
    let frame = PhiFrame::new(alpha0)?;
    let mut coefficient = 0.0;
    let mut first = 0.0;
    for (prob, mean) in povm.outcomes() {
        let m = GaussianMoments { i1: C64::new(mean, 0.0), i2: 1.0, i3: C64::new(1.0, 0.0) };
        let pr = frame.perturbation(alpha0, &m)?;
        let mut second = 0.0;
        for ((&g0, &g1), &g2) in pr.zero_order.iter().zip(&pr.first_order).zip(&pr.second_order) {
            if g0.abs() > 1e-9 {
                first += prob * g0.signum() * g1;
                second += g0.signum() * g2;
            } else {
                second += g2.abs();
            }
        }
        // P = (1 - ||Phi|| / 2) / 2
        coefficient -= 0.25 * prob * second;
    }
    debug_assert!(first.abs() < 1e-10);
    Ok(coefficient - baseline_coefficient(alpha0))
}

/// `n (P_local - P*)` at finite `n_surrogate`, from the exact three-state Gram matrix.
pub fn two_point_local_excess_risk_at(alpha0: f64, c: f64, n_surrogate: u64) -> Result<f64> {
    check_alpha(alpha0)?;
    let n = check_n(n_surrogate)?;
    let povm = TwoPointPovm::new(c)?;
    let (pp, pm) = povm.success();
    let e = 1.0 / n.sqrt();
    let gram = coherent_gram(&[-alpha0, e, -e]);
    let mut pe = 0.0;
    for (l1, lm) in [(pp, 1.0 - pm), (1.0 - pp, pm)] {
        let prob = 0.5 * (l1 + lm);
        if prob == 0.0 {
            continue;
        }
        let q = l1 / (l1 + lm);
        pe += prob * 0.5 * (1.0 - 0.5 * gram_trace_norm(&gram, &[1.0, -q, -(1.0 - q)]));
    }
    Ok(n * (pe - known_error_two_point(alpha0, e)))
}

fn check_n(n: u64) -> Result<f64> {
    if n == 0 {
        Err(invalid("n must be at least 1"))
    } else {
        Ok(n as f64)
    }
}

fn known_error_two_point(alpha0: f64, e: f64) -> f64 {
    0.5 * (known_amplitude_error(alpha0 + e) + known_amplitude_error(alpha0 - e))
}

/// Gram matrix of real-amplitude coherent states.
fn coherent_gram(amps: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(amps.len(), amps.len(), |i, j| (-0.5 * (amps[i] - amps[j]).powi(2)).exp())
}

/// `|| sum_i w_i |v_i><v_i| ||_1` from the Gram matrix of the `v_i`.
pub fn gram_trace_norm(gram: &DMatrix<f64>, weights: &[f64]) -> f64 {
    let e = SymmetricEigen::new(gram.clone());
    let root = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let half = &e.eigenvectors * root * e.eigenvectors.transpose();
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(weights));
    let m = &half * w * &half;
    SymmetricEigen::new((&m + m.transpose()) * 0.5).eigenvalues.iter().map(|l| l.abs()).sum()
}

/// `n (P_opt - P*)` for joint discrimination of auxiliary and signal modes at finite `n`.
pub fn two_point_collective_excess_risk_at(alpha0: f64, n_surrogate: u64) -> Result<f64> {
    check_alpha(alpha0)?;
    let n = check_n(n_surrogate)?;
    let e = 1.0 / n.sqrt();
    let states: [(f64, f64); 4] = [(1.0, -alpha0), (-1.0, -alpha0), (1.0, e), (-1.0, -e)];
    let gram = DMatrix::from_fn(4, 4, |i, j| {
        let (a, b) = states[i];
        let (c, d) = states[j];
        (-0.5 * (a - c).powi(2) - 0.5 * (b - d).powi(2)).exp()
    });
    let pe = 0.5 * (1.0 - 0.5 * gram_trace_norm(&gram, &[0.5, 0.5, -0.5, -0.5]));
    Ok(n * (pe - known_error_two_point(alpha0, e)))
}

/// Collective excess risk, extrapolated from `n_surrogate` and `4 n_surrogate`.
pub fn two_point_collective_excess_risk(alpha0: f64, n_surrogate: u64) -> Result<f64> {
    let at_n = two_point_collective_excess_risk_at(alpha0, n_surrogate)?;
    let at_4n = two_point_collective_excess_risk_at(alpha0, 4 * n_surrogate)?;
    Ok(richardson(at_n, at_4n))
}
