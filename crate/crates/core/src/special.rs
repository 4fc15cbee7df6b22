//! Small special-function helpers not covered by `statrs`.

pub use statrs::function::factorial::ln_factorial;

/// Exponentially scaled modified Bessel function `exp(-z) I0(z)` for `z >= 0`.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 30.0 {
        // power series; all terms positive so no cancellation
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k: f64 = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-z).exp()
    } else {
        // asymptotic series, converges to machine precision well before it diverges for z >= 30
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k: f64 = 1.0;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * z * k);
            if next < 1e-17 * sum || next > term {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * std::f64::consts::PI * z).sqrt()
    }
}

/// Tail `sum_{k >= dim} e^{-m} m^k / k!` of a Poisson law with mean `m`.
pub fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    let head: f64 = (0..dim).map(|k| poisson_pmf(mean, k)).sum();
    // summing the head loses accuracy once the tail is tiny, so sum the tail directly then
    if head < 0.5 {
        return (1.0 - head).max(0.0);
    }
    let mut tail = 0.0;
    let mut k = dim;
    loop {
        let p = poisson_pmf(mean, k);
        tail += p;
        if k as f64 > mean && p < 1e-18 * tail.max(1e-300) {
            break;
        }
        if p == 0.0 && k as f64 > mean {
            break;
        }
        k += 1;
    }
    tail
}

pub fn poisson_pmf(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k as u64)).exp()
}

/// Smallest dimension whose Poisson tail at `mean` is below `tol`.
pub fn poisson_cutoff(mean: f64, tol: f64) -> usize {
    let mut dim = (mean + 1.0).ceil() as usize;
    while poisson_tail(mean, dim) > tol {
        dim += 1;
    }
    dim
}

/// `1 - sqrt(1 - e^{-x})` without cancellation for large `x`.
pub fn one_minus_sqrt_one_minus_exp(x: f64) -> f64 {
    let e = (-x).exp();
    e / (1.0 + (-(-x).exp_m1()).sqrt())
}
