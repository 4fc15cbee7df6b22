//! One-dimensional Gauss rules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Gauss–Hermite rule for the weight `exp(-x^2)` on the real line.
///
/// Golub–Welsch supplies starting points, which are then polished by Newton
/// steps on the orthonormal recurrence so that tiny tail weights keep full
/// relative precision.
pub fn gauss_hermite(order: usize) -> Result<Rule> {
    if order == 0 {
        return Err(invalid("Gauss-Hermite order must be positive"));
    }
    let jacobi =
        DMatrix::from_fn(
            order,
            order,
            |i, j| {
                if i + 1 == j || j + 1 == i {
                    (i.max(j) as f64 / 2.0).sqrt()
                } else {
                    0.0
                }
            },
        );
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guesses.sort_by(f64::total_cmp);

    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    for x0 in guesses {
        let mut x = x0;
        let mut deriv = 0.0;
        for _ in 0..20 {
            let (p, dp) = hermite_orthonormal(order, x);
            deriv = dp;
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                deriv = hermite_orthonormal(order, x).1;
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / (deriv * deriv));
    }
    Ok(Rule { nodes, weights })
}

// Orthonormal Hermite function value (without the Gaussian factor) and its
// derivative-proxy sqrt(2n) p_{n-1}, as in the classic recurrence.
fn hermite_orthonormal(order: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut p = std::f64::consts::PI.powf(-0.25);
    for j in 1..=order {
        let jf = j as f64;
        let next = x * (2.0 / jf).sqrt() * p - ((jf - 1.0) / jf).sqrt() * p_prev;
        p_prev = p;
        p = next;
    }
    (p, (2.0 * order as f64).sqrt() * p_prev)
}

/// Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<Rule> {
    if order == 0 {
        return Err(invalid("Gauss-Legendre order must be positive"));
    }
    let n = order as f64;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=order {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = n * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 * half / ((1.0 - z * z) * dp * dp);
        nodes[i] = mid - half * z;
        nodes[order - 1 - i] = mid + half * z;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    Ok(Rule { nodes, weights })
}

/// Composite Gauss–Legendre rule: `panels` equal panels on `[a, b]`.
pub fn composite_legendre(order: usize, panels: usize, a: f64, b: f64) -> Result<Rule> {
    if panels == 0 {
        return Err(invalid("panel count must be positive"));
    }
    let width = (b - a) / panels as f64;
    let mut rule = Rule { nodes: Vec::new(), weights: Vec::new() };
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let panel = gauss_legendre(order, lo, lo + width)?;
        rule.nodes.extend(panel.nodes);
        rule.weights.extend(panel.weights);
    }
    Ok(rule)
}
