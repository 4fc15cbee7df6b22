//! Support for the acceptance run: verdicts that collect labelled checks, and
//! random inputs for the perturbation and overlap comparisons.

use std::fmt::Display;
use std::time::{Duration, Instant};

use cohdisc_core::fock::C64;
use nalgebra::DMatrix;
use rand::Rng;

/// Outcome of one acceptance criterion, built from individual checks.
#[derive(Debug)]
pub struct Verdict {
    id: u8,
    title: &'static str,
    checks: Vec<(String, bool)>,
    started: Instant,
}

impl Verdict {
    pub fn new(id: u8, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new(), started: Instant::now() }
    }

    pub fn check(&mut self, label: impl Into<String>, ok: bool) -> bool {
        self.checks.push((label.into(), ok));
        ok
    }

    /// Record a failed check for an error and hand back the value otherwise.
    pub fn value<T, E: Display>(&mut self, label: &str, r: Result<T, E>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(format!("{label}: error: {e}"), false);
                None
            }
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|(_, ok)| *ok)
    }

    /// Detail lines followed by the single PASS/FAIL line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (label, ok) in &self.checks {
            s.push_str(&format!("    [{}] {label}\n", if *ok { "ok" } else { "FAILED" }));
        }
        let status = if self.passed() { "PASS" } else { "FAIL" };
        s.push_str(&format!(
            "{status} criterion {}: {} ({:.1} s)\n",
            self.id,
            self.title,
            self.elapsed().as_secs_f64()
        ));
        s
    }
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// Random Hermitian matrix with eigenvalue gaps of at least one.
pub fn separated_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<C64> {
    let mut spectrum = Vec::with_capacity(n);
    let mut x = rng.random_range(-3.0..-1.0);
    for _ in 0..n {
        spectrum.push(C64::new(x, 0.0));
        x += rng.random_range(1.0..2.0);
    }
    let q = random_complex_matrix(rng, n).qr().q();
    hermitian_part(&(&q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum)) * q.adjoint()))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn sorted_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}
