//! Real symmetric band matrices: Cholesky, congruence and eigenvalues.
//!
//! The eigenvalue path reduces the band to tridiagonal form with Givens
//! rotations and bulge chasing, then runs implicit QL on the tridiagonal.
//! Cost is about `6 * bw * n^2` flops with `O(n * bw)` memory, which is what
//! makes the large Gram problems in `collective` affordable.

use crate::error::{Error, Result};

/// Lower-stored symmetric band matrix: entry `(i, j)` with `0 <= i - j <= bw`.
#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.bw + 1) + (i - j)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Set entry `(i, j)` (and its mirror). Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Band Cholesky factor `L` with `A = L L^T`; `L` keeps the bandwidth.
    pub fn cholesky(&self) -> Result<LowerBand> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let at = |i: usize, j: usize| j * (bw + 1) + (i - j);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut d = l[at(j, j)];
            for k in lo..j {
                let v = l[at(j, k)];
                d -= v * v;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "band Cholesky: pivot {j} of {n} is {d:.3e}, matrix not positive definite"
                )));
            }
            let d = d.sqrt();
            l[at(j, j)] = d;
            for i in j + 1..=(j + bw).min(n - 1) {
                let mut v = l[at(i, j)];
                for k in i.saturating_sub(bw)..j {
                    v -= l[at(i, k)] * l[at(j, k)];
                }
                l[at(i, j)] = v / d;
            }
        }
        Ok(LowerBand { n, bw, data: l })
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let (diag, off) = self.tridiagonalize();
        let mut eig = tridiagonal_eigenvalues(diag, off)?;
        eig.sort_by(f64::total_cmp);
        Ok(eig)
    }

    /// Reduce to tridiagonal form; returns diagonal and subdiagonal.
    pub fn tridiagonalize(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, bw) = (self.n, self.bw);
        // one extra subdiagonal holds the bulge
        let s = bw + 2;
        let mut w = vec![0.0; n * s];
        for j in 0..n {
            for d in 0..=bw.min(n - 1 - j) {
                w[j * s + d] = self.data[j * (bw + 1) + d];
            }
        }
        let at = |i: usize, j: usize| j * s + (i - j);

        if bw >= 2 {
            for k in 0..n.saturating_sub(2) {
                for l in (2..=bw).rev() {
                    if k + l >= n {
                        continue;
                    }
                    let mut col = k;
                    let mut q = k + l;
                    loop {
                        let p = q - 1;
                        let x = w[at(p, col)];
                        let y = w[at(q, col)];
                        if y == 0.0 {
                            break;
                        }
                        let r = x.hypot(y);
                        let (c, sn) = (x / r, y / r);
                        w[at(p, col)] = r;
                        w[at(q, col)] = 0.0;

                        for j in col + 1..p {
                            let a = w[at(p, j)];
                            let b = w[at(q, j)];
                            w[at(p, j)] = c * a + sn * b;
                            w[at(q, j)] = c * b - sn * a;
                        }

                        let app = w[at(p, p)];
                        let aqp = w[at(q, p)];
                        let aqq = w[at(q, q)];
                        let cs = c * sn;
                        w[at(p, p)] = c * c * app + 2.0 * cs * aqp + sn * sn * aqq;
                        w[at(q, q)] = sn * sn * app - 2.0 * cs * aqp + c * c * aqq;
                        w[at(q, p)] = cs * (aqq - app) + (c * c - sn * sn) * aqp;

                        let hi = (q + bw).min(n - 1);
                        if hi > q {
                            let len = hi - q;
                            let (left, right) = w.split_at_mut(q * s);
                            let colp = &mut left[p * s + 2..p * s + 2 + len];
                            let colq = &mut right[1..1 + len];
                            for (a, b) in colp.iter_mut().zip(colq.iter_mut()) {
                                let (va, vb) = (*a, *b);
                                *a = c * va + sn * vb;
                                *b = c * vb - sn * va;
                            }
                        }

                        let next = q + bw;
                        if next >= n {
                            break;
                        }
                        col = p;
                        q = next;
                    }
                }
            }
        }

        let diag = (0..n).map(|i| w[at(i, i)]).collect();
        let off = (0..n.saturating_sub(1)).map(|i| w[at(i + 1, i)]).collect();
        (diag, off)
    }
}

/// Lower-triangular band factor produced by [`SymBand::cholesky`].
#[derive(Debug, Clone)]
pub struct LowerBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl LowerBand {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < j || i - j > self.bw {
            0.0
        } else {
            self.data[j * (self.bw + 1) + (i - j)]
        }
    }

    /// `L^T diag(weights) L`, again a symmetric band matrix of the same width.
    pub fn congruence(&self, weights: &[f64]) -> SymBand {
        let (n, bw) = (self.n, self.bw);
        assert_eq!(weights.len(), n);
        let mut out = SymBand::zeros(n, bw);
        let at = |i: usize, j: usize| j * (bw + 1) + (i - j);
        for j in 0..n {
            for i in j..=(j + bw).min(n - 1) {
                // rows k with both L_ki and L_kj nonzero: i <= k <= j + bw
                let mut v = 0.0;
                for k in i..=(j + bw).min(n - 1) {
                    v += self.data[at(k, i)] * weights[k] * self.data[at(k, j)];
                }
                out.data[at(i, j)] = v;
            }
        }
        out
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL.
pub fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    let mut e = off;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Numerical(format!("tridiagonal QL did not converge at index {l} of {n}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, bw: usize, seed: u64) -> SymBand {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymBand::zeros(n, bw);
        for j in 0..n {
            for i in j..=(j + bw).min(n - 1) {
                a.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        a
    }

    fn dense(a: &SymBand) -> DMatrix<f64> {
        DMatrix::from_fn(a.dim(), a.dim(), |i, j| a.get(i, j))
    }

    fn dense_eigs(m: DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn band_eigenvalues_match_dense() {
        for (n, bw, seed) in [(1, 0, 1), (2, 1, 2), (7, 3, 3), (40, 5, 4), (90, 12, 5), (60, 59, 6), (33, 1, 7)] {
            let a = random_band(n, bw, seed);
            let got = a.eigenvalues().unwrap();
            let want = dense_eigs(dense(&a));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12 * n as f64, "n={n} bw={bw}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn cholesky_and_congruence_match_dense() {
        let n = 50;
        let bw = 4;
        let mut a = random_band(n, bw, 11);
        for i in 0..n {
            a.set(i, i, 10.0);
        }
        let l = a.cholesky().unwrap();
        let ld = DMatrix::from_fn(n, n, |i, j| l.get(i, j));
        assert!((&ld * ld.transpose() - dense(&a)).abs().max() < 1e-12);

        let w: Vec<f64> = (0..n).map(|k| if k % 2 == 0 { 0.3 } else { -0.7 }).collect();
        let m = l.congruence(&w);
        let md = ld.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w)) * &ld;
        assert!((dense(&m) - md).abs().max() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = SymBand::zeros(3, 1);
        a.set(0, 0, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 1.0);
        a.set(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }
}
