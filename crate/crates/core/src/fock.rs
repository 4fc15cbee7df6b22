//! Truncated Fock-space linear algebra for one or two bosonic modes.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::special::poisson_tail;

pub type C64 = Complex<f64>;

const HERMITIAN_TOL: f64 = 1e-12;

/// A point in phase space: a coherent amplitude, an estimate, or a local parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexAmplitude(C64);

impl ComplexAmplitude {
    pub const ZERO: Self = Self(C64 { re: 0.0, im: 0.0 });

    pub fn new(re: f64, im: f64) -> Result<Self> {
        Self::from_complex(C64::new(re, im))
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(re, 0.0)
    }

    pub fn from_complex(z: C64) -> Result<Self> {
        if z.re.is_finite() && z.im.is_finite() {
            Ok(Self(z))
        } else {
            Err(invalid(format!("non-finite amplitude {z}")))
        }
    }

    pub fn value(self) -> C64 {
        self.0
    }

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn norm_sqr(self) -> f64 {
        self.0.norm_sqr()
    }

    pub fn scale(self, f: f64) -> Self {
        Self(self.0 * f)
    }
}

impl std::ops::Add for ComplexAmplitude {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self(self.0 + other.0)
    }
}

impl std::ops::Neg for ComplexAmplitude {
    type Output = Self;

    fn neg(self) -> Self {
        Self(-self.0)
    }
}

/// Truncated ket in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockKet {
    entries: DVector<C64>,
}

impl FockKet {
    pub fn from_entries(entries: DVector<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("ket dimension must be positive"));
        }
        let norm = entries.norm_squared();
        if norm > 1.0 + 1e-12 {
            return Err(invalid(format!("ket norm {norm} exceeds one")));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &DVector<C64> {
        &self.entries
    }

    /// `1 - <psi|psi>`: probability lost to truncation.
    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.entries.norm_squared()
    }

    pub fn inner(&self, other: &FockKet) -> C64 {
        self.entries.dotc(&other.entries)
    }

    /// Rank-one operator `|psi><psi|`.
    pub fn projector(&self) -> FockMatrix {
        let m = &self.entries * self.entries.adjoint();
        FockMatrix {
            dims: vec![self.dim()],
            entries: m,
            trace_deficit: self.norm_deficit().max(0.0),
            kind: MatrixKind::Hermitian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Hermitian,
    /// Unitaries and other non-Hermitian operators sharing the container.
    General,
}

/// Dense operator on a tensor product of truncated modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMatrix {
    dims: Vec<usize>,
    entries: DMatrix<C64>,
    trace_deficit: f64,
    kind: MatrixKind,
}

impl FockMatrix {
    /// Hermitian operator; rejects inputs whose anti-Hermitian part exceeds 1e-12.
    pub fn hermitian(dims: Vec<usize>, entries: DMatrix<C64>, trace_deficit: f64) -> Result<Self> {
        check_shape(&dims, &entries)?;
        let skew = max_abs_diff(&entries, &entries.adjoint());
        if skew > HERMITIAN_TOL {
            return Err(invalid(format!("matrix not Hermitian: max |M - M^dag| = {skew:.3e}")));
        }
        Ok(Self { dims, entries, trace_deficit: trace_deficit.max(0.0), kind: MatrixKind::Hermitian })
    }

    pub fn general(dims: Vec<usize>, entries: DMatrix<C64>, trace_deficit: f64) -> Result<Self> {
        check_shape(&dims, &entries)?;
        Ok(Self { dims, entries, trace_deficit: trace_deficit.max(0.0), kind: MatrixKind::General })
    }

    /// Real diagonal operator on a single mode.
    pub fn diagonal(values: &[f64], trace_deficit: f64) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0)));
        Self {
            dims: vec![values.len()],
            entries: DMatrix::from_diagonal(&d),
            trace_deficit: trace_deficit.max(0.0),
            kind: MatrixKind::Hermitian,
        }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self { dims, entries: DMatrix::identity(n, n), trace_deficit: 0.0, kind: MatrixKind::Hermitian }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    /// `a * self + b * other`, keeping the Hermitian flag when both are Hermitian.
    pub fn combine(&self, a: f64, other: &FockMatrix, b: f64) -> Result<FockMatrix> {
        if self.dims != other.dims {
            return Err(invalid(format!("dims mismatch: {:?} vs {:?}", self.dims, other.dims)));
        }
        let kind = if self.kind == MatrixKind::Hermitian && other.kind == MatrixKind::Hermitian {
            MatrixKind::Hermitian
        } else {
            MatrixKind::General
        };
        Ok(FockMatrix {
            dims: self.dims.clone(),
            entries: self.entries.scale(a) + other.entries.scale(b),
            trace_deficit: a.abs() * self.trace_deficit + b.abs() * other.trace_deficit,
            kind,
        })
    }

    pub fn scale(&self, a: f64) -> FockMatrix {
        FockMatrix { entries: self.entries.scale(a), trace_deficit: a.abs() * self.trace_deficit, ..self.clone() }
    }

    /// `U M U^dag`.
    pub fn conjugate_by(&self, u: &FockMatrix) -> Result<FockMatrix> {
        if self.size() != u.size() {
            return Err(invalid("conjugation by operator of different size"));
        }
        let entries = &u.entries * &self.entries * u.entries.adjoint();
        let entries = if self.kind == MatrixKind::Hermitian { hermitize(entries) } else { entries };
        Ok(FockMatrix { entries, ..self.clone() })
    }

    pub fn matmul(&self, other: &FockMatrix) -> Result<FockMatrix> {
        if self.size() != other.size() {
            return Err(invalid("product of operators of different size"));
        }
        Ok(FockMatrix {
            dims: self.dims.clone(),
            entries: &self.entries * &other.entries,
            trace_deficit: 0.0,
            kind: MatrixKind::General,
        })
    }

    /// `<psi|M|psi>` for a ket on the full space.
    pub fn expectation(&self, ket: &FockKet) -> C64 {
        ket.entries.dotc(&(&self.entries * &ket.entries))
    }

    /// Reduced operator on one mode of a two-mode operator.
    pub fn partial_trace(&self, keep: usize) -> Result<FockMatrix> {
        let [d0, d1] = match self.dims[..] {
            [a, b] => [a, b],
            _ => return Err(invalid("partial trace needs a two-mode operator")),
        };
        let (dk, dt) = if keep == 0 { (d0, d1) } else { (d1, d0) };
        let mut out = DMatrix::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut s = C64::new(0.0, 0.0);
                for t in 0..dt {
                    let (a, b) = if keep == 0 { (i * d1 + t, j * d1 + t) } else { (t * d1 + i, t * d1 + j) };
                    s += self.entries[(a, b)];
                }
                out[(i, j)] = s;
            }
        }
        Ok(FockMatrix { dims: vec![dk], entries: out, trace_deficit: self.trace_deficit, kind: self.kind })
    }

    /// Check the density-operator contract: PSD within 1e-10 and trace consistent with the deficit.
    pub fn check_density(&self) -> Result<()> {
        let tr = self.trace().re;
        if tr > 1.0 + 1e-10 || tr < 1.0 - self.trace_deficit - 1e-10 {
            return Err(Error::Numerical(format!("trace {tr} outside [1 - {:.3e}, 1]", self.trace_deficit)));
        }
        let min = hermitian_eigen(self)?.0.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::Numerical(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }
}

fn check_shape(dims: &[usize], m: &DMatrix<C64>) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(invalid(format!("bad mode dimensions {dims:?}")));
    }
    let n: usize = dims.iter().product();
    if m.nrows() != n || m.ncols() != n {
        return Err(invalid(format!("matrix is {}x{}, dims {dims:?} need {n}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()).scale(0.5)
}

/// Eigenvalues and eigenvectors of the Hermitian part.
pub(crate) fn hermitian_eigen(m: &FockMatrix) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let mut h = hermitize(m.entries.clone());
    let n = h.nrows();
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // far-below-roundoff entries (deep Fock tails) can drive the solver into NaN
    let floor = scale * 1e-60;
    h.apply(|z| {
        if z.norm() < floor {
            *z = C64::new(0.0, 0.0);
        }
    });
    let real = h.iter().all(|z| z.im == 0.0);
    let fail = || Error::Numerical(format!("Hermitian eigensolver did not converge (size {n}, max entry {scale:.3e})"));
    let (vals, vecs): (Vec<f64>, _) = if real {
        let re = h.map(|z| z.re);
        let eig = SymmetricEigen::try_new(re, f64::EPSILON, 10_000).ok_or_else(fail)?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000).ok_or_else(fail)?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    if vals.iter().any(|l| !l.is_finite()) {
        return Err(fail());
    }
    Ok((vals, vecs))
}

/// Coherent state `e^{-|a|^2/2} sum_k a^k/sqrt(k!) |k>` truncated to `dim`.
pub fn coherent_ket(alpha: ComplexAmplitude, dim: usize) -> Result<FockKet> {
    if dim == 0 {
        return Err(invalid("dim must be at least 1"));
    }
    let a = alpha.value();
    let mut v = DVector::zeros(dim);
    let mut c = C64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
    for k in 0..dim {
        if k > 0 {
            c *= a / (k as f64).sqrt();
        }
        v[k] = c;
    }
    Ok(FockKet { entries: v })
}

/// Annihilation operator on a single truncated mode.
pub fn annihilation(dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) })
}

/// `exp(a a^dag - conj(a) a)` on the truncated space.
///
/// The truncated exponential is exactly unitary; how far it is from the true
/// displacement is reported as the Poisson tail of `|alpha|^2` beyond `dim`.
pub fn displacement_matrix(alpha: ComplexAmplitude, dim: usize) -> Result<FockMatrix> {
    if dim == 0 {
        return Err(invalid("dim must be at least 1"));
    }
    let a = annihilation(dim);
    let al = alpha.value();
    let u = exp_anti_hermitian(a.adjoint() * al - &a * al.conj())?;
    FockMatrix::general(vec![dim], u, poisson_tail(alpha.norm_sqr(), dim))
}

fn exp_anti_hermitian(gen: DMatrix<C64>) -> Result<DMatrix<C64>> {
    let dim = gen.nrows();
    // i*gen is Hermitian
    let h = hermitize(gen * C64::new(0.0, 1.0));
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("generator eigensolve failed".into()))?;
    let phases = DVector::from_iterator(dim, eig.eigenvalues.iter().map(|&l| C64::new(0.0, -l).exp()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint())
}

/// `D(beta) S(r e^{2i phi}) |0>` in a truncated Fock space.
///
/// `r > 0` narrows the quadrature at angle `phi`. The truncated operators are
/// exactly unitary, so `dim` must be generous enough for the state to fit.
pub fn squeezed_coherent_ket(beta: ComplexAmplitude, r: f64, phi: f64, dim: usize) -> Result<FockKet> {
    if dim == 0 {
        return Err(invalid("dim must be at least 1"));
    }
    let a = annihilation(dim);
    let ad = a.adjoint();
    let xi = C64::from_polar(r, 2.0 * phi);
    let squeeze = exp_anti_hermitian((&a * &a * xi.conj() - &ad * &ad * xi).scale(0.5))?;
    let b = beta.value();
    let shift = exp_anti_hermitian(&ad * b - &a * b.conj())?;
    FockKet::from_entries(shift * squeeze.column(0))
}

/// Beam splitter with transmissivity `t`: `(sqrt(T) a + sqrt(R) b, -sqrt(R) a + sqrt(T) b)`.
pub fn beam_splitter_pair(
    alpha: ComplexAmplitude,
    beta: ComplexAmplitude,
    t: f64,
) -> Result<(ComplexAmplitude, ComplexAmplitude)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("transmissivity {t} outside [0, 1]")));
    }
    let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());
    let (a, b) = (alpha.value(), beta.value());
    Ok((ComplexAmplitude(a * st + b * sr), ComplexAmplitude(-a * sr + b * st)))
}

/// Fold `n` copies of `|alpha>` into one mode of amplitude `sqrt(n) alpha`.
///
/// Step `k` mixes the accumulated `|sqrt(k) alpha>` with a fresh copy at
/// `T = k/(k+1)`, which sends all amplitude to the first port.
pub fn concentrate(n: usize, alpha: ComplexAmplitude) -> Result<ComplexAmplitude> {
    if n == 0 {
        return Err(invalid("need at least one copy"));
    }
    let mut acc = alpha;
    for k in 1..n {
        let t = k as f64 / (k as f64 + 1.0);
        let (out, rest) = beam_splitter_pair(acc, alpha, t)?;
        let leak = rest.value().norm();
        if leak > 1e-12 * (1.0 + alpha.value().norm() * (k as f64).sqrt()) {
            return Err(Error::Numerical(format!("concentration step {k} leaked amplitude {leak:.3e}")));
        }
        acc = out;
    }
    Ok(acc)
}

/// Kronecker product; mode dimensions are concatenated.
pub fn tensor(a: &FockMatrix, b: &FockMatrix) -> FockMatrix {
    let entries = a.entries.kronecker(&b.entries);
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    let ta = a.trace().re;
    let tb = b.trace().re;
    // deficit of the product state relative to a unit-trace product
    let deficit = if a.trace_deficit > 0.0 || b.trace_deficit > 0.0 {
        (1.0 - (1.0 - a.trace_deficit) * (1.0 - b.trace_deficit)).max(0.0)
    } else {
        0.0
    };
    let _ = (ta, tb);
    let kind = if a.kind == MatrixKind::Hermitian && b.kind == MatrixKind::Hermitian {
        MatrixKind::Hermitian
    } else {
        MatrixKind::General
    };
    FockMatrix { dims, entries, trace_deficit: deficit, kind }
}

/// Sum of absolute eigenvalues of the Hermitian part.
pub fn trace_norm(m: &FockMatrix) -> Result<f64> {
    let (eig, _) = hermitian_eigen(m)?;
    Ok(eig.iter().map(|l| l.abs()).sum())
}

/// Minimum error probability `(1 - ||p rho1 - (1-p) rho2||_1) / 2`.
pub fn helstrom_error(rho1: &FockMatrix, rho2: &FockMatrix, prior1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&prior1) {
        return Err(invalid(format!("prior {prior1} outside [0, 1]")));
    }
    let diff = rho1.combine(prior1, rho2, -(1.0 - prior1))?;
    Ok(0.5 * (1.0 - trace_norm(&diff)?))
}

/// Projector onto the nonnegative eigenspace of `rho1 - rho2`.
pub fn helstrom_projector(rho1: &FockMatrix, rho2: &FockMatrix) -> Result<FockMatrix> {
    let diff = rho1.combine(1.0, rho2, -1.0)?;
    let (eig, vecs) = hermitian_eigen(&diff)?;
    let n = diff.size();
    let mut p = DMatrix::zeros(n, n);
    for (k, &l) in eig.iter().enumerate() {
        if l >= 0.0 {
            let v = vecs.column(k);
            p += v * v.adjoint();
        }
    }
    FockMatrix::hermitian(diff.dims.clone(), hermitize(p), 0.0)
}
