//! Truncated Fock-basis matrix calculus: ladder and quadrature operators,
//! displacement matrices, parity and rotations, coherent states, traces.
//!
//! All operators are dense complex matrices truncated to the first `dim`
//! number states. Truncation breaks exact operator algebra only at the
//! boundary rows/columns; identities are therefore asserted on leading
//! blocks, and every operator carries a `tail_estimate` recording the norm
//! of couplings it has discarded.

use crate::error::{Error, Result};
use crate::special::ln_factorial;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Largest |z|^2 accepted by the displacement builder. Beyond this every
/// matrix element underflows to zero at any feasible truncation.
pub const DISPLACEMENT_MAG_LIMIT: f64 = 1.0e6;

/// A point of the phase plane R^2 ~ C, carrying both the canonical pair
/// (q, p) and the complex coordinate z = (q + ip)/sqrt(2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    pub fn origin() -> Self {
        Self { q: 0.0, p: 0.0 }
    }

    pub fn from_z(z: Complex64) -> Self {
        Self {
            q: std::f64::consts::SQRT_2 * z.re,
            p: std::f64::consts::SQRT_2 * z.im,
        }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.q, self.p) / std::f64::consts::SQRT_2
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }
}

/// Symplectic pairing a o b = a conj(b) - conj(a) b = 2i Im(a conj(b)).
pub fn symplectic_pairing(a: Complex64, b: Complex64) -> Complex64 {
    let im = (a * b.conj()).im;
    Complex64::new(0.0, 2.0 * im)
}

/// Dense complex square matrix representing an operator truncated in the
/// number basis.
#[derive(Clone, Debug)]
pub struct FockOperator {
    mat: DMatrix<Complex64>,
    tail: f64,
}

impl FockOperator {
    pub(crate) fn from_parts(mat: DMatrix<Complex64>, tail: f64) -> Self {
        Self { mat, tail }
    }

    /// Wraps a square matrix, validating the type invariants.
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() < 2 {
            return Err(Error::InvalidDimension(mat.nrows()));
        }
        if mat.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Format("non-finite matrix entry".into()));
        }
        Ok(Self { mat, tail: 0.0 })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
            tail: 0.0,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
            tail: 0.0,
        }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let dim = diag.len();
        let mut mat = DMatrix::zeros(dim, dim);
        for (n, d) in diag.iter().enumerate() {
            mat[(n, n)] = *d;
        }
        Self { mat, tail: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.mat[(m, n)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.mat
    }

    pub fn tail_estimate(&self) -> f64 {
        self.tail
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
            tail: self.tail,
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            mat: self.mat.map(|x| c * x),
            tail: c.norm() * self.tail,
        }
    }

    /// Crops to the leading `dim` block. The discarded coupling band
    /// (entries linking kept and dropped states) is folded into the
    /// tail estimate.
    pub fn crop(&self, dim: usize) -> Self {
        assert!(dim <= self.dim());
        let old = self.dim();
        let mut coupling = 0.0f64;
        for m in 0..dim {
            for n in dim..old {
                coupling += self.mat[(m, n)].norm_sqr() + self.mat[(n, m)].norm_sqr();
            }
        }
        Self {
            mat: self.mat.view((0, 0), (dim, dim)).into_owned(),
            tail: self.tail + coupling.sqrt(),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self * other - other * self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        self * other + other * self
    }

    /// Largest entry magnitude of (self - other) over the leading block.
    pub fn max_abs_diff_on(&self, other: &Self, block: usize) -> f64 {
        assert_eq!(self.dim(), other.dim());
        let k = block.min(self.dim());
        let mut worst = 0.0f64;
        for m in 0..k {
            for n in 0..k {
                worst = worst.max((self.mat[(m, n)] - other.mat[(m, n)]).norm());
            }
        }
        worst
    }

    /// Largest entry magnitude over the leading block.
    pub fn max_abs_on(&self, block: usize) -> f64 {
        let k = block.min(self.dim());
        let mut worst = 0.0f64;
        for m in 0..k {
            for n in 0..k {
                worst = worst.max(self.mat[(m, n)].norm());
            }
        }
        worst
    }

    pub fn frobenius(&self) -> f64 {
        self.mat.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|n| self.mat[(n, n)]).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        for m in 0..d {
            for n in m..d {
                if (self.mat[(m, n)] - self.mat[(n, m)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Eigenvalues of a Hermitian operator, ascending. The matrix is
    /// symmetrized first; callers should check `is_hermitian` when the
    /// symmetry is itself under test.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()).map(|c| c * Complex64::new(0.5, 0.0));
        let mut vals: Vec<f64> = herm.symmetric_eigen().eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        vals
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        assert_eq!(self.dim(), v.dim());
        let out = &self.mat * DMatrix::from_column_slice(v.dim(), 1, &v.entries);
        FockVector {
            entries: out.column(0).iter().copied().collect(),
            tail: v.tail,
        }
    }
}

macro_rules! op_binary {
    ($trait:ident, $method:ident, $op:tt, $tailrule:expr) => {
        impl std::ops::$trait for &FockOperator {
            type Output = FockOperator;
            fn $method(self, rhs: &FockOperator) -> FockOperator {
                assert_eq!(self.dim(), rhs.dim(), "operator dims must match");
                FockOperator {
                    mat: &self.mat $op &rhs.mat,
                    tail: $tailrule(self.tail, rhs.tail),
                }
            }
        }
        impl std::ops::$trait for FockOperator {
            type Output = FockOperator;
            fn $method(self, rhs: FockOperator) -> FockOperator {
                (&self).$method(&rhs)
            }
        }
    };
}

op_binary!(Add, add, +, |a: f64, b: f64| a.max(b));
op_binary!(Sub, sub, -, |a: f64, b: f64| a.max(b));

impl std::ops::Mul for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &FockOperator) -> FockOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dims must match");
        FockOperator {
            mat: &self.mat * &rhs.mat,
            tail: self.tail + rhs.tail,
        }
    }
}

impl std::ops::Mul for FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: FockOperator) -> FockOperator {
        (&self) * (&rhs)
    }
}

/// Truncated state vector in the number basis.
#[derive(Clone, Debug)]
pub struct FockVector {
    pub entries: Vec<Complex64>,
    /// Norm of the truncated amplitude beyond the kept levels.
    pub tail: f64,
}

impl FockVector {
    pub fn basis_state(n: usize, dim: usize) -> Self {
        let mut entries = vec![Complex64::ZERO; dim];
        entries[n] = Complex64::ONE;
        Self { entries, tail: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(self.dim(), other.dim()));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|x| c * x).collect(),
            tail: c.norm() * self.tail,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
            tail: self.tail.max(other.tail),
        }
    }
}

/// Rank-one operator |u><v|.
pub fn outer(u: &FockVector, v: &FockVector) -> FockOperator {
    assert_eq!(u.dim(), v.dim());
    let d = u.dim();
    let mut mat = DMatrix::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            mat[(m, n)] = u.entries[m] * v.entries[n].conj();
        }
    }
    FockOperator::from_parts(mat, 0.0)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

/// Lowering and raising operators: lower[n-1, n] = sqrt(n),
/// raise[n+1, n] = sqrt(n+1); raise is the conjugate transpose of lower.
pub fn ladder_ops(dim: usize) -> Result<(FockOperator, FockOperator)> {
    check_dim(dim)?;
    let mut lower = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        lower[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let raise = lower.adjoint();
    Ok((
        FockOperator::from_parts(lower, 0.0),
        FockOperator::from_parts(raise, 0.0),
    ))
}

/// Position and momentum: Q = (a + a^dag)/sqrt(2), P = (a - a^dag)/(i sqrt(2)).
pub fn quadrature_ops(dim: usize) -> Result<(FockOperator, FockOperator)> {
    let (lower, raise) = ladder_ops(dim)?;
    let sqrt2inv = Complex64::new(1.0 / std::f64::consts::SQRT_2, 0.0);
    let q = (&lower + &raise).scale(sqrt2inv);
    let p = (&lower - &raise).scale(sqrt2inv * Complex64::new(0.0, -1.0));
    Ok((q, p))
}

/// Number operator diag(0, 1, ..., dim-1).
pub fn number_op(dim: usize) -> Result<FockOperator> {
    check_dim(dim)?;
    Ok(FockOperator::from_diagonal(
        &(0..dim)
            .map(|n| Complex64::new(n as f64, 0.0))
            .collect::<Vec<_>>(),
    ))
}

/// Matrix of the unitary displacement generated by z: entries combine a
/// Laguerre factor with a log-space factorial ratio,
///   <m|D(z)|n> = sqrt(n!/m!) e^{-|z|^2/2} z^{m-n} L_n^{(m-n)}(|z|^2),  m >= n,
/// and the reflected form for n >= m. The recurrence below carries the
/// full prefactor along, so every intermediate stays bounded by 1.
pub fn displacement(z: PhasePoint, dim: usize) -> Result<FockOperator> {
    check_dim(dim)?;
    if !z.is_finite() {
        return Err(Error::WeightEval("non-finite displacement argument".into()));
    }
    let zc = z.z();
    let t = zc.norm_sqr();
    if t > DISPLACEMENT_MAG_LIMIT {
        return Err(Error::MagnitudeOverflow {
            got: t,
            limit: DISPLACEMENT_MAG_LIMIT,
        });
    }
    if t == 0.0 {
        return Ok(FockOperator::identity(dim));
    }

    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    let r = t.sqrt();
    let unit = zc / r;
    // phase directions built by repeated multiplication so that
    // D(-z) = (-1)^{m-n} D(z) holds bitwise entry by entry
    let mut phase_lo = Complex64::ONE; // (z/|z|)^nu
    let mut phase_up = Complex64::ONE; // (-conj(z)/|z|)^nu
    let neg_conj_unit = -unit.conj();

    for nu in 0..dim {
        // h_n = e^{-t/2} |z|^nu sqrt(n!/(n+nu)!) L_n^{(nu)}(t), bounded by 1
        let nuf = nu as f64;
        let log_seed = -0.5 * t + nuf * r.ln() - 0.5 * ln_factorial(nu);
        let h0 = log_seed.exp();
        let mut hm1 = h0;
        let mut h = h0 * (1.0 + nuf - t) / (1.0 + nuf).sqrt();
        for n in 0..dim - nu {
            let hn = if n == 0 {
                hm1
            } else if n == 1 {
                h
            } else {
                let nf = n as f64;
                let next = (2.0 * nf - 1.0 + nuf - t) / (nf * (nf + nuf)).sqrt() * h
                    - (((nf - 1.0) * (nf - 1.0 + nuf)) / (nf * (nf + nuf))).sqrt() * hm1;
                hm1 = h;
                h = next;
                next
            };
            mat[(n + nu, n)] = phase_lo * hn;
            if nu > 0 {
                mat[(n, n + nu)] = phase_up * hn;
            }
        }
        phase_lo *= unit;
        phase_up *= neg_conj_unit;
    }

    // tail: unitarity deficit of the worst column in the leading half,
    // i.e. the norm lost to the discarded levels >= dim
    let mut worst = 0.0f64;
    for n in 0..(dim / 2).max(1) {
        let colsum: f64 = (0..dim).map(|m| mat[(m, n)].norm_sqr()).sum();
        worst = worst.max((1.0 - colsum).max(0.0));
    }
    Ok(FockOperator::from_parts(mat, worst.sqrt()))
}

/// Diagonal rotation matrix with entries e^{i (n + nu) theta}.
/// `rotation(pi, 0, dim)` coincides with the parity matrix.
pub fn rotation(theta: f64, nu: f64, dim: usize) -> Result<FockOperator> {
    check_dim(dim)?;
    Ok(FockOperator::from_diagonal(
        &(0..dim)
            .map(|n| Complex64::from_polar(1.0, (n as f64 + nu) * theta))
            .collect::<Vec<_>>(),
    ))
}

/// Parity diag((-1)^n) with exact +-1 entries.
pub fn parity(dim: usize) -> Result<FockOperator> {
    check_dim(dim)?;
    Ok(FockOperator::from_diagonal(
        &(0..dim)
            .map(|n| Complex64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect::<Vec<_>>(),
    ))
}

/// Entrywise conjugation, the antilinear time-reversal action on vectors.
pub fn time_reverse_vector(v: &FockVector) -> FockVector {
    FockVector {
        entries: v.entries.iter().map(|c| c.conj()).collect(),
        tail: v.tail,
    }
}

/// Entrywise conjugation of a matrix.
pub fn time_reverse_operator(a: &FockOperator) -> FockOperator {
    FockOperator::from_parts(a.matrix().map(|c| c.conj()), a.tail_estimate())
}

/// Coherent state component n = e^{-|z|^2/2} z^n / sqrt(n!). The returned
/// tail is the amplitude of the first discarded level; callers treating it
/// as negligible should check it against their tolerance.
pub fn coherent(z: PhasePoint, dim: usize) -> Result<FockVector> {
    check_dim(dim)?;
    let zc = z.z();
    let mut entries = Vec::with_capacity(dim);
    let mut amp = Complex64::new((-0.5 * zc.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        entries.push(amp);
        amp *= zc / ((n + 1) as f64).sqrt();
    }
    Ok(FockVector {
        entries,
        tail: amp.norm(),
    })
}

/// Whether the coherent truncation tail at this (z, dim) is negligible
/// in the sense used by the portrait routines.
pub fn coherent_tail_ok(z: PhasePoint, dim: usize) -> bool {
    let t = z.z().norm_sqr();
    let log_tail =
        -0.5 * t + 0.5 * (dim as f64) * t.max(f64::MIN_POSITIVE).ln() - 0.5 * ln_factorial(dim);
    log_tail < -12.0 * std::f64::consts::LN_10
}

/// Hilbert-Schmidt pairing tr(A^dag B); conjugate-symmetric in its arguments.
pub fn trace_pair(a: &FockOperator, b: &FockOperator) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    Ok(a.matrix()
        .iter()
        .zip(b.matrix().iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}
