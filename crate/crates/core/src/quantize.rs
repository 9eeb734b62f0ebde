//! The quantization map f -> A_f: phase-space quadrature, closed-form
//! monomial recurrences in both variable sets, separable Gaussian and Weyl
//! calculus paths, and the M-operator builder with its displaced family.
//!
//! Closed-path operators are assembled at an internal working dimension of
//! twice the requested one and cropped, which confines truncation effects
//! to the discarded boundary band.

use crate::coeffs::WeightTables;
use crate::error::{Error, Result};
use crate::fock::{displacement, ladder_ops, parity, quadrature_ops, FockOperator, PhasePoint};
use crate::sft::{gauss_hermite_order_for, make_grid, GridScheme, PhaseField, PhaseGrid};
use crate::special::{binomial, factorial, gauss_hermite};
use crate::weights::{eval_weight, weight_taylor, CoeffTable2, Rep, WeightKind, WeightSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Degree caps for the closed polynomial pipelines.
pub const MAX_POLY_DEGREE: usize = 12;
pub const MAX_P_POWER: usize = 8;

/// A function of q alone, either polynomial (ascending real coefficients)
/// or a callable.
#[derive(Clone)]
pub enum QFunction {
    Poly(Vec<f64>),
    Callable(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for QFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QFunction::Poly(c) => f.debug_tuple("Poly").field(c).finish(),
            QFunction::Callable(_) => f.write_str("Callable"),
        }
    }
}

/// Classical symbol to be quantized.
#[derive(Clone, Debug)]
pub enum SymbolExpr {
    /// sparse map (m, n) -> coefficient of q^m p^n
    PolyQp(CoeffTable2),
    /// sparse map (n, nbar) -> coefficient of z^n zbar^nbar
    PolyZ(CoeffTable2),
    /// L(q) p^m for the separable pipelines
    SeparableLqPm { l: QFunction, m: usize },
    /// samples on a quadrature grid
    Sampled(PhaseField),
}

impl SymbolExpr {
    pub fn poly_qp(entries: &[(u32, u32, Complex64)]) -> Self {
        let mut t = CoeffTable2::new(Rep::Qp, MAX_POLY_DEGREE);
        for &(m, n, c) in entries {
            t.add(m, n, c);
        }
        SymbolExpr::PolyQp(t)
    }

    pub fn poly_z(entries: &[(u32, u32, Complex64)]) -> Self {
        let mut t = CoeffTable2::new(Rep::Z, MAX_POLY_DEGREE);
        for &(n, nbar, c) in entries {
            t.add(n, nbar, c);
        }
        SymbolExpr::PolyZ(t)
    }

    /// Total degree of a polynomial symbol.
    pub fn degree(&self) -> Option<usize> {
        match self {
            SymbolExpr::PolyQp(t) | SymbolExpr::PolyZ(t) => Some(
                t.iter()
                    .map(|(&(a, b), _)| (a + b) as usize)
                    .max()
                    .unwrap_or(0),
            ),
            SymbolExpr::SeparableLqPm {
                l: QFunction::Poly(c),
                m,
            } => Some(c.len().saturating_sub(1) + m),
            _ => None,
        }
    }

    /// Evaluates the symbol at a phase-space point (polynomials only).
    pub fn eval(&self, pt: PhasePoint) -> Result<Complex64> {
        match self {
            SymbolExpr::PolyQp(t) => {
                Ok(t.eval(Complex64::new(pt.q, 0.0), Complex64::new(pt.p, 0.0)))
            }
            SymbolExpr::PolyZ(t) => {
                let z = pt.z();
                Ok(t.eval(z, z.conj()))
            }
            SymbolExpr::SeparableLqPm { l, m } => {
                let lv = match l {
                    QFunction::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * pt.q + ck),
                    QFunction::Callable(f) => f(pt.q),
                };
                Ok(Complex64::new(lv * pt.p.powi(*m as i32), 0.0))
            }
            SymbolExpr::Sampled(_) => Err(Error::UnsupportedCombination(
                "sampled symbols carry no point evaluator".into(),
            )),
        }
    }

    /// The polynomial table in the requested representation, converting if
    /// necessary (exact for finite polynomials).
    pub fn as_poly(&self, rep: Rep) -> Result<CoeffTable2> {
        match self {
            SymbolExpr::PolyQp(t) | SymbolExpr::PolyZ(t) => Ok(t.convert(rep)),
            SymbolExpr::SeparableLqPm {
                l: QFunction::Poly(c),
                m,
            } => {
                let mut t = CoeffTable2::new(Rep::Qp, MAX_POLY_DEGREE.max(c.len() + m));
                for (k, &ck) in c.iter().enumerate() {
                    if ck != 0.0 {
                        t.add(k as u32, *m as u32, Complex64::new(ck, 0.0));
                    }
                }
                Ok(t.convert(rep))
            }
            _ => Err(Error::UnsupportedCombination(
                "symbol has no polynomial form".into(),
            )),
        }
    }

    /// Parses the CLI grammar: monomials in q, p (or z, zbar) joined by
    /// `*`, `^`, `+`, `-`, or the separable form `L(q):<poly>*p^m`.
    pub fn parse(text: &str) -> Result<Self> {
        parse_symbol(text)
    }
}

// ---------------------------------------------------------------------------
// symbol parsing

fn parse_symbol(text: &str) -> Result<SymbolExpr> {
    let trimmed = text.trim();
    if let Some(rest) = trimmed.strip_prefix("L(q):") {
        return parse_separable(rest, 5);
    }
    let table = parse_poly_text(trimmed, 0)?;
    Ok(match table.rep() {
        Rep::Qp => SymbolExpr::PolyQp(table),
        Rep::Z => SymbolExpr::PolyZ(table),
    })
}

fn parse_separable(rest: &str, offset: usize) -> Result<SymbolExpr> {
    let (l_text, m) = match rest.rfind("*p") {
        Some(k) => {
            let tail = &rest[k + 2..];
            let m = if tail.is_empty() {
                1
            } else if let Some(expo) = tail.strip_prefix('^') {
                expo.trim().parse::<usize>().map_err(|e| Error::Parse {
                    at: offset + k + 3,
                    msg: format!("bad momentum power: {e}"),
                })?
            } else {
                return Err(Error::Parse {
                    at: offset + k + 2,
                    msg: "expected `^` after p".into(),
                });
            };
            (&rest[..k], m)
        }
        None => (rest, 0),
    };
    let table = parse_poly_text(l_text, offset)?;
    if table.rep() != Rep::Qp {
        return Err(Error::Parse {
            at: offset,
            msg: "separable prefactor must be a polynomial in q".into(),
        });
    }
    let deg = table
        .iter()
        .map(|(&(a, b), _)| (a, b))
        .fold((0, 0), |acc, k| (acc.0.max(k.0), acc.1.max(k.1)));
    if deg.1 > 0 {
        return Err(Error::Parse {
            at: offset,
            msg: "separable prefactor must not contain p".into(),
        });
    }
    let mut coeffs = vec![0.0; deg.0 as usize + 1];
    for (&(k, _), &v) in table.iter() {
        if v.im.abs() > 1e-15 {
            return Err(Error::Parse {
                at: offset,
                msg: "separable prefactor must be real".into(),
            });
        }
        coeffs[k as usize] = v.re;
    }
    Ok(SymbolExpr::SeparableLqPm {
        l: QFunction::Poly(coeffs),
        m,
    })
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    base: usize,
}

#[derive(Debug, PartialEq, Clone)]
enum Tok {
    Plus,
    Minus,
    Star,
    Caret,
    Num(f64),
    Var(&'static str),
    End,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str, base: usize) -> Self {
        Self { text, pos: 0, base }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            at: self.base + self.pos,
            msg: msg.into(),
        }
    }

    fn peek_tok(&mut self) -> Result<(Tok, usize)> {
        let bytes = self.text.as_bytes();
        let mut k = self.pos;
        while k < bytes.len() && bytes[k].is_ascii_whitespace() {
            k += 1;
        }
        self.pos = k; // errors point at the offending character
        if k >= bytes.len() {
            return Ok((Tok::End, k));
        }
        let rest = &self.text[k..];
        let (tok, len) = match bytes[k] {
            b'+' => (Tok::Plus, 1),
            b'-' | 0xe2 if rest.starts_with('-') || rest.starts_with('\u{2212}') => {
                if rest.starts_with('\u{2212}') {
                    (Tok::Minus, '\u{2212}'.len_utf8())
                } else {
                    (Tok::Minus, 1)
                }
            }
            b'*' => (Tok::Star, 1),
            b'^' => (Tok::Caret, 1),
            b'z' if rest.starts_with("zbar") => (Tok::Var("zbar"), 4),
            b'z' => (Tok::Var("z"), 1),
            b'q' => (Tok::Var("q"), 1),
            b'p' => (Tok::Var("p"), 1),
            b'0'..=b'9' | b'.' => {
                let mut end = k;
                while end < bytes.len()
                    && (bytes[end].is_ascii_digit()
                        || bytes[end] == b'.'
                        || bytes[end] == b'e'
                        || bytes[end] == b'E'
                        || ((bytes[end] == b'+' || bytes[end] == b'-')
                            && end > k
                            && (bytes[end - 1] == b'e' || bytes[end - 1] == b'E')))
                {
                    end += 1;
                }
                let v: f64 = self.text[k..end]
                    .parse()
                    .map_err(|e| self.err(format!("bad number: {e}")))?;
                (Tok::Num(v), end - k)
            }
            other => return Err(self.err(format!("unexpected character {:?}", other as char))),
        };
        Ok((tok, k + len))
    }

    fn next_tok(&mut self) -> Result<Tok> {
        let (tok, next) = self.peek_tok()?;
        self.pos = next;
        Ok(tok)
    }
}

/// Parses a +/- separated sum of monomial terms into a coefficient table,
/// inferring the representation from the variables used.
#[allow(unused_assignments)] // the flush macro resets state past the last term
fn parse_poly_text(text: &str, base: usize) -> Result<CoeffTable2> {
    let mut lex = Lexer::new(text, base);
    let mut rep: Option<Rep> = None;
    let mut terms: Vec<(u32, u32, Complex64)> = Vec::new();

    let mut sign = 1.0;
    let mut pending = true; // expecting a term
    let mut coeff = Complex64::ONE;
    let mut e1: u32 = 0; // q or z exponent
    let mut e2: u32 = 0; // p or zbar exponent

    macro_rules! flush {
        () => {
            if !pending {
                terms.push((e1, e2, coeff * sign));
                coeff = Complex64::ONE;
                e1 = 0;
                e2 = 0;
                sign = 1.0;
                pending = true;
            }
        };
    }

    loop {
        let tok = lex.next_tok()?;
        match tok {
            Tok::End => {
                if pending && terms.is_empty() {
                    return Err(lex.err("empty expression"));
                }
                if pending {
                    return Err(lex.err("dangling operator"));
                }
                flush!();
                break;
            }
            Tok::Plus => {
                if pending {
                    return Err(lex.err("unexpected +"));
                }
                flush!();
            }
            Tok::Minus => {
                if pending {
                    sign = -sign;
                } else {
                    flush!();
                    sign = -1.0;
                }
            }
            Tok::Star => {
                if pending {
                    return Err(lex.err("unexpected *"));
                }
                pending = false; // stay in the same term
            }
            Tok::Caret => {
                return Err(lex.err("dangling exponent"));
            }
            Tok::Num(v) => {
                coeff *= v;
                pending = false;
            }
            Tok::Var(name) => {
                let var_rep = if name == "q" || name == "p" {
                    Rep::Qp
                } else {
                    Rep::Z
                };
                match rep {
                    None => rep = Some(var_rep),
                    Some(r) if r != var_rep => {
                        return Err(lex.err("cannot mix q,p with z,zbar"));
                    }
                    _ => {}
                }
                let mut expo = 1u32;
                if let Ok((Tok::Caret, next)) = lex.peek_tok() {
                    lex.pos = next;
                    match lex.next_tok()? {
                        Tok::Num(v) if v.fract() == 0.0 && v >= 0.0 => expo = v as u32,
                        _ => return Err(lex.err("exponent must be a nonnegative integer")),
                    }
                }
                if name == "q" || name == "z" {
                    e1 += expo;
                } else {
                    e2 += expo;
                }
                pending = false;
            }
        }
    }

    let rep = rep.unwrap_or(Rep::Qp);
    let mut table = CoeffTable2::new(rep, MAX_POLY_DEGREE);
    for (a, b, c) in terms {
        if (a + b) as usize > MAX_POLY_DEGREE {
            return Err(Error::DegreeCap(format!(
                "symbol degree {} > {MAX_POLY_DEGREE}",
                a + b
            )));
        }
        table.add(a, b, c);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// M operator

/// Construction route for the weight-transformed operator.
#[derive(Clone, Debug)]
pub enum MPath {
    /// Closed forms: parity for the constant weight, the geometric diagonal
    /// for exponential isotropic weights, the position kernel for separable
    /// Gaussians.
    Closed,
    /// Plain phase-space quadrature (weight must decay).
    Quadrature(Arc<PhaseGrid>),
    /// Damped quadrature with a schedule of Gaussian regulators e^{nu |z|^2},
    /// extrapolated to nu = 0.
    Regularized(Vec<f64>),
}

/// Report attached to a regularized build: the schedule and the norm of the
/// change between consecutive extrapolation stages (the damping trend).
#[derive(Clone, Debug, Default)]
pub struct RegularizationReport {
    pub schedule: Vec<f64>,
    pub step_norms: Vec<f64>,
}

/// The operator M = integral of w(z) D(z) over the plane, truncated.
pub fn build_m(w: &WeightSpec, dim: usize, path: &MPath) -> Result<FockOperator> {
    Ok(build_m_with_report(w, dim, path)?.0)
}

pub fn build_m_with_report(
    w: &WeightSpec,
    dim: usize,
    path: &MPath,
) -> Result<(FockOperator, Option<RegularizationReport>)> {
    match path {
        MPath::Closed => Ok((build_m_closed(w, dim)?, None)),
        MPath::Quadrature(grid) => {
            if !w.decays() {
                return Err(Error::DivergenceRisk);
            }
            let op = integrate_displacement(grid, dim, |pt| eval_weight(w, pt))?;
            Ok((op, None))
        }
        MPath::Regularized(schedule) => {
            let (op, report) = build_m_regularized(w, dim, schedule)?;
            Ok((op, Some(report)))
        }
    }
}

/// Diagonal of the exponential-weight M operator:
/// entries 2/(1-s) ((s+1)/(s-1))^n.
pub fn cg_m_diagonal(s: Complex64, dim: usize) -> Vec<Complex64> {
    let pref = Complex64::new(2.0, 0.0) / (Complex64::ONE - s);
    let lambda = (s + 1.0) / (s - 1.0);
    (0..dim).map(|n| pref * lambda.powu(n as u32)).collect()
}

fn build_m_closed(w: &WeightSpec, dim: usize) -> Result<FockOperator> {
    match w.kind() {
        WeightKind::Constant => Ok(parity(dim)?.scale(Complex64::new(2.0, 0.0))),
        WeightKind::CahillGlauber(s) => Ok(FockOperator::from_diagonal(&cg_m_diagonal(*s, dim))),
        WeightKind::SeparableGaussian { .. } => {
            let rule = crate::kernel::XRule::gauss(2 * dim + 40)?;
            crate::kernel::m_position_kernel(w, dim, &rule).map(|k| k.op)
        }
        other => Err(Error::UnsupportedCombination(format!(
            "no closed-form M for weight {other:?}"
        ))),
    }
}

/// Deterministic block-parallel accumulation of
/// sum_i qw_i g(z_i) D(z_i) at working dimension 2 dim, cropped to dim.
fn integrate_displacement(
    grid: &PhaseGrid,
    dim: usize,
    g: impl Fn(PhasePoint) -> Result<Complex64> + Sync,
) -> Result<FockOperator> {
    let work = 2 * dim;
    let blocks: Vec<(usize, usize)> = (0..grid.len())
        .step_by(256)
        .map(|start| (start, (start + 256).min(grid.len())))
        .collect();
    let partials: Vec<Result<DMatrix<Complex64>>> = blocks
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = DMatrix::<Complex64>::zeros(work, work);
            for i in start..end {
                let pt = grid.nodes()[i];
                let weight = grid.qweights()[i] * g(pt)?;
                if weight.norm() < 1e-300 {
                    continue;
                }
                let d = displacement(pt, work)?;
                acc += d.matrix().map(|x| weight * x);
            }
            Ok(acc)
        })
        .collect();
    let mut total = DMatrix::<Complex64>::zeros(work, work);
    for p in partials {
        total += p?;
    }
    Ok(FockOperator::from_parts(total, 0.0).crop(dim))
}

/// Regularized build for non-decaying weights: each stage integrates
/// w(z) e^{nu |z|^2} D(z) on a matched Gauss-Hermite grid, and the stages
/// are polynomially extrapolated to nu = 0.
pub fn build_m_regularized(
    w: &WeightSpec,
    dim: usize,
    schedule: &[f64],
) -> Result<(FockOperator, RegularizationReport)> {
    if schedule.is_empty() || schedule.iter().any(|&nu| nu >= 0.0) {
        return Err(Error::GridParams(
            "regularization schedule must contain negative damping exponents".into(),
        ));
    }
    let mut stages = Vec::with_capacity(schedule.len());
    for &nu in schedule {
        // damping e^{nu |z|^2} = e^{nu (q^2+p^2)/2}: width sigma^2 = -1/nu
        let sigma = (-1.0 / nu).sqrt();
        let grid = make_grid(GridScheme::TensorGaussHermite {
            sigma_q: sigma,
            sigma_p: sigma,
            order: gauss_hermite_order_for(sigma, sigma),
        })?;
        let op = integrate_displacement(&grid, dim, |pt| {
            Ok(eval_weight(w, pt)? * (nu * pt.z().norm_sqr()).exp())
        })?;
        stages.push(op);
    }
    let extrapolated = richardson_to_zero(schedule, &stages);
    let step_norms = stages
        .windows(2)
        .map(|pair| (&pair[1] - &pair[0]).frobenius())
        .collect();
    Ok((
        extrapolated,
        RegularizationReport {
            schedule: schedule.to_vec(),
            step_norms,
        },
    ))
}

/// Lagrange extrapolation of a family of operators to parameter zero.
fn richardson_to_zero(params: &[f64], stages: &[FockOperator]) -> FockOperator {
    let dim = stages[0].dim();
    let mut acc = FockOperator::zeros(dim);
    for (i, stage) in stages.iter().enumerate() {
        let mut coef = 1.0;
        for (j, &pj) in params.iter().enumerate() {
            if j != i {
                coef *= pj / (pj - params[i]);
            }
        }
        acc = &acc + &stage.scale(Complex64::new(coef, 0.0));
    }
    acc
}

/// Cached M operator with its displaced family M(z) = D(z) M D(z)^dag.
#[derive(Clone, Debug)]
pub struct MOp {
    weight: WeightSpec,
    matrix: FockOperator,
    pub regularized: bool,
}

impl MOp {
    pub fn new(w: &WeightSpec, dim: usize, path: &MPath) -> Result<Self> {
        let matrix = build_m(w, dim, path)?;
        Ok(Self {
            weight: w.clone(),
            matrix,
            regularized: matches!(path, MPath::Regularized(_)),
        })
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn matrix(&self) -> &FockOperator {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// D(z) M D(z)^dag at the cached dimension.
    pub fn displaced(&self, z: PhasePoint) -> Result<FockOperator> {
        let d = displacement(z, self.dim())?;
        Ok(&(&d * &self.matrix) * &d.adjoint())
    }
}

/// Convenience wrapper matching the displaced-family operation directly.
pub fn displaced_m(
    w: &WeightSpec,
    z: PhasePoint,
    dim: usize,
    path: &MPath,
) -> Result<FockOperator> {
    MOp::new(w, dim, path)?.displaced(z)
}

// ---------------------------------------------------------------------------
// quadrature pipeline

/// A_f by phase-space quadrature: sum_i qw_i f(z_i) D(z_i) M D(z_i)^dag,
/// computed at working dimension 2 dim and cropped. The weight must decay;
/// non-decaying weights go through the regularized M path instead.
pub fn quantize_grid(
    w: &WeightSpec,
    f: &SymbolExpr,
    dim: usize,
    grid: &Arc<PhaseGrid>,
) -> Result<FockOperator> {
    Ok(quantize_grid_many(w, std::slice::from_ref(f), dim, grid)?.remove(0))
}

/// Batch form of [`quantize_grid`]: the displaced kernel D(z) M D(z)^dag is
/// assembled once per node and folded against every symbol's samples.
pub fn quantize_grid_many(
    w: &WeightSpec,
    fs: &[SymbolExpr],
    dim: usize,
    grid: &Arc<PhaseGrid>,
) -> Result<Vec<FockOperator>> {
    if !w.decays() {
        return Err(Error::DivergenceRisk);
    }
    let work = 2 * dim;
    let m = build_m_closed(w, work).or_else(|_| {
        // fall back to quadrature for the M itself
        integrate_displacement(grid, work, |pt| eval_weight(w, pt))
    })?;
    // closed-form M of isotropic weights is exactly diagonal
    let mut mdiag: Option<Vec<Complex64>> = Some((0..work).map(|n| m.entry(n, n)).collect());
    'scan: for r in 0..work {
        for c in 0..work {
            if r != c && m.entry(r, c) != Complex64::ZERO {
                mdiag = None;
                break 'scan;
            }
        }
    }

    let mut values = Vec::with_capacity(fs.len());
    for f in fs {
        let v: Vec<Complex64> = match f {
            SymbolExpr::Sampled(field) => {
                if !Arc::ptr_eq(field.grid(), grid) && field.grid().len() != grid.len() {
                    return Err(Error::GridFieldMismatch);
                }
                field.values().to_vec()
            }
            other => grid
                .nodes()
                .iter()
                .map(|&pt| other.eval(pt))
                .collect::<Result<_>>()?,
        };
        values.push(v);
    }

    let blocks: Vec<(usize, usize)> = (0..grid.len())
        .step_by(128)
        .map(|start| (start, (start + 128).min(grid.len())))
        .collect();
    let partials: Vec<Result<Vec<DMatrix<Complex64>>>> = blocks
        .par_iter()
        .map(|&(start, end)| {
            let mut acc = vec![DMatrix::<Complex64>::zeros(work, work); fs.len()];
            let mut dm = DMatrix::<Complex64>::zeros(work, work);
            for i in start..end {
                let node_weights: Vec<Complex64> = values
                    .iter()
                    .map(|v| Complex64::new(grid.qweights()[i], 0.0) * v[i])
                    .collect();
                if node_weights.iter().all(|x| x.norm() < 1e-300) {
                    continue;
                }
                let d = displacement(grid.nodes()[i], work)?;
                match &mdiag {
                    Some(diag) => {
                        // column scaling replaces the first matrix product
                        for col in 0..work {
                            for row in 0..work {
                                dm[(row, col)] = d.matrix()[(row, col)] * diag[col];
                            }
                        }
                    }
                    None => dm = d.matrix() * m.matrix(),
                }
                let mz = &dm * d.matrix().adjoint();
                for (a, nw) in acc.iter_mut().zip(&node_weights) {
                    if nw.norm() >= 1e-300 {
                        a.zip_apply(&mz, |dst, src| *dst += *nw * src);
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut totals = vec![DMatrix::<Complex64>::zeros(work, work); fs.len()];
    for p in partials {
        for (t, a) in totals.iter_mut().zip(p?) {
            *t += a;
        }
    }
    Ok(totals
        .into_iter()
        .map(|t| FockOperator::from_parts(t, 0.0).crop(dim))
        .collect())
}

// ---------------------------------------------------------------------------
// closed polynomial pipelines

fn falling(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).map(|j| j as f64).product()
}

/// Monomial operator family A_{z^n zbar^nbar} built from the recurrences
/// and the separation formula, extended linearly over the symbol table.
/// The weight tables must be in the z representation.
pub fn quantize_poly_z(tables: &WeightTables, f: &CoeffTable2, dim: usize) -> Result<FockOperator> {
    if tables.rep != Rep::Z || f.rep() != Rep::Z {
        return Err(Error::RepresentationMismatch);
    }
    let deg = f
        .iter()
        .map(|(&(a, b), _)| (a + b) as usize)
        .max()
        .unwrap_or(0);
    if deg > MAX_POLY_DEGREE {
        return Err(Error::DegreeCap(format!(
            "degree {deg} > {MAX_POLY_DEGREE}"
        )));
    }
    if deg > tables.cap {
        return Err(Error::DegreeCap(format!(
            "weight tables hold degree {} but the symbol needs {deg}",
            tables.cap
        )));
    }
    let work = 2 * dim;
    let (lower, raise) = ladder_ops(work)?;
    let c01 = tables.c.get(0, 1);
    let c10 = tables.c.get(1, 0);

    let max_n = f.iter().map(|(&(n, _), _)| n).max().unwrap_or(0) as usize;
    let max_nb = f.iter().map(|(&(_, nb), _)| nb).max().unwrap_or(0) as usize;

    // A_{z^n}: (a - c01) A_{z^{n-1}} - sum_jb (-1)^jb a_{0 1 0 jb} (n-1)!/(n-1-jb)! A_{z^{n-1-jb}}
    let mut az: Vec<FockOperator> = vec![FockOperator::identity(work)];
    let base_z = &lower - &FockOperator::identity(work).scale(c01);
    for n in 1..=max_n {
        let mut next = &base_z * &az[n - 1];
        for jb in 1..=(n - 1) {
            let coef = tables.a.get((0, 1, 0, jb as u32));
            if coef == Complex64::ZERO {
                continue;
            }
            let sign = if jb % 2 == 0 { 1.0 } else { -1.0 };
            next = &next - &az[n - 1 - jb].scale(coef * sign * falling(n - 1, jb));
        }
        az.push(next);
    }

    // A_{zbar^n}: (adag + c10) A_{zbar^{n-1}} + sum_j a_{1 0 j 0} ... A_{zbar^{n-1-j}}.
    // The sign pattern mirrors the product expansion, where the conjugate
    // branch enters with (-1)^{ibar + jbar} = +1; adjoint covariance for
    // regular weights (A_{zbar^n} = A_{z^n}^dag) pins it.
    let mut azb: Vec<FockOperator> = vec![FockOperator::identity(work)];
    let base_zb = &raise + &FockOperator::identity(work).scale(c10);
    for n in 1..=max_nb {
        let mut next = &base_zb * &azb[n - 1];
        for j in 1..=(n - 1) {
            let coef = tables.a.get((1, 0, j as u32, 0));
            if coef == Complex64::ZERO {
                continue;
            }
            next = &next + &azb[n - 1 - j].scale(coef * falling(n - 1, j));
        }
        azb.push(next);
    }

    // separation: A_{z^n zbar^nb} =
    //   sum_{ib <= n, j <= nb} (-1)^ib a_{0 ib j 0} n!/(n-ib)! nb!/(nb-j)!
    //                          A_{z^{n-ib}} A_{zbar^{nb-j}}
    let mut total = DMatrix::<Complex64>::zeros(work, work);
    for (&(n, nb), &coef) in f.iter() {
        let (n, nb) = (n as usize, nb as usize);
        let mut term = DMatrix::<Complex64>::zeros(work, work);
        for ib in 0..=n {
            for j in 0..=nb {
                let a0 = if ib == 0 && j == 0 {
                    Complex64::ONE
                } else {
                    tables.a.get((0, ib as u32, j as u32, 0))
                };
                if a0 == Complex64::ZERO {
                    continue;
                }
                let sign = if ib % 2 == 0 { 1.0 } else { -1.0 };
                let scale = a0 * sign * falling(n, ib) * falling(nb, j);
                let prod = &az[n - ib] * &azb[nb - j];
                term += prod.matrix().map(|x| scale * x);
            }
        }
        total += term.map(|x| coef * x);
    }
    Ok(FockOperator::from_parts(total, 0.0).crop(dim))
}

/// Monomial operator family A_{q^m p^n} in canonical variables; the weight
/// tables must be in the qp representation.
pub fn quantize_poly_qp(
    tables: &WeightTables,
    f: &CoeffTable2,
    dim: usize,
) -> Result<FockOperator> {
    if tables.rep != Rep::Qp || f.rep() != Rep::Qp {
        return Err(Error::RepresentationMismatch);
    }
    let deg = f
        .iter()
        .map(|(&(a, b), _)| (a + b) as usize)
        .max()
        .unwrap_or(0);
    if deg > MAX_POLY_DEGREE {
        return Err(Error::DegreeCap(format!(
            "degree {deg} > {MAX_POLY_DEGREE}"
        )));
    }
    if deg > tables.cap {
        return Err(Error::DegreeCap(format!(
            "weight tables hold degree {} but the symbol needs {deg}",
            tables.cap
        )));
    }
    let work = 2 * dim;
    let (q, p) = quadrature_ops(work)?;
    let c01 = tables.c.get(0, 1);
    let c10 = tables.c.get(1, 0);

    let max_m = f.iter().map(|(&(m, _), _)| m).max().unwrap_or(0) as usize;
    let max_n = f.iter().map(|(&(_, n), _)| n).max().unwrap_or(0) as usize;

    // A_{q^n} = (Q - i c01) A_{q^{n-1}}
    //           + sum_lp (-i)^{lp+1} a_{0 1 0 lp} (n-1)!/(n-1-lp)! A_{q^{n-1-lp}}
    let mut aq: Vec<FockOperator> = vec![FockOperator::identity(work)];
    let base_q = &q - &FockOperator::identity(work).scale(I * c01);
    for n in 1..=max_m {
        let mut next = &base_q * &aq[n - 1];
        for lp in 1..=(n - 1) {
            let coef = tables.a.get((0, 1, 0, lp as u32));
            if coef == Complex64::ZERO {
                continue;
            }
            let phase = (-I).powu(lp as u32 + 1);
            next = &next + &aq[n - 1 - lp].scale(coef * phase * falling(n - 1, lp));
        }
        aq.push(next);
    }

    // A_{p^n} = (P + i c10) A_{p^{n-1}}
    //           + sum_kp i^{kp+1} a_{1 0 kp 0} (n-1)!/(n-1-kp)! A_{p^{n-1-kp}}
    let mut ap: Vec<FockOperator> = vec![FockOperator::identity(work)];
    let base_p = &p + &FockOperator::identity(work).scale(I * c10);
    for n in 1..=max_n {
        let mut next = &base_p * &ap[n - 1];
        for kp in 1..=(n - 1) {
            let coef = tables.a.get((1, 0, kp as u32, 0));
            if coef == Complex64::ZERO {
                continue;
            }
            let phase = I.powu(kp as u32 + 1);
            next = &next + &ap[n - 1 - kp].scale(coef * phase * falling(n - 1, kp));
        }
        ap.push(next);
    }

    // separation: A_{q^m p^n} =
    //   sum_{l <= m, kp <= n} i^{kp - l} a_{0 l kp 0} m!/(m-l)! n!/(n-kp)!
    //                         A_{q^{m-l}} A_{p^{n-kp}}
    let mut total = DMatrix::<Complex64>::zeros(work, work);
    for (&(m, n), &coef) in f.iter() {
        let (m, n) = (m as usize, n as usize);
        let mut term = DMatrix::<Complex64>::zeros(work, work);
        for l in 0..=m {
            for kp in 0..=n {
                let a0 = if l == 0 && kp == 0 {
                    Complex64::ONE
                } else {
                    tables.a.get((0, l as u32, kp as u32, 0))
                };
                if a0 == Complex64::ZERO {
                    continue;
                }
                let phase = I.powi(kp as i32 - l as i32);
                let scale = a0 * phase * falling(m, l) * falling(n, kp);
                let prod = &aq[m - l] * &ap[n - kp];
                term += prod.matrix().map(|x| scale * x);
            }
        }
        total += term.map(|x| coef * x);
    }
    Ok(FockOperator::from_parts(total, 0.0).crop(dim))
}

// ---------------------------------------------------------------------------
// separable pipelines

/// Gaussian convolution of a polynomial: G_sigma\[y^m\](x) =
/// sum_j C(m, 2j) (2j-1)!! sigma^{2j} x^{m-2j}, extended linearly.
pub fn gaussian_convolve_poly(coeffs: &[f64], sigma: f64) -> Vec<f64> {
    let deg = coeffs.len().saturating_sub(1);
    let mut out = vec![0.0; coeffs.len()];
    for (m, &am) in coeffs.iter().enumerate() {
        if am == 0.0 {
            continue;
        }
        let mut dfact = 1.0; // (2j-1)!!
        for j in 0..=(m / 2) {
            if j > 0 {
                dfact *= (2 * j - 1) as f64;
            }
            out[m - 2 * j] +=
                am * binomial(m as i64, 2 * j as i64) * dfact * sigma.powi(2 * j as i32);
        }
    }
    let _ = deg;
    out
}

fn poly_derivative(coeffs: &[f64], times: usize) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    for _ in 0..times {
        if c.len() <= 1 {
            return vec![0.0];
        }
        c = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &v)| k as f64 * v)
            .collect();
    }
    c
}

/// Real-coefficient polynomial of a Hermitian operator, by Horner steps.
pub fn poly_of_operator(coeffs: &[f64], base: &FockOperator) -> FockOperator {
    let dim = base.dim();
    let mut acc = FockOperator::zeros(dim);
    for &ck in coeffs.iter().rev() {
        acc = &(&acc * base) + &FockOperator::identity(dim).scale(Complex64::new(ck, 0.0));
    }
    acc
}

fn operator_power(base: &FockOperator, n: usize) -> FockOperator {
    let mut acc = FockOperator::identity(base.dim());
    for _ in 0..n {
        acc = &acc * base;
    }
    acc
}

/// Separable Gaussian quantization of L(q) p^m: the triple sum over
/// (2u, s, t) with 2u+s+t = m, Gaussian-convolving L with width 1/sigma_d
/// and placing momentum powers to the right.
pub fn quantize_separable_gauss(
    sigma_l: f64,
    sigma_d: f64,
    l: &QFunction,
    m: usize,
    dim: usize,
) -> Result<FockOperator> {
    if m > MAX_P_POWER {
        return Err(Error::DegreeCap(format!(
            "momentum power {m} > {MAX_P_POWER}: factorial growth overwhelms f64"
        )));
    }
    if !(sigma_l > 0.0 && sigma_d > 0.0) {
        return Err(Error::GridParams("gaussian widths must be positive".into()));
    }
    let work = 2 * dim;
    let (q, p) = quadrature_ops(work)?;

    // d^s/dQ^s of the convolved profile, as an operator
    let conv_deriv: Box<dyn Fn(usize) -> Result<FockOperator>> = match l {
        QFunction::Poly(coeffs) => {
            if coeffs.len() > MAX_POLY_DEGREE + 1 {
                return Err(Error::DegreeCap(format!(
                    "q-polynomial degree {} > {MAX_POLY_DEGREE}",
                    coeffs.len() - 1
                )));
            }
            let smoothed = gaussian_convolve_poly(coeffs, 1.0 / sigma_d);
            let q = q.clone();
            Box::new(move |s: usize| Ok(poly_of_operator(&poly_derivative(&smoothed, s), &q)))
        }
        QFunction::Callable(func) => {
            // spectral route: g(Q) through the eigensystem of the truncated Q
            let herm = q.matrix().map(|c| c.re);
            let eig = herm.symmetric_eigen();
            let func = func.clone();
            let sigma = 1.0 / sigma_d;
            let (t, wgh) = gauss_hermite(80)?;
            Box::new(move |s: usize| {
                let gvals: Vec<f64> = eig
                    .eigenvalues
                    .iter()
                    .map(|&x| {
                        // s-th derivative of the Gaussian convolution via the
                        // Hermite-kernel representation
                        let mut acc = 0.0;
                        for (tk, wk) in t.iter().zip(&wgh) {
                            acc += wk
                                * crate::special::hermite_h(s, *tk)
                                * func(x - sigma * std::f64::consts::SQRT_2 * tk);
                        }
                        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                        sign * acc
                            / std::f64::consts::PI.sqrt()
                            / (sigma * std::f64::consts::SQRT_2).powi(s as i32)
                    })
                    .collect();
                let mut mat = DMatrix::<f64>::zeros(eig.eigenvalues.len(), eig.eigenvalues.len());
                for (k, g) in gvals.iter().enumerate() {
                    mat[(k, k)] = *g;
                }
                let back = &eig.eigenvectors * mat * eig.eigenvectors.transpose();
                Ok(FockOperator::from_parts(
                    back.map(|x| Complex64::new(x, 0.0)),
                    0.0,
                ))
            })
        }
    };

    let mut total = FockOperator::zeros(work);
    for u in 0..=(m / 2) {
        for s in 0..=(m - 2 * u) {
            let t = m - 2 * u - s;
            let multinomial = factorial(m) / (factorial(2 * u) * factorial(s) * factorial(t));
            let gamma_ratio = factorial(2 * u) / (4.0f64.powi(u as i32) * factorial(u));
            let coef = 2.0f64.powi(u as i32 - s as i32)
                * multinomial
                * sigma_l.powi(-2 * (u as i32))
                * gamma_ratio;
            let phase = (-I).powu(s as u32) * coef;
            let gq = conv_deriv(s)?;
            let term = &gq * &operator_power(&p, t);
            total = &total + &term.scale(phase);
        }
    }
    Ok(total.crop(dim))
}

/// Weyl-calculus quantization of L(q) p^m for the constant weight:
/// sum_t 2^{t-m} C(m,t) (-i)^{m-t} L^{(m-t)}(Q) P^t.
pub fn quantize_ww_separable(l_coeffs: &[f64], m: usize, dim: usize) -> Result<FockOperator> {
    if m > 6 {
        return Err(Error::DegreeCap(format!("momentum power {m} > 6")));
    }
    if l_coeffs.len() > MAX_POLY_DEGREE + 1 {
        return Err(Error::DegreeCap(format!(
            "q-polynomial degree {} > {MAX_POLY_DEGREE}",
            l_coeffs.len() - 1
        )));
    }
    let work = 2 * dim;
    let (q, p) = quadrature_ops(work)?;
    let mut total = FockOperator::zeros(work);
    for t in 0..=m {
        let coef = 2.0f64.powi(t as i32 - m as i32) * binomial(m as i64, t as i64);
        let phase = (-I).powu((m - t) as u32) * coef;
        let lq = poly_of_operator(&poly_derivative(l_coeffs, m - t), &q);
        let term = &lq * &operator_power(&p, t);
        total = &total + &term.scale(phase);
    }
    Ok(total.crop(dim))
}

/// Weyl symmetrizer: the average of all orderings of m copies of `a` and
/// n copies of `b`, via the recursion
/// S(m,n) = (m a S(m-1,n) + n b S(m,n-1)) / (m+n).
pub fn weyl_symmetrizer(a: &FockOperator, m: usize, b: &FockOperator, n: usize) -> FockOperator {
    fn rec(a: &FockOperator, m: usize, b: &FockOperator, n: usize) -> FockOperator {
        if m == 0 && n == 0 {
            return FockOperator::identity(a.dim());
        }
        let total = (m + n) as f64;
        let mut acc = FockOperator::zeros(a.dim());
        if m > 0 {
            acc = &acc + &(a * &rec(a, m - 1, b, n)).scale(Complex64::new(m as f64 / total, 0.0));
        }
        if n > 0 {
            acc = &acc + &(b * &rec(a, m, b, n - 1)).scale(Complex64::new(n as f64 / total, 0.0));
        }
        acc
    }
    rec(a, m, b, n)
}

// ---------------------------------------------------------------------------
// dispatcher

/// Pipeline selector mirroring the CLI flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Auto,
    Quadrature,
    Poly,
    Kernel,
}

/// Builds the weight tables needed by the closed pipelines at a given cap.
pub fn tables_for(w: &WeightSpec, cap: usize, rep: Rep) -> Result<WeightTables> {
    let _ = weight_taylor(w, cap, rep)?; // early, clearer error for non-analytic kinds
    WeightTables::build(w, cap, rep)
}

/// Quantizes a symbol, choosing a route when asked to. Returns the operator
/// together with the name of the pipeline actually used.
pub fn quantize(
    w: &WeightSpec,
    f: &SymbolExpr,
    dim: usize,
    pipeline: Pipeline,
) -> Result<(FockOperator, &'static str)> {
    match pipeline {
        Pipeline::Poly => {
            let table = f.as_poly(Rep::Qp)?;
            let deg = f.degree().unwrap_or(MAX_POLY_DEGREE).max(2);
            let tables = tables_for(w, deg.min(crate::weights::MAX_TAYLOR_DEGREE), Rep::Qp)?;
            Ok((quantize_poly_qp(&tables, &table, dim)?, "poly-qp"))
        }
        Pipeline::Kernel => {
            let rule = crate::kernel::XRule::gauss(2 * dim + 48)?;
            Ok((
                crate::kernel::position_kernel(w, f, dim, &rule)?.op,
                "kernel",
            ))
        }
        Pipeline::Quadrature => {
            let grid = default_quadrature_grid(w, f, dim)?;
            Ok((quantize_grid(w, f, dim, &grid)?, "quad"))
        }
        Pipeline::Auto => {
            if let SymbolExpr::SeparableLqPm { l, m } = f {
                match w.kind() {
                    WeightKind::Constant => {
                        if let QFunction::Poly(c) = l {
                            return Ok((quantize_ww_separable(c, *m, dim)?, "weyl-separable"));
                        }
                    }
                    WeightKind::SeparableGaussian { sigma_l, sigma_d } => {
                        return Ok((
                            quantize_separable_gauss(*sigma_l, *sigma_d, l, *m, dim)?,
                            "gauss-separable",
                        ));
                    }
                    _ => {}
                }
            }
            match f {
                SymbolExpr::PolyZ(table) if w.is_analytic() => {
                    let deg = f.degree().unwrap_or(MAX_POLY_DEGREE).max(2);
                    let tables = tables_for(w, deg.min(crate::weights::MAX_TAYLOR_DEGREE), Rep::Z)?;
                    Ok((quantize_poly_z(&tables, table, dim)?, "poly-z"))
                }
                SymbolExpr::PolyQp(_) | SymbolExpr::PolyZ(_) | SymbolExpr::SeparableLqPm { .. }
                    if w.is_analytic() =>
                {
                    quantize(w, f, dim, Pipeline::Poly)
                }
                _ => quantize(w, f, dim, Pipeline::Quadrature),
            }
        }
    }
}

/// Default quadrature grid for a weight: Gauss-Hermite matched to the
/// weight's Gaussian widths. Errors for non-decaying weights.
pub fn default_quadrature_grid(
    w: &WeightSpec,
    f: &SymbolExpr,
    dim: usize,
) -> Result<Arc<PhaseGrid>> {
    if let SymbolExpr::Sampled(field) = f {
        return Ok(field.grid().clone());
    }
    let (sq, sp) = match w.kind() {
        WeightKind::CahillGlauber(s) if s.re < 0.0 => {
            let sigma = (-2.0 / s.re).sqrt();
            (sigma, sigma)
        }
        WeightKind::SeparableGaussian { sigma_l, sigma_d } => (*sigma_l, *sigma_d),
        _ => return Err(Error::DivergenceRisk),
    };
    // The integrand carries the weight's Gaussian times the e^{-|z|^2/2}
    // envelope of the displacement matrix elements; matching the grid to
    // the combined width makes the integrand polynomial-times-matched-
    // Gaussian, which the rule integrates exactly up to its degree.
    let eff = |sigma: f64| (1.0 / (1.0 / (sigma * sigma) + 0.5)).sqrt();
    let (sq, sp) = (eff(sq), eff(sp));
    let order = gauss_hermite_order_for(sq, sp).max(2 * dim + 64);
    make_grid(GridScheme::TensorGaussHermite {
        sigma_q: sq,
        sigma_p: sp,
        order,
    })
}
