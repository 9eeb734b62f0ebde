//! Position-representation pipeline: integral kernels A(x, x') built from
//! partial Fourier transforms of the weight, projected onto the oscillator
//! eigenfunctions. Serves as an independent cross-check of the phase-space
//! and coefficient pipelines.
//!
//! Polynomial momentum dependence makes the kernel distributional (a
//! derivative of the diagonal delta); those derivatives are applied to the
//! regular factor analytically, so only genuinely decaying symbols produce
//! samplable kernels.

use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::quantize::{QFunction, SymbolExpr};
use crate::sft::{partial_ft_p, GridScheme, PartialFtSource, PhaseField};
use crate::special::{binomial, gauss_hermite_modified, hermite_functions};
use crate::weights::{Rep, WeightKind, WeightSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Quadrature rule on the position line. Weights absorb the measure, so
/// sum_i w_i g(x_i) approximates the plain integral of g.
#[derive(Clone, Debug)]
pub struct XRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl XRule {
    /// Gauss-Hermite with un-damped weights; exact for polynomials times
    /// the squared oscillator ground state.
    pub fn gauss(order: usize) -> Result<Self> {
        let (nodes, weights) = gauss_hermite_modified(order)?;
        Ok(Self { nodes, weights })
    }

    /// Uniform midpoint rule on [-L, L].
    pub fn uniform(half_width: f64, points: usize) -> Result<Self> {
        if points < 8 || half_width <= 0.0 || half_width.is_nan() {
            return Err(Error::GridParams("under-resolved x grid".into()));
        }
        let h = 2.0 * half_width / points as f64;
        let nodes = (0..points)
            .map(|j| -half_width + (j as f64 + 0.5) * h)
            .collect();
        Ok(Self {
            nodes,
            weights: vec![h; points],
        })
    }
}

/// Result of a kernel construction: sample matrix (when the kernel is a
/// regular function) and the operator projected on the first `dim`
/// oscillator states.
#[derive(Clone, Debug)]
pub struct KernelProjection {
    pub x_nodes: Vec<f64>,
    pub samples: Option<DMatrix<Complex64>>,
    pub op: FockOperator,
}

/// Equivalent separable-Gaussian widths of a weight, when they exist.
fn gaussian_widths(w: &WeightSpec) -> Result<(f64, f64)> {
    match w.kind() {
        WeightKind::SeparableGaussian { sigma_l, sigma_d } => Ok((*sigma_l, *sigma_d)),
        WeightKind::CahillGlauber(s) if s.im == 0.0 && s.re < 0.0 => {
            let sigma = (-2.0 / s.re).sqrt();
            Ok((sigma, sigma))
        }
        other => Err(Error::UnsupportedCombination(format!(
            "position kernel needs a Gaussian-decaying weight, got {other:?}"
        ))),
    }
}

/// Oscillator eigenfunction table: row b holds h_b at the rule nodes.
fn hermite_table(rows: usize, rule: &XRule) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(rows, rule.nodes.len());
    for (i, &x) in rule.nodes.iter().enumerate() {
        for (b, v) in hermite_functions(rows - 1, x).into_iter().enumerate() {
            h[(b, i)] = v;
        }
    }
    h
}

/// d/dx applied to each eigenfunction row: h_b' = sqrt(b/2) h_{b-1}
/// - sqrt((b+1)/2) h_{b+1}. Consumes one top row per application.
fn differentiate_rows(h: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = h.nrows() - 1;
    let mut out = DMatrix::zeros(rows, h.ncols());
    for b in 0..rows {
        for i in 0..h.ncols() {
            let lower = if b > 0 {
                (b as f64 / 2.0).sqrt() * h[(b - 1, i)]
            } else {
                0.0
            };
            out[(b, i)] = lower - ((b as f64 + 1.0) / 2.0).sqrt() * h[(b + 1, i)];
        }
    }
    out
}

/// Gaussian convolution of a complex-coefficient polynomial in one
/// variable: the width-sigma heat smoothing of sum a_m y^m.
fn convolve_complex_poly(coeffs: &[Complex64], sigma: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; coeffs.len().max(1)];
    for (m, &am) in coeffs.iter().enumerate() {
        if am == Complex64::ZERO {
            continue;
        }
        let mut dfact = 1.0;
        for j in 0..=(m / 2) {
            if j > 0 {
                dfact *= (2 * j - 1) as f64;
            }
            out[m - 2 * j] +=
                am * binomial(m as i64, 2 * j as i64) * dfact * sigma.powi(2 * j as i32);
        }
    }
    out
}

fn complex_poly_derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    if coeffs.len() <= 1 {
        return vec![Complex64::ZERO];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &v)| k as f64 * v)
        .collect()
}

fn eval_complex_poly(coeffs: &[Complex64], x: f64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::ZERO, |acc, &ck| acc * x + ck)
}

/// The operator of u(q) p^n in the position representation, through the
/// kernel's delta-derivative calculus. `u` has ascending complex
/// coefficients.
fn poly_momentum_term(
    sigma_l: f64,
    sigma_d: f64,
    u: &[Complex64],
    n: usize,
    dim: usize,
    rule: &XRule,
) -> FockOperator {
    let smoothed = convolve_complex_poly(u, 1.0 / sigma_d);
    // derivative ladder of the smoothed profile
    let mut g2: Vec<Vec<Complex64>> = vec![smoothed];
    for _ in 0..n {
        let next = complex_poly_derivative(g2.last().unwrap());
        g2.push(next);
    }
    // Taylor coefficients of the difference Gaussian at zero
    let alpha = 0.5 / (sigma_l * sigma_l);
    let g1_at_zero = |j: usize| -> f64 {
        if j % 2 == 1 {
            0.0
        } else {
            let r = j / 2;
            crate::special::factorial(j) * (-alpha).powi(r as i32) / crate::special::factorial(r)
        }
    };

    // eigenfunction rows with headroom for n derivatives
    let h = hermite_table(dim + n + 1, rule);
    let mut h_deriv: Vec<DMatrix<f64>> = vec![h.clone()];
    for _ in 0..n {
        let next = differentiate_rows(h_deriv.last().unwrap());
        h_deriv.push(next);
    }

    let nodes = rule.nodes.len();
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    let phase = I.powu(n as u32) * if n % 2 == 0 { 1.0 } else { -1.0 };
    for k in 0..=n {
        for j in (0..=(n - k)).step_by(2) {
            let g1 = g1_at_zero(j);
            if g1 == 0.0 {
                continue;
            }
            let m = n - k - j;
            let coef = phase
                * binomial(n as i64, k as i64)
                * binomial((n - k) as i64, j as i64)
                * (if j % 2 == 0 { 1.0 } else { -1.0 })
                * g1
                * 2.0f64.powi(-(m as i32));
            // X_{ab} = sum_i w_i h_a(x_i) g2^{(m)}(x_i) hk_b(x_i)
            let hk = &h_deriv[k];
            for i in 0..nodes {
                let gv = coef * rule.weights[i] * eval_complex_poly(&g2[m], rule.nodes[i]);
                if gv == Complex64::ZERO {
                    continue;
                }
                for a in 0..dim {
                    let ha = h[(a, i)];
                    if ha == 0.0 {
                        continue;
                    }
                    for b in 0..dim {
                        acc[(a, b)] += gv * ha * hk[(b, i)];
                    }
                }
            }
        }
    }
    FockOperator::from_parts(acc, 0.0)
}

fn project_kernel(samples: &DMatrix<Complex64>, dim: usize, rule: &XRule) -> FockOperator {
    let h = hermite_table(dim, rule);
    let n = rule.nodes.len();
    let mut hw = DMatrix::<Complex64>::zeros(dim, n);
    for a in 0..dim {
        for i in 0..n {
            hw[(a, i)] = Complex64::new(h[(a, i)] * rule.weights[i], 0.0);
        }
    }
    let op = &hw * samples * hw.adjoint().map(|c| c.conj()); // hw real: adjoint = transpose
    FockOperator::from_parts(op, 0.0)
}

/// Kernel of the bare M operator, M(x, x') =
/// (1/sqrt(2 pi)) PiHat_p(x - x', -(x + x')/2), sampled and projected.
pub fn m_position_kernel(w: &WeightSpec, dim: usize, rule: &XRule) -> Result<KernelProjection> {
    let n = rule.nodes.len();
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut k = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (x, xp) = (rule.nodes[i], rule.nodes[j]);
            k[(i, j)] = norm * partial_ft_p(PartialFtSource::Weight(w), x - xp, -0.5 * (x + xp))?;
        }
    }
    let op = project_kernel(&k, dim, rule);
    Ok(KernelProjection {
        x_nodes: rule.nodes.clone(),
        samples: Some(k),
        op,
    })
}

/// Position-representation quantization. Polynomial symbols go through the
/// delta-derivative calculus (no samplable kernel); sampled symbols with a
/// p-decaying profile produce a regular kernel that is sampled on the rule
/// nodes and projected.
pub fn position_kernel(
    w: &WeightSpec,
    f: &SymbolExpr,
    dim: usize,
    rule: &XRule,
) -> Result<KernelProjection> {
    match f {
        SymbolExpr::PolyQp(_) | SymbolExpr::PolyZ(_) => {
            let (sigma_l, sigma_d) = gaussian_widths(w)?;
            let table = f.as_poly(Rep::Qp)?;
            // group the table by momentum power
            let max_n = table.iter().map(|(&(_, n), _)| n).max().unwrap_or(0) as usize;
            let max_m = table.iter().map(|(&(m, _), _)| m).max().unwrap_or(0) as usize;
            let mut op = FockOperator::zeros(dim);
            for n in 0..=max_n {
                let mut u = vec![Complex64::ZERO; max_m + 1];
                let mut any = false;
                for (&(m, np), &cv) in table.iter() {
                    if np as usize == n {
                        u[m as usize] = cv;
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                op = &op + &poly_momentum_term(sigma_l, sigma_d, &u, n, dim, rule);
            }
            Ok(KernelProjection {
                x_nodes: rule.nodes.clone(),
                samples: None,
                op,
            })
        }
        SymbolExpr::SeparableLqPm {
            l: QFunction::Poly(coeffs),
            m,
        } => {
            let (sigma_l, sigma_d) = gaussian_widths(w)?;
            let u: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            let op = poly_momentum_term(sigma_l, sigma_d, &u, *m, dim, rule);
            Ok(KernelProjection {
                x_nodes: rule.nodes.clone(),
                samples: None,
                op,
            })
        }
        SymbolExpr::SeparableLqPm { .. } => Err(Error::UnsupportedCombination(
            "kernel pipeline needs a polynomial q-profile".into(),
        )),
        SymbolExpr::Sampled(field) => sampled_kernel(w, field, dim, rule),
    }
}

/// Regular kernel for a sampled symbol:
/// A(x, x') = (1/2pi) int dq FHat_p(q, x'-x) PiHat_p(x-x', q-(x+x')/2),
/// with the q-integral discretized over the field's rows.
fn sampled_kernel(
    w: &WeightSpec,
    field: &PhaseField,
    dim: usize,
    rule: &XRule,
) -> Result<KernelProjection> {
    let grid = field.grid();
    let GridScheme::CartesianUniform { half_width, points } = *grid.scheme() else {
        return Err(Error::UnsupportedGrid);
    };
    let hq = std::f64::consts::SQRT_2 * 2.0 * half_width / points as f64;
    let q_rows: Vec<f64> = grid
        .axis()
        .iter()
        .map(|&x| std::f64::consts::SQRT_2 * x)
        .collect();
    let n = rule.nodes.len();
    let norm = 1.0 / (2.0 * std::f64::consts::PI);

    // cache the field's partial transform per row and per y = x' - x
    let mut k = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (x, xp) = (rule.nodes[i], rule.nodes[j]);
            let y = xp - x;
            let mut acc = Complex64::ZERO;
            for (&qr, _) in q_rows.iter().zip(0..) {
                let fhat = partial_ft_p(PartialFtSource::Field(field), qr, y)?;
                if fhat == Complex64::ZERO {
                    continue;
                }
                let pihat = partial_ft_p(PartialFtSource::Weight(w), x - xp, qr - 0.5 * (x + xp))?;
                acc += fhat * pihat;
            }
            k[(i, j)] = norm * hq * acc;
        }
    }
    let op = project_kernel(&k, dim, rule);
    Ok(KernelProjection {
        x_nodes: rule.nodes.clone(),
        samples: Some(k),
        op,
    })
}
