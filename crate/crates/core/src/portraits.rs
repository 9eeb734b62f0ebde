//! Semiclassical portraits: lower symbols z -> tr(M(z) A), the parity-based
//! phase-space function of the constant weight, POVM diagnostics of the
//! displaced M family, and the quantization-dequantization duality check.

use crate::error::Result;
use crate::fock::{displacement, trace_pair, FockOperator};
use crate::quantize::{build_m, quantize, MOp, MPath, Pipeline, SymbolExpr};
use crate::sft::{PhaseField, PhaseGrid};
use crate::weights::WeightSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

/// Radius inside which displaced-operator traces at truncation `dim` are
/// trustworthy: the coherent tail beyond the kept levels stays below 1e-8
/// for |z| <= sqrt(dim)/2.
pub fn l_safe(dim: usize) -> f64 {
    (dim as f64).sqrt() / 2.0
}

/// Row-sparse view of an operator for fast per-node contractions.
struct SparseRows {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseRows {
    fn new(a: &FockOperator) -> Self {
        let dim = a.dim();
        let rows = (0..dim)
            .map(|r| {
                (0..dim)
                    .filter_map(|c| {
                        let v = a.entry(r, c);
                        (v != Complex64::ZERO).then_some((c, v))
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }
}

/// Lower symbol of an operator: the field z -> tr(M(z) A). Sets the
/// radius warning when the grid reaches beyond the displacement-accuracy
/// radius for this truncation.
pub fn lower_symbol(mop: &MOp, a: &FockOperator, grid: &Arc<PhaseGrid>) -> Result<PhaseField> {
    let dim = mop.dim();
    assert_eq!(dim, a.dim(), "operator and M dimensions must match");
    let m = mop.matrix();

    // closed-form M operators of isotropic weights are exactly diagonal
    let mut diag: Option<Vec<Complex64>> = Some((0..dim).map(|n| m.entry(n, n)).collect());
    'scan: for r in 0..dim {
        for c in 0..dim {
            if r != c && m.entry(r, c) != Complex64::ZERO {
                diag = None;
                break 'scan;
            }
        }
    }

    let values: Vec<Complex64> = match diag {
        Some(mdiag) => {
            let max_m = mdiag.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let n_eff = (0..dim)
                .rev()
                .find(|&n| mdiag[n].norm() > 1e-18 * max_m)
                .map_or(0, |n| n + 1);
            let asp = SparseRows::new(a);
            grid.nodes()
                .par_iter()
                .map(|&pt| {
                    let d = displacement(pt, dim)?;
                    let dm = d.matrix();
                    let mut acc = Complex64::ZERO;
                    // tr(D diag(m) D^dag A) = sum_n m_n (D e_n)^dag A (D e_n)
                    for n in 0..n_eff {
                        let mut col_acc = Complex64::ZERO;
                        for (arow, row) in asp.rows.iter().enumerate() {
                            let mut av = Complex64::ZERO;
                            for &(b, v) in row {
                                av += v * dm[(b, n)];
                            }
                            col_acc += dm[(arow, n)].conj() * av;
                        }
                        acc += mdiag[n] * col_acc;
                    }
                    Ok(acc)
                })
                .collect::<Result<_>>()?
        }
        None => grid
            .nodes()
            .par_iter()
            .map(|&pt| {
                let d = displacement(pt, dim)?;
                let mz = &(d.matrix() * m.matrix()) * d.matrix().adjoint();
                let mut acc = Complex64::ZERO;
                for r in 0..dim {
                    for c in 0..dim {
                        acc += mz[(r, c)] * a.entry(c, r);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?,
    };

    let mut field = PhaseField::from_values(grid.clone(), values)?;
    field.radius_warning = grid.max_radius() > l_safe(dim);
    Ok(field)
}

/// Phase-space function of the constant weight: tr(D(z) 2P D(z)^dag A).
/// Faithful for trace-class operators; polynomial symbols go through
/// `wigner_symbol_regularized` instead.
pub fn wigner_map(a: &FockOperator, grid: &Arc<PhaseGrid>) -> Result<PhaseField> {
    let mop = MOp::new(&WeightSpec::constant(), a.dim(), &MPath::Closed)?;
    lower_symbol(&mop, a, grid)
}

/// Constant-weight lower symbol through the damped family e^{nu |z|^2},
/// whose M operators are the closed geometric diagonals, extrapolated to
/// nu -> 0 node by node. For operators quantized from polynomials the
/// damped traces depend polynomially on the damping, so the extrapolation
/// recovers the exact symbol up to truncation tails.
pub fn wigner_symbol_regularized(
    a: &FockOperator,
    grid: &Arc<PhaseGrid>,
    schedule: &[f64],
) -> Result<PhaseField> {
    assert!(!schedule.is_empty() && schedule.iter().all(|&nu| nu < 0.0));
    let dim = a.dim();
    let mut stages = Vec::with_capacity(schedule.len());
    for &nu in schedule {
        let w = WeightSpec::cahill_glauber(Complex64::new(2.0 * nu, 0.0))?;
        let mop = MOp::new(&w, dim, &MPath::Closed)?;
        stages.push(lower_symbol(&mop, a, grid)?);
    }
    let mut values = vec![Complex64::ZERO; grid.len()];
    for (i, stage) in stages.iter().enumerate() {
        let mut coef = 1.0;
        for (j, &pj) in schedule.iter().enumerate() {
            if j != i {
                coef *= pj / (pj - schedule[i]);
            }
        }
        for (v, s) in values.iter_mut().zip(stage.values()) {
            *v += coef * s;
        }
    }
    let mut field = PhaseField::from_values(grid.clone(), values)?;
    field.radius_warning = grid.max_radius() > l_safe(dim);
    Ok(field)
}

/// Default damping schedule for regularized portraits.
pub const DAMPING_SCHEDULE: [f64; 3] = [-0.4, -0.2, -0.1];

/// Diagnostic of the displaced M family as a candidate positive
/// operator-valued measure.
#[derive(Clone, Debug)]
pub struct PovmReport {
    pub min_eigenvalue: f64,
    /// interior-block norm of (integral of M(z) - identity); absent for
    /// non-decaying weights, whose resolution integral is only
    /// conditionally convergent
    pub resolution_residual: Option<f64>,
    pub positive: bool,
    pub regularized: bool,
}

pub fn povm_diagnostic(w: &WeightSpec, dim: usize, grid: &Arc<PhaseGrid>) -> Result<PovmReport> {
    let (m, regularized) = match build_m(w, dim, &MPath::Closed) {
        Ok(m) => (m, false),
        Err(_) => (
            build_m(w, dim, &MPath::Regularized(DAMPING_SCHEDULE.to_vec()))?,
            true,
        ),
    };
    let min_eigenvalue = m.hermitian_eigenvalues()[0];
    let resolution_residual = if w.decays() {
        let mop = MOp::new(w, dim, &MPath::Closed)?;
        let partials: Vec<DMatrix<Complex64>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mz = mop.displaced(grid.nodes()[i])?;
                Ok(mz.matrix().map(|x| grid.qweights()[i] * x))
            })
            .collect::<Result<_>>()?;
        let mut total = DMatrix::<Complex64>::zeros(dim, dim);
        for p in partials {
            total += p;
        }
        let resolved = FockOperator::from_parts(total, 0.0);
        Some(resolved.max_abs_diff_on(&FockOperator::identity(dim), dim / 2))
    } else {
        None
    };
    Ok(PovmReport {
        min_eigenvalue,
        resolution_residual,
        positive: min_eigenvalue >= -1e-10,
        regularized,
    })
}

/// Both sides of the dual-pairing identity
/// integral f(z) tr(M(z) A) d^2z/pi = tr(A A_f), with their difference.
#[derive(Clone, Debug)]
pub struct DualityReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub accuracy_warning: bool,
}

pub fn duality_check(
    w: &WeightSpec,
    f: &SymbolExpr,
    a: &FockOperator,
    grid: &Arc<PhaseGrid>,
) -> Result<DualityReport> {
    let dim = a.dim();
    let mop = match MOp::new(w, dim, &MPath::Closed) {
        Ok(m) => m,
        Err(_) => MOp::new(w, dim, &MPath::Regularized(DAMPING_SCHEDULE.to_vec()))?,
    };
    let field = lower_symbol(&mop, a, grid)?;
    let lhs = field.integrate_against(|pt| f.eval(pt).unwrap_or(Complex64::ZERO));
    let (af, _) = quantize(w, f, dim, Pipeline::Auto)?;
    // tr(A . A_f) = tr((A^dag)^dag A_f)
    let rhs = trace_pair(&a.adjoint(), &af)?;
    Ok(DualityReport {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        accuracy_warning: field.radius_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PhasePoint;
    use crate::fock::{coherent, outer, FockVector};
    use crate::sft::{make_grid, GridScheme};
    use crate::weights::WeightKind;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cg(s: f64) -> WeightSpec {
        WeightSpec::cahill_glauber(c(s, 0.0)).unwrap()
    }

    fn cart(l: f64, m: usize) -> Arc<PhaseGrid> {
        make_grid(GridScheme::CartesianUniform {
            half_width: l,
            points: m,
        })
        .unwrap()
    }

    #[test]
    fn identity_has_unit_lower_symbol() {
        let dim = 112;
        let grid = cart(4.5, 24);
        for w in [cg(-0.5), cg(-1.0)] {
            let mop = MOp::new(&w, dim, &MPath::Closed).unwrap();
            let field = lower_symbol(&mop, &FockOperator::identity(dim), &grid).unwrap();
            let err = field.max_abs_error(|_| Complex64::ONE);
            assert!(err < 1e-7, "{w}: {err}");
        }
        // the constant weight's M is not trace class, so the identity's
        // symbol comes out of the damped-family extrapolation
        let field =
            wigner_symbol_regularized(&FockOperator::identity(dim), &grid, &DAMPING_SCHEDULE)
                .unwrap();
        let err = field.max_abs_error(|_| Complex64::ONE);
        assert!(err < 1e-7, "regularized: {err}");
    }

    #[test]
    fn parity_weight_portrait_of_ground_state() {
        // 2 e^{-2|z|^2}, positive everywhere; oracle is the alternating
        // coherent expansion 2 sum (-1)^n |<e_n|-z>|^2
        let dim = 112;
        let grid = cart(4.5, 40);
        let ground = outer(
            &FockVector::basis_state(0, dim),
            &FockVector::basis_state(0, dim),
        );
        let field = wigner_map(&ground, &grid).unwrap();
        let err = field.max_abs_error(|pt| c(2.0 * (-2.0 * pt.z().norm_sqr()).exp(), 0.0));
        assert!(err < 1e-6, "{err}");
        // positive everywhere, up to truncation noise in the far corners
        assert!(field.values().iter().all(|v| v.re > -1e-5));
        // oracle at one specific point
        let pt = grid.nodes()[5];
        let vneg = coherent(PhasePoint::new(-pt.q, -pt.p), dim).unwrap();
        let oracle: f64 = vneg
            .entries
            .iter()
            .enumerate()
            .map(|(n, amp)| 2.0 * if n % 2 == 0 { 1.0 } else { -1.0 } * amp.norm_sqr())
            .sum();
        assert!((field.values()[5].re - oracle).abs() < 1e-9);
    }

    #[test]
    fn parity_weight_portrait_of_first_excited_is_negative_at_origin() {
        let dim = 96;
        let grid = cart(4.4, 64); // fine grid, node near the origin
        let state = outer(
            &FockVector::basis_state(1, dim),
            &FockVector::basis_state(1, dim),
        );
        let field = wigner_map(&state, &grid).unwrap();
        // nearest node to the origin sits at (h/2, h/2); the exact value
        // there is -2 (1 - 4|z|^2) e^{-2|z|^2}, approaching -2 at 0
        let (idx, _) = grid
            .nodes()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.z().norm().total_cmp(&b.1.z().norm()))
            .unwrap();
        let v = field.values()[idx];
        let t = grid.nodes()[idx].z().norm_sqr();
        let exact = -2.0 * (1.0 - 4.0 * t) * (-2.0 * t).exp();
        assert!((v.re - exact).abs() < 1e-8, "{v} vs {exact}");
        assert!(v.re < -1.8, "{v}");
    }

    #[test]
    fn anti_normal_portrait_is_husimi() {
        let dim = 128;
        let grid = cart(4.5, 40);
        let mop = MOp::new(&cg(-1.0), dim, &MPath::Closed).unwrap();
        let ground = outer(
            &FockVector::basis_state(0, dim),
            &FockVector::basis_state(0, dim),
        );
        let field = lower_symbol(&mop, &ground, &grid).unwrap();
        let err = field.max_abs_error(|pt| c((-pt.z().norm_sqr()).exp(), 0.0));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn regularized_symbol_recovery_for_quadratics() {
        // the damped-family extrapolation returns the classical symbol of
        // constant-weight quantized polynomials
        let dim = 160;
        let grid = cart(4.4, 24);
        for expr in ["q", "p", "q^2", "q*p"] {
            let f = SymbolExpr::parse(expr).unwrap();
            let (a, _) = quantize(&WeightSpec::constant(), &f, dim, Pipeline::Poly).unwrap();
            let field = wigner_symbol_regularized(&a, &grid, &DAMPING_SCHEDULE).unwrap();
            let err = field.max_abs_error(|pt| f.eval(pt).unwrap());
            assert!(err < 1e-6, "{expr}: {err}");
        }
    }

    #[test]
    fn smoothing_structure_of_anti_normal_symbols() {
        // below the anti-normal point the lower symbol of A_f is the
        // Gaussian smoothing of f; for f = q^2 the smoothing adds the
        // kernel variance -s
        let dim = 128;
        let grid = cart(4.4, 24);
        for s in [-1.0, -2.0] {
            let w = cg(s);
            let f = SymbolExpr::parse("q^2").unwrap();
            let (af, _) = quantize(&w, &f, dim, Pipeline::Poly).unwrap();
            let mop = MOp::new(&w, dim, &MPath::Closed).unwrap();
            let field = lower_symbol(&mop, &af, &grid).unwrap();
            let err = field.max_abs_error(|pt| c(pt.q * pt.q - s, 0.0));
            assert!(err < 1e-6, "s={s}: {err}");
        }
    }

    #[test]
    fn povm_verdicts_by_weight() {
        let grid = make_grid(GridScheme::TensorGaussHermite {
            sigma_q: 1.2,
            sigma_p: 1.2,
            order: 80,
        })
        .unwrap();
        let dim = 32;

        let anti = povm_diagnostic(&cg(-1.0), dim, &grid).unwrap();
        assert!(anti.positive);
        assert!(anti.min_eigenvalue.abs() < 1e-12);

        let ww = povm_diagnostic(&WeightSpec::constant(), dim, &grid).unwrap();
        assert!(!ww.positive);
        assert!((ww.min_eigenvalue + 2.0).abs() < 1e-12);
        assert!(ww.resolution_residual.is_none());

        let sub = povm_diagnostic(&cg(-2.0), dim, &grid).unwrap();
        assert!(sub.positive);
        // eigenvalues (2/3)(1/3)^n
        assert!(sub.min_eigenvalue > 0.0);
        assert!(sub.min_eigenvalue < 1e-12_f64.max((2.0 / 3.0) * (1.0f64 / 3.0).powi(31)) * 10.0);
    }

    #[test]
    fn resolution_residual_for_decaying_weight() {
        let w = cg(-0.5);
        let grid =
            crate::quantize::default_quadrature_grid(&w, &SymbolExpr::poly_qp(&[]), 16).unwrap();
        let report = povm_diagnostic(&w, 16, &grid).unwrap();
        let residual = report.resolution_residual.unwrap();
        assert!(residual < 1e-6, "{residual}");
    }

    #[test]
    fn duality_examples() {
        // f = 1: both sides are tr(A)
        let dim = 112;
        let grid = cart(4.4, 32);
        let v = coherent(PhasePoint::new(0.4, -0.3), dim).unwrap();
        let rho = outer(&v, &v);
        let one = SymbolExpr::parse("1").unwrap();
        let rep = duality_check(&cg(-1.0), &one, &rho, &grid).unwrap();
        assert!(rep.residual < 1e-6, "{}", rep.residual);
        assert!((rep.rhs - Complex64::ONE).norm() < 1e-8);

        // constant weight, f = q^2, ground state: both sides 1/2
        let dim = 128;
        let grid = cart(4.4, 48);
        let ground = outer(
            &FockVector::basis_state(0, dim),
            &FockVector::basis_state(0, dim),
        );
        let f = SymbolExpr::parse("q^2").unwrap();
        let rep = duality_check(&WeightSpec::constant(), &f, &ground, &grid).unwrap();
        assert!((rep.rhs - c(0.5, 0.0)).norm() < 1e-10, "{}", rep.rhs);
        assert!(rep.residual < 1e-5, "{}", rep.residual);

        // anti-normal, f = |z|^2, ground state: both sides 1
        let f = SymbolExpr::parse("z*zbar").unwrap();
        let dim = 112;
        let ground = outer(
            &FockVector::basis_state(0, dim),
            &FockVector::basis_state(0, dim),
        );
        let grid = cart(4.4, 40);
        let rep = duality_check(&cg(-1.0), &f, &ground, &grid).unwrap();
        assert!((rep.rhs - Complex64::ONE).norm() < 1e-10, "{}", rep.rhs);
        assert!(rep.residual < 1e-5, "{}", rep.residual);
    }

    #[test]
    fn normalization_flow_of_states() {
        let dim = 128;
        let grid = cart(4.4, 40);
        let states = [
            outer(
                &FockVector::basis_state(0, dim),
                &FockVector::basis_state(0, dim),
            ),
            outer(
                &FockVector::basis_state(1, dim),
                &FockVector::basis_state(1, dim),
            ),
            {
                let v = coherent(PhasePoint::new(0.8, 0.5), dim).unwrap();
                outer(&v, &v)
            },
        ];
        for w in [WeightSpec::constant(), cg(-1.0)] {
            let mop = MOp::new(&w, dim, &MPath::Closed).unwrap();
            for (k, rho) in states.iter().enumerate() {
                let field = lower_symbol(&mop, rho, &grid).unwrap();
                let mass = field.integrate();
                assert!(
                    (mass - Complex64::ONE).norm() < 1e-5,
                    "{w} state {k}: {mass}"
                );
            }
        }
    }

    #[test]
    fn positivity_inheritance_for_povm_weights() {
        let dim = 112;
        let grid = cart(4.4, 32);
        let v = coherent(PhasePoint::new(-0.6, 0.9), dim).unwrap();
        let mut rho = outer(&v, &v).scale(c(0.3, 0.0));
        let g0 = outer(
            &FockVector::basis_state(0, dim),
            &FockVector::basis_state(0, dim),
        );
        rho = &rho + &g0.scale(c(0.7, 0.0));
        let mop = MOp::new(&cg(-1.0), dim, &MPath::Closed).unwrap();
        let field = lower_symbol(&mop, &rho, &grid).unwrap();
        assert!(field.values().iter().all(|v| v.re >= -1e-8));
    }

    #[test]
    fn radius_warning_fires_beyond_safe_radius() {
        let grid = cart(4.4, 16); // corners reach |z| = 6.22
        let mop = MOp::new(&cg(-1.0), 16, &MPath::Closed).unwrap(); // l_safe = 2
        let field = lower_symbol(&mop, &FockOperator::identity(16), &grid).unwrap();
        assert!(field.radius_warning);
        let mop = MOp::new(&cg(-1.0), 160, &MPath::Closed).unwrap(); // l_safe = 6.32
        let field = lower_symbol(&mop, &FockOperator::identity(160), &grid).unwrap();
        assert!(!field.radius_warning);
    }

    #[test]
    fn heaviside_weights_get_regularized_povm() {
        let grid = cart(4.5, 16);
        let w = WeightSpec::new(WeightKind::HeavisideElliptic(0.5)).unwrap();
        let report = povm_diagnostic(&w, 8, &grid).unwrap();
        assert!(report.regularized);
        assert!(report.resolution_residual.is_none());
    }
}
