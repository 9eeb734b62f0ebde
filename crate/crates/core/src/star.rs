//! Truncated star product on polynomial symbols: the coefficient-family
//! expansion whose operator counterpart is A_f A_g = A_{f star g},
//! star commutators, and the operator-product residual check.

use crate::coeffs::{CoeffTable4, WeightTables};
use crate::error::{Error, Result};
use crate::fock::FockOperator;
use crate::quantize::{quantize_poly_qp, quantize_poly_z, tables_for, SymbolExpr};
use crate::weights::{CoeffTable2, Rep, WeightSpec};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Result of a truncated star expansion.
#[derive(Clone, Debug)]
pub struct StarExpansion {
    /// total coefficient order retained
    pub order_cap: usize,
    /// the expansion itself, in the representation of the inputs
    pub result: CoeffTable2,
    /// first omitted order (the cap plus one); when the cap covers
    /// deg f + deg g the expansion is exact and nothing was omitted
    pub residual_order: usize,
    pub exact: bool,
}

fn poly_degree(t: &CoeffTable2) -> usize {
    t.iter()
        .map(|(&(a, b), _)| (a + b) as usize)
        .max()
        .unwrap_or(0)
}

/// Repeated partial derivative of a polynomial table: d1 times in the
/// first variable, d2 in the second.
pub fn poly_derivative(t: &CoeffTable2, d1: u32, d2: u32) -> CoeffTable2 {
    let mut out = CoeffTable2::new(t.rep(), t.cap());
    for (&(a, b), &v) in t.iter() {
        if a < d1 || b < d2 {
            continue;
        }
        let mut factor = 1.0;
        for k in 0..d1 {
            factor *= (a - k) as f64;
        }
        for k in 0..d2 {
            factor *= (b - k) as f64;
        }
        out.add(a - d1, b - d2, v * factor);
    }
    out
}

pub fn poly_mul(x: &CoeffTable2, y: &CoeffTable2) -> CoeffTable2 {
    let mut out = CoeffTable2::new(x.rep(), x.cap() + y.cap());
    for (&(a, b), &va) in x.iter() {
        for (&(c, d), &vb) in y.iter() {
            out.add(a + c, b + d, va * vb);
        }
    }
    out
}

fn poly_axpy(acc: &mut CoeffTable2, coef: Complex64, term: &CoeffTable2) {
    for (&(a, b), &v) in term.iter() {
        acc.add(a, b, coef * v);
    }
}

/// Poisson bracket of two polynomial tables. In canonical variables
/// {F, G} = dF/dq dG/dp - dF/dp dG/dq; in the complex representation
/// {f, g} = i (df/dzbar dg/dz - df/dz dg/dzbar).
pub fn poisson_bracket(f: &CoeffTable2, g: &CoeffTable2) -> Result<CoeffTable2> {
    if f.rep() != g.rep() {
        return Err(Error::RepresentationMismatch);
    }
    let mut out = CoeffTable2::new(f.rep(), f.cap() + g.cap());
    match f.rep() {
        Rep::Qp => {
            poly_axpy(
                &mut out,
                Complex64::ONE,
                &poly_mul(&poly_derivative(f, 1, 0), &poly_derivative(g, 0, 1)),
            );
            poly_axpy(
                &mut out,
                -Complex64::ONE,
                &poly_mul(&poly_derivative(f, 0, 1), &poly_derivative(g, 1, 0)),
            );
        }
        Rep::Z => {
            poly_axpy(
                &mut out,
                I,
                &poly_mul(&poly_derivative(f, 0, 1), &poly_derivative(g, 1, 0)),
            );
            poly_axpy(
                &mut out,
                -I,
                &poly_mul(&poly_derivative(f, 1, 0), &poly_derivative(g, 0, 1)),
            );
        }
    }
    Ok(out)
}

/// The star product of two polynomial symbols driven by the atilde family,
/// truncated at total coefficient order `cap`:
/// in the z representation
///   f star g = sum (-1)^{ibar+jbar} atilde_{i ibar j jbar}
///              (d^i_zbar d^ibar_z f) (d^j_zbar d^jbar_z g),
/// and in canonical variables
///   F star G = sum i^{k+k'-l-l'} atilde_{k l k' l'}
///              (d^l_q d^k_p F) (d^{l'}_q d^{k'}_p G).
pub fn star(
    a_tilde: &CoeffTable4,
    f: &CoeffTable2,
    g: &CoeffTable2,
    cap: usize,
) -> Result<StarExpansion> {
    if a_tilde.rep() != f.rep() || f.rep() != g.rep() {
        return Err(Error::RepresentationMismatch);
    }
    if cap > a_tilde.cap() {
        return Err(Error::DegreeCap(format!(
            "star order {cap} exceeds the coefficient table cap {}",
            a_tilde.cap()
        )));
    }
    let full = poly_degree(f) + poly_degree(g);
    let mut result = CoeffTable2::new(f.rep(), poly_degree(f) + poly_degree(g));
    for (&(i, ib, j, jb), &coef) in a_tilde.iter() {
        if (i + ib + j + jb) as usize > cap {
            continue;
        }
        let (df, dg, phase) = match f.rep() {
            Rep::Z => {
                let sign = if (ib + jb) % 2 == 0 { 1.0 } else { -1.0 };
                (
                    poly_derivative(f, ib, i),
                    poly_derivative(g, jb, j),
                    Complex64::new(sign, 0.0),
                )
            }
            Rep::Qp => (
                poly_derivative(f, ib, i),
                poly_derivative(g, jb, j),
                I.powi(i as i32 + j as i32 - ib as i32 - jb as i32),
            ),
        };
        if df.is_empty() || dg.is_empty() {
            continue;
        }
        poly_axpy(&mut result, coef * phase, &poly_mul(&df, &dg));
    }
    Ok(StarExpansion {
        order_cap: cap,
        result,
        residual_order: cap + 1,
        exact: cap >= full,
    })
}

/// f star g - g star f.
pub fn star_commutator(
    a_tilde: &CoeffTable4,
    f: &CoeffTable2,
    g: &CoeffTable2,
    cap: usize,
) -> Result<StarExpansion> {
    let fg = star(a_tilde, f, g, cap)?;
    let gf = star(a_tilde, g, f, cap)?;
    let mut result = fg.result;
    poly_axpy(&mut result, -Complex64::ONE, &gf.result);
    Ok(StarExpansion {
        order_cap: cap,
        result,
        residual_order: cap + 1,
        exact: fg.exact,
    })
}

/// Largest interior-block entry of A_f A_g - A_{f star g}; the operator
/// product theorem makes this vanish up to truncation effects.
pub fn operator_product_check(
    w: &WeightSpec,
    f: &SymbolExpr,
    g: &SymbolExpr,
    dim: usize,
) -> Result<f64> {
    let rep = match (f, g) {
        (SymbolExpr::PolyZ(_), SymbolExpr::PolyZ(_)) => Rep::Z,
        _ => Rep::Qp,
    };
    let ft = f.as_poly(rep)?;
    let gt = g.as_poly(rep)?;
    let cap = poly_degree(&ft) + poly_degree(&gt);
    let tables = tables_for(w, cap.max(2), rep)?;
    let prod = star(&tables.a_tilde, &ft, &gt, cap)?;

    let quant = |t: &CoeffTable2| -> Result<FockOperator> {
        match rep {
            Rep::Z => quantize_poly_z(&tables, t, dim),
            Rep::Qp => quantize_poly_qp(&tables, t, dim),
        }
    };
    let af = quant(&ft)?;
    let ag = quant(&gt)?;
    let a_star = quant(&prod.result)?;
    let lhs = &af * &ag;
    Ok(lhs.max_abs_diff_on(&a_star, dim / 2))
}

/// Recovers the polynomial symbol of an operator by least squares over
/// the monomial basis, using the same weight tables that quantized it.
/// Test scaffolding for the star-product oracles, not a public inversion
/// theory.
#[doc(hidden)]
pub fn symbol_from_operator(
    tables: &WeightTables,
    op: &FockOperator,
    max_degree: usize,
    dim: usize,
) -> Result<CoeffTable2> {
    use nalgebra::DMatrix;
    let block = dim / 2;
    let mut basis = Vec::new();
    let mut keys = Vec::new();
    for total in 0..=max_degree as u32 {
        for a in 0..=total {
            let b = total - a;
            let mut t = CoeffTable2::new(tables.rep, max_degree);
            t.set(a, b, Complex64::ONE);
            let mat = match tables.rep {
                Rep::Z => quantize_poly_z(tables, &t, dim)?,
                Rep::Qp => quantize_poly_qp(tables, &t, dim)?,
            };
            basis.push(mat);
            keys.push((a, b));
        }
    }
    let rows = block * block;
    let mut m = DMatrix::<Complex64>::zeros(rows, basis.len());
    let mut rhs = DMatrix::<Complex64>::zeros(rows, 1);
    for r in 0..block {
        for c in 0..block {
            let row = r * block + c;
            rhs[(row, 0)] = op.entry(r, c);
            for (k, bmat) in basis.iter().enumerate() {
                m[(row, k)] = bmat.entry(r, c);
            }
        }
    }
    let svd = m.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-10)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut out = CoeffTable2::new(tables.rep, max_degree);
    for (k, &(a, b)) in keys.iter().enumerate() {
        let v = sol[(k, 0)];
        if v.norm() > 1e-9 {
            out.add(a, b, v);
        }
    }
    Ok(out)
}
