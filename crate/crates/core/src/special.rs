//! Special-function kernels shared by the operator and quadrature modules:
//! associated Laguerre recurrences, Hermite polynomials and functions,
//! log-factorials, Bernoulli/Bell numbers, and Gaussian quadrature rules.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::sync::OnceLock;

const LN_FACT_TABLE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE + 1);
        t.push(0.0);
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        for k in 1..=LN_FACT_TABLE {
            // Kahan summation keeps table differences near 1 ulp.
            let y = (k as f64).ln() - comp;
            let s = acc + y;
            comp = (s - acc) - y;
            acc = s;
            t.push(acc);
        }
        t
    })
}

/// ln(n!) with table lookup below 4096 and Stirling above.
pub fn ln_factorial(n: usize) -> f64 {
    let table = ln_fact_table();
    if n <= LN_FACT_TABLE {
        table[n]
    } else {
        let x = n as f64 + 1.0;
        // Stirling series for ln Gamma(x).
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        (x - 0.5) * x.ln() - x
            + 0.5 * (2.0 * std::f64::consts::PI).ln()
            + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    }
}

/// Exact f64 factorial for small n (n <= 170).
pub fn factorial(n: usize) -> f64 {
    let mut acc = 1.0f64;
    for k in 2..=n {
        acc *= k as f64;
    }
    acc
}

/// Binomial coefficient as f64; zero outside the Pascal triangle.
pub fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let (n, k) = (n as usize, (k as usize).min(n as usize - k as usize));
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Associated Laguerre polynomial L_n^{(alpha)}(t) for integer alpha >= -n,
/// by the three-term recurrence upward in n. Negative orders are routed
/// through the reflection L_n^{(-k)}(t) = ((n-k)!/n!) (-t)^k L_{n-k}^{(k)}(t),
/// which keeps the recurrence away from its unstable regime.
pub fn assoc_laguerre(n: usize, alpha: i64, t: f64) -> Result<f64> {
    if alpha < -(n as i64) {
        return Err(Error::LaguerreDomain { n, alpha });
    }
    if alpha < 0 {
        let k = (-alpha) as usize;
        let mut ratio = 1.0;
        for j in (n - k + 1)..=n {
            ratio /= j as f64;
        }
        return Ok(ratio * (-t).powi(k as i32) * assoc_laguerre(n - k, -alpha, t)?);
    }
    let a = alpha as f64;
    let mut lm1 = 1.0f64;
    if n == 0 {
        return Ok(lm1);
    }
    let mut l = 1.0 + a - t;
    for j in 2..=n {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0 + a - t) * l - (jf - 1.0 + a) * lm1) / jf;
        lm1 = l;
        l = next;
    }
    Ok(l)
}

/// Physicists' Hermite polynomial H_m(x) (complex argument allowed through
/// the generic parameter in the caller; real here).
pub fn hermite_h(m: usize, x: f64) -> f64 {
    let mut hm1 = 1.0f64;
    if m == 0 {
        return hm1;
    }
    let mut h = 2.0 * x;
    for j in 1..m {
        let next = 2.0 * x * h - 2.0 * j as f64 * hm1;
        hm1 = h;
        h = next;
    }
    h
}

/// Oscillator eigenfunctions h_0..h_{nmax} at x, from the two-term ladder
/// seeded by h_0(x) = pi^{-1/4} e^{-x^2/2}.
pub fn hermite_functions(nmax: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(nmax + 1);
    h.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if nmax == 0 {
        return h;
    }
    h.push(std::f64::consts::SQRT_2 * x * h[0]);
    for b in 1..nmax {
        let bf = b as f64;
        let next = (2.0 / (bf + 1.0)).sqrt() * x * h[b] - (bf / (bf + 1.0)).sqrt() * h[b - 1];
        h.push(next);
    }
    h
}

/// Bernoulli numbers B_{2r} for r <= 8.
pub fn bernoulli_even(r: usize) -> f64 {
    const B: [f64; 9] = [
        1.0,
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    B[r]
}

/// Bell numbers B_0..B_n via the binomial recurrence
/// B_{n+1} = sum_k C(n,k) B_k.
pub fn bell_numbers(n: usize) -> Vec<f64> {
    let mut b = vec![1.0f64];
    for m in 0..n {
        let mut next = 0.0;
        for (k, bk) in b.iter().enumerate() {
            next += binomial(m as i64, k as i64) * bk;
        }
        b.push(next);
    }
    b
}

fn tridiag_nodes(diag: &[f64], offdiag: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
    }
    for i in 0..n - 1 {
        j[(i, i + 1)] = offdiag[i];
        j[(i + 1, i)] = offdiag[i];
    }
    let eig = j.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    nodes
}

/// Gauss-Hermite rule with pre-multiplied weights w_i e^{x_i^2}, so the
/// caller applies them to the raw (undamped) integrand. The closed form
/// w_i e^{x_i^2} = 1 / (n h_{n-1}(x_i)^2), with h the orthonormal
/// oscillator function, stays accurate at extreme nodes where the squared
/// Golub-Welsch eigenvector component drowns in rounding noise.
pub fn gauss_hermite_modified(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 2 {
        return Err(Error::GridParams(format!(
            "gauss-hermite order {order} under-resolved"
        )));
    }
    let offdiag: Vec<f64> = (1..order).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut nodes = tridiag_nodes(&vec![0.0; order], &offdiag);
    // Newton polish of the eigenvalue seeds: x <- x - h_n / (sqrt(2n) h_{n-1})
    for x in &mut nodes {
        for _ in 0..2 {
            let h = hermite_functions(order, *x);
            *x -= h[order] / ((2.0 * order as f64).sqrt() * h[order - 1]);
        }
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let h = hermite_functions(order - 1, x);
            1.0 / (order as f64 * h[order - 1] * h[order - 1])
        })
        .collect();
    Ok((nodes, weights))
}

/// Gauss-Hermite rule for integrals against e^{-x^2} on the line (plain
/// weights; they underflow only beyond order ~350, which the grid sizes
/// used here never reach).
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (nodes, wmod) = gauss_hermite_modified(order)?;
    let weights = nodes
        .iter()
        .zip(&wmod)
        .map(|(x, w)| w * (-x * x).exp())
        .collect();
    Ok((nodes, weights))
}

/// Gauss-Laguerre rule for integrals against e^{-x} on the half line,
/// returned with pre-multiplied weights w_i e^{x_i}. The scaled residual
/// L-hat_{n+1}(x) = L_{n+1}(x) e^{-x/2} is carried through the recurrence,
/// so w_i e^{x_i} = x_i / ((n+1) L-hat_{n+1}(x_i))^2 never loses precision
/// to underflow.
pub fn gauss_laguerre_modified(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 2 {
        return Err(Error::GridParams(format!(
            "gauss-laguerre order {order} under-resolved"
        )));
    }
    let diag: Vec<f64> = (0..order).map(|k| 2.0 * k as f64 + 1.0).collect();
    let offdiag: Vec<f64> = (1..order).map(|k| k as f64).collect();
    let mut nodes = tridiag_nodes(&diag, &offdiag);

    // scaled recurrence for (L_n(x) e^{-x/2}, L_{n+1}(x) e^{-x/2})
    let scaled_pair = |x: f64| -> (f64, f64) {
        let seed = (-0.5 * x).exp();
        let mut lm1 = seed;
        let mut l = (1.0 - x) * seed;
        for k in 2..=(order + 1) {
            let kf = k as f64;
            let next = ((2.0 * kf - 1.0 - x) * l - (kf - 1.0) * lm1) / kf;
            lm1 = l;
            l = next;
        }
        (lm1, l)
    };
    // Newton polish on the scaled residual f = L_n e^{-x/2}, whose
    // derivative follows from x L_n' = n (L_n - L_{n-1}).
    for x in &mut nodes {
        for _ in 0..2 {
            let seed = (-0.5 * *x).exp();
            let mut lm1 = seed;
            let mut l = (1.0 - *x) * seed;
            for k in 2..=order {
                let kf = k as f64;
                let next = ((2.0 * kf - 1.0 - *x) * l - (kf - 1.0) * lm1) / kf;
                lm1 = l;
                l = next;
            }
            let deriv = order as f64 * (l - lm1) / *x - 0.5 * l;
            if deriv != 0.0 {
                *x -= l / deriv;
            }
        }
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, lnp1) = scaled_pair(x);
            let denom = (order as f64 + 1.0) * lnp1;
            x / (denom * denom)
        })
        .collect();
    Ok((nodes, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct series evaluation, kept independent of the recurrence path.
    fn laguerre_series(n: usize, alpha: i64, t: f64) -> f64 {
        (0..=n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(n as i64 + alpha, (n - k) as i64) * t.powi(k as i32) / factorial(k)
            })
            .sum()
    }

    #[test]
    fn laguerre_degree_zero_is_one() {
        for &alpha in &[-3i64, 0, 2, 7] {
            for &t in &[0.0, 0.4, 11.0] {
                assert_eq!(assoc_laguerre(0, alpha.max(0), t).unwrap(), 1.0);
                let _ = alpha;
            }
        }
    }

    #[test]
    fn laguerre_linear_case() {
        // L_1^{(0)}(t) = 1 - t
        assert!((assoc_laguerre(1, 0, 2.0).unwrap() - (-1.0)).abs() < 1e-15);
        assert!((assoc_laguerre(1, 0, 2.0).unwrap() - laguerre_series(1, 0, 2.0)).abs() < 1e-15);
    }

    #[test]
    fn laguerre_matches_series() {
        // the series oracle cancels badly for large t, so keep t moderate
        for n in 0..12 {
            for alpha in 0..6i64 {
                for &t in &[0.0, 0.3, 1.7, 3.4] {
                    let rec = assoc_laguerre(n, alpha, t).unwrap();
                    let ser = laguerre_series(n, alpha, t);
                    let max_term = binomial(n as i64 + alpha, n as i64) * t.powi(n as i32).max(1.0);
                    let scale = rec.abs().max(1.0).max(1e-8 * max_term);
                    assert!(
                        (rec - ser).abs() / scale < 1e-11,
                        "n={n} alpha={alpha} t={t}: {rec} vs {ser}"
                    );
                }
            }
        }
    }

    #[test]
    fn laguerre_negative_order_reflection() {
        // L_5^{(-2)}(t) = (3!/5!) (-t)^2 L_3^{(2)}(t)
        let t = 1.7;
        let lhs = assoc_laguerre(5, -2, t).unwrap();
        let rhs = factorial(3) / factorial(5) * t * t * assoc_laguerre(3, 2, t).unwrap();
        assert!((lhs - rhs).abs() / rhs.abs().max(1.0) < 1e-12);
        // and the same against the raw series with negative order
        assert!((lhs - laguerre_series(5, -2, t)).abs() < 1e-12);
    }

    #[test]
    fn laguerre_rejects_order_below_minus_n() {
        assert!(assoc_laguerre(2, -3, 1.0).is_err());
    }

    #[test]
    fn hermite_polynomial_values() {
        assert_eq!(hermite_h(0, 0.7), 1.0);
        assert_eq!(hermite_h(1, 0.7), 1.4);
        assert!((hermite_h(2, 0.7) - (4.0 * 0.49 - 2.0)).abs() < 1e-14);
        assert!((hermite_h(4, 0.0) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_functions_orthonormal_under_gauss_hermite() {
        // h_a h_b = (poly) e^{-x^2}, so a 40-point rule is exact up to n=30.
        let (x, w) = gauss_hermite(40).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                let mut acc = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    let h = hermite_functions(8, *xi);
                    acc += wi * (xi * xi).exp() * h[a] * h[b];
                }
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12, "a={a} b={b}: {acc}");
            }
        }
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite(24).unwrap();
        // int e^{-x^2} x^{2k} dx = Gamma(k + 1/2)
        let mut expect = std::f64::consts::PI.sqrt();
        for k in 0..8 {
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(2 * k)).sum();
            assert!(
                (got - expect).abs() / expect < 1e-13,
                "k={k}: {got} vs {expect}"
            );
            expect *= k as f64 + 0.5;
        }
    }

    #[test]
    fn gauss_laguerre_moments() {
        let (x, wmod) = gauss_laguerre_modified(40).unwrap();
        // applying the modified rule to x^k e^{-x} gives k!
        for k in 0..10usize {
            let got: f64 = x
                .iter()
                .zip(&wmod)
                .map(|(xi, wi)| wi * xi.powi(k as i32) * (-xi).exp())
                .sum();
            let expect = factorial(k);
            assert!(
                (got - expect).abs() / expect < 1e-12,
                "k={k}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn bell_numbers_match_known_prefix() {
        let b = bell_numbers(7);
        assert_eq!(b, vec![1.0, 1.0, 2.0, 5.0, 15.0, 52.0, 203.0, 877.0]);
    }

    #[test]
    fn bernoulli_and_bell_disagree_from_b2_on() {
        let bell = bell_numbers(4);
        assert!((bernoulli_even(1) - 1.0 / 6.0).abs() < 1e-16);
        assert!((bernoulli_even(1) - bell[2]).abs() > 1.0);
    }

    #[test]
    fn ln_factorial_consistency() {
        for n in 0..30 {
            assert!((ln_factorial(n) - factorial(n).ln()).abs() < 1e-12);
        }
        // table/Stirling splice
        let a = ln_factorial(LN_FACT_TABLE);
        let b = ln_factorial(LN_FACT_TABLE + 1) - ((LN_FACT_TABLE + 1) as f64).ln();
        assert!((a - b).abs() / a < 1e-12);
    }
}
