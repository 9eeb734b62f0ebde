//! Ratio and star-ordering coefficient families.
//!
//! Given the Taylor table c of a weight and the table of its reciprocal,
//! the four-index family d expands w(z+z') / (w(z) w(z')) and dtilde its
//! reciprocal; folding in the symplectic exponential produces the ordering
//! families a and atilde that drive the product expansion and the star
//! product. Closed forms are provided for the exponential isotropic weight
//! and for the sinc weight.

use crate::error::{Error, Result};
use crate::special::{bell_numbers, bernoulli_even, binomial, factorial};
use crate::weights::{invert_series, weight_taylor, CoeffTable2, Rep, WeightSpec};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Which ratio is expanded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioDirection {
    /// w(z + z') / (w(z) w(z'))  ->  d
    SumOverProduct,
    /// w(z) w(z') / w(z + z')  ->  dtilde
    ProductOverSum,
}

/// Which ordering family is produced from a ratio table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarVariant {
    /// a: ratio times e^{-(1/2) z o z'}
    Plain,
    /// atilde: reciprocal ratio times e^{+(1/2) z o z'}
    Tilde,
}

/// Sparse four-index coefficient table. In the z representation the key is
/// (i, ibar, j, jbar) for z^i zbar^ibar z'^j zbar'^jbar; in the canonical
/// representation it is (k, l, k', l') for q^k p^l q'^k' p'^l'.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffTable4 {
    rep: Rep,
    cap: usize,
    terms: BTreeMap<(u32, u32, u32, u32), Complex64>,
}

impl CoeffTable4 {
    pub fn new(rep: Rep, cap: usize) -> Self {
        Self {
            rep,
            cap,
            terms: BTreeMap::new(),
        }
    }

    pub fn rep(&self) -> Rep {
        self.rep
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn get(&self, key: (u32, u32, u32, u32)) -> Complex64 {
        self.terms.get(&key).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn contains(&self, key: (u32, u32, u32, u32)) -> bool {
        self.terms.contains_key(&key)
    }

    pub fn add(&mut self, key: (u32, u32, u32, u32), value: Complex64) {
        debug_assert!((key.0 + key.1 + key.2 + key.3) as usize <= self.cap);
        let entry = self.terms.entry(key).or_insert(Complex64::ZERO);
        *entry += value;
        if *entry == Complex64::ZERO {
            self.terms.remove(&key);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32, u32, u32), &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Drops the structurally vanishing entries: everything of the form
    /// (., ., 0, 0) or (0, 0, ., .) except the unit constant. The caller
    /// guarantees these are zero up to roundoff; they are removed so the
    /// vanishing pattern holds exactly in the sparse map.
    fn enforce_vanishing_pattern(&mut self) {
        self.terms.retain(|&(a, b, c, d), v| {
            let first_only = c == 0 && d == 0 && a + b >= 1;
            let second_only = a == 0 && b == 0 && c + d >= 1;
            if first_only || second_only {
                debug_assert!(v.norm() < 1e-9, "pattern entry ({a},{b},{c},{d}) = {v}");
                false
            } else {
                true
            }
        });
        self.terms.insert((0, 0, 0, 0), Complex64::ONE);
    }
}

fn product4(a: &CoeffTable4, b: &CoeffTable4, cap: usize) -> CoeffTable4 {
    let mut out = CoeffTable4::new(a.rep, cap);
    for (&ka, &va) in a.iter() {
        for (&kb, &vb) in b.iter() {
            let key = (ka.0 + kb.0, ka.1 + kb.1, ka.2 + kb.2, ka.3 + kb.3);
            if (key.0 + key.1 + key.2 + key.3) as usize <= cap {
                out.add(key, va * vb);
            }
        }
    }
    out
}

/// Expands outer(u + u', v + v') into the four-index table by binomial
/// splitting. Slot pairing is (1st, 3rd) for the first variable and
/// (2nd, 4th) for the second, identical in both representations.
fn expand_shifted(outer: &CoeffTable2, cap: usize) -> CoeffTable4 {
    let mut out = CoeffTable4::new(outer.rep(), cap);
    for (&(m, mbar), &coef) in outer.iter() {
        if (m + mbar) as usize > cap {
            continue;
        }
        for u in 0..=m {
            let bu = binomial(m as i64, u as i64);
            for v in 0..=mbar {
                let bv = binomial(mbar as i64, v as i64);
                out.add((u, v, m - u, mbar - v), coef * bu * bv);
            }
        }
    }
    out
}

fn embed_first(t: &CoeffTable2, cap: usize) -> CoeffTable4 {
    let mut out = CoeffTable4::new(t.rep(), cap);
    for (&(i, ibar), &c) in t.iter() {
        if (i + ibar) as usize <= cap {
            out.add((i, ibar, 0, 0), c);
        }
    }
    out
}

fn embed_second(t: &CoeffTable2, cap: usize) -> CoeffTable4 {
    let mut out = CoeffTable4::new(t.rep(), cap);
    for (&(j, jbar), &c) in t.iter() {
        if (j + jbar) as usize <= cap {
            out.add((0, 0, j, jbar), c);
        }
    }
    out
}

/// Four-index expansion of a weight ratio, built from the weight table and
/// its reciprocal by binomial convolution.
pub fn ratio_coeffs(
    c: &CoeffTable2,
    c_inv: &CoeffTable2,
    cap: usize,
    direction: RatioDirection,
) -> Result<CoeffTable4> {
    if c.rep() != c_inv.rep() {
        return Err(Error::RepresentationMismatch);
    }
    if c.cap() < cap || c_inv.cap() < cap {
        return Err(Error::DegreeCap(format!(
            "ratio tables hold degree {} and {}, need {cap}",
            c.cap(),
            c_inv.cap()
        )));
    }
    let (outer, inner) = match direction {
        RatioDirection::SumOverProduct => (c, c_inv),
        RatioDirection::ProductOverSum => (c_inv, c),
    };
    let shifted = expand_shifted(outer, cap);
    let with_first = product4(&shifted, &embed_first(inner, cap), cap);
    let mut full = product4(&with_first, &embed_second(inner, cap), cap);
    full.enforce_vanishing_pattern();
    Ok(full)
}

/// Folds the symplectic exponential into a ratio table, producing the
/// ordering family. `Plain` applies to d (giving a); `Tilde` applies to
/// dtilde (giving atilde).
pub fn star_coeffs(d: &CoeffTable4, cap: usize, variant: StarVariant) -> CoeffTable4 {
    let mut out = CoeffTable4::new(d.rep(), cap);
    let i = Complex64::new(0.0, 1.0);
    for (&key, &val) in d.iter() {
        let base = (key.0 + key.1 + key.2 + key.3) as usize;
        if base > cap {
            continue;
        }
        let budget = (cap - base) / 2;
        for k in 0..=budget as u32 {
            for l in 0..=(budget as u32 - k) {
                let mag = 1.0
                    / (factorial(k as usize) * factorial(l as usize))
                    / 2.0f64.powi((k + l) as i32);
                let phase = match (d.rep(), variant) {
                    (Rep::Z, StarVariant::Plain) => {
                        Complex64::new(if k % 2 == 0 { mag } else { -mag }, 0.0)
                    }
                    (Rep::Z, StarVariant::Tilde) => {
                        Complex64::new(if l % 2 == 0 { mag } else { -mag }, 0.0)
                    }
                    (Rep::Qp, StarVariant::Plain) => mag * i.powi(k as i32 - l as i32),
                    (Rep::Qp, StarVariant::Tilde) => mag * i.powi(l as i32 - k as i32),
                };
                out.add((key.0 + k, key.1 + l, key.2 + l, key.3 + k), val * phase);
            }
        }
    }
    out.enforce_vanishing_pattern();
    out
}

/// Closed-form ordering coefficients for the exponential isotropic weight
/// e^{s |z|^2 / 2} in the z representation:
/// a_{i ibar j jbar} = delta_{i jbar} delta_{ibar j}
///                     ((s-1)/2)^i ((s+1)/2)^j / (i! j!),
/// and atilde = (-1)^{i+j} a.
pub fn cg_star_coeffs(s: Complex64, cap: usize, variant: StarVariant) -> Result<CoeffTable4> {
    if s.re >= 1.0 || s.re.is_nan() {
        return Err(Error::UnsupportedWeight(format!(
            "requires Re s < 1, got {s}"
        )));
    }
    let mut out = CoeffTable4::new(Rep::Z, cap);
    let am = (s - 1.0) / 2.0;
    let ap = (s + 1.0) / 2.0;
    for i in 0..=(cap / 2) as u32 {
        for j in 0..=((cap / 2) as u32 - i) {
            let mut v = am.powu(i) * ap.powu(j) / (factorial(i as usize) * factorial(j as usize));
            if matches!(variant, StarVariant::Tilde) && (i + j) % 2 == 1 {
                v = -v;
            }
            if v != Complex64::ZERO {
                out.add((i, j, j, i), v);
            }
        }
    }
    out.enforce_vanishing_pattern();
    Ok(out)
}

/// Candidate closed forms for the reciprocal sinc table, one reading the
/// published coefficient as a Bernoulli number and one as a Bell number.
/// `bj_tables` computes the authoritative reciprocal by series inversion;
/// the acceptance suite reports which candidate that matches.
pub fn bj_ctilde_candidates(cap: usize) -> (CoeffTable2, CoeffTable2) {
    let bells = bell_numbers(cap);
    let mut bernoulli = CoeffTable2::new(Rep::Qp, cap);
    let mut bell = CoeffTable2::new(Rep::Qp, cap);
    for r in 0..=(cap / 4) {
        let k = (2 * r) as u32;
        let sign = if (r + 1) % 2 == 0 { 1.0 } else { -1.0 };
        let pref = sign * 2.0 * (2.0f64.powi(2 * r as i32 - 1) - 1.0) / factorial(2 * r);
        bernoulli.set(k, k, Complex64::new(pref * bernoulli_even(r), 0.0));
        bell.set(k, k, Complex64::new(pref * bells[2 * r], 0.0));
    }
    (bernoulli, bell)
}

/// Taylor, reciprocal, and ratio tables of the sinc weight in canonical
/// variables. The reciprocal comes from series inversion; the closed-form
/// candidates are exposed separately for comparison.
pub fn bj_tables(cap: usize) -> Result<(CoeffTable2, CoeffTable2, CoeffTable4)> {
    if cap > 12 {
        return Err(Error::DegreeCap(format!(
            "sinc tables capped at 12, got {cap}"
        )));
    }
    let w = WeightSpec::born_jordan();
    let c = weight_taylor(&w, cap, Rep::Qp)?;
    let c_inv = invert_series(&c, cap)?;
    let d = ratio_coeffs(&c, &c_inv, cap, RatioDirection::SumOverProduct)?;
    Ok((c, c_inv, d))
}

/// Parity-restricted closed form for the sinc ratio table (the published
/// double sum with its binomial read as binom(2u, l'-2v)), used as a
/// cross-check of the generic path.
pub fn bj_d_closed_form(
    c: &CoeffTable2,
    c_inv: &CoeffTable2,
    key: (u32, u32, u32, u32),
) -> Complex64 {
    let (k, l, kp, lp) = key;
    if k + kp != l + lp || (k + kp) % 2 == 1 {
        return Complex64::ZERO;
    }
    let mut acc = Complex64::ZERO;
    let top = (k + kp) / 2;
    for u in 0..=top {
        for v in 0..=(top - u) {
            if (kp as i64) - 2 * (v as i64) < 0 || (lp as i64) - 2 * (v as i64) < 0 {
                continue;
            }
            let rem = k + kp - 2 * (u + v);
            acc += binomial(2 * u as i64, kp as i64 - 2 * v as i64)
                * binomial(2 * u as i64, lp as i64 - 2 * v as i64)
                * c.get(2 * u, 2 * u)
                * c_inv.get(2 * v, 2 * v)
                * c_inv.get(rem, rem);
        }
    }
    acc
}

/// Full coefficient bundle for an analytic weight, as consumed by the
/// polynomial quantizers and the star product.
#[derive(Clone, Debug)]
pub struct WeightTables {
    pub rep: Rep,
    pub cap: usize,
    pub c: CoeffTable2,
    pub c_inv: CoeffTable2,
    pub d: CoeffTable4,
    pub d_inv: CoeffTable4,
    pub a: CoeffTable4,
    pub a_tilde: CoeffTable4,
}

impl WeightTables {
    pub fn build(w: &WeightSpec, cap: usize, rep: Rep) -> Result<Self> {
        let c = weight_taylor(w, cap, rep)?;
        Self::from_c(c, cap)
    }

    /// Builds the full bundle from a raw Taylor table (custom weights).
    pub fn from_c(c: CoeffTable2, cap: usize) -> Result<Self> {
        let rep = c.rep();
        let c_inv = invert_series(&c, cap)?;
        let d = ratio_coeffs(&c, &c_inv, cap, RatioDirection::SumOverProduct)?;
        let d_inv = ratio_coeffs(&c, &c_inv, cap, RatioDirection::ProductOverSum)?;
        let a = star_coeffs(&d, cap, StarVariant::Plain);
        let a_tilde = star_coeffs(&d_inv, cap, StarVariant::Tilde);
        Ok(Self {
            rep,
            cap,
            c,
            c_inv,
            d,
            d_inv,
            a,
            a_tilde,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// asymmetric analytic test table in the z representation
    fn generic_table(cap: usize) -> (CoeffTable2, CoeffTable2) {
        let mut t = CoeffTable2::new(Rep::Z, cap);
        t.set(0, 0, Complex64::ONE);
        t.set(1, 0, c64(0.3, 0.1));
        t.set(0, 1, c64(0.3, -0.1)); // conjugate pair keeps w real-ish
        t.set(1, 1, c64(0.15, 0.0));
        t.set(2, 0, c64(0.07, 0.02));
        t.set(0, 2, c64(0.07, -0.02));
        t.set(2, 1, c64(-0.04, 0.01));
        t.set(1, 2, c64(-0.04, -0.01));
        let inv = invert_series(&t, cap).unwrap();
        (t, inv)
    }

    #[test]
    fn ratio_low_order_entries() {
        let (t, inv) = generic_table(6);
        let d = ratio_coeffs(&t, &inv, 6, RatioDirection::SumOverProduct).unwrap();
        let (c10, c01, c11) = (t.get(1, 0), t.get(0, 1), t.get(1, 1));
        let (c20, c02) = (t.get(2, 0), t.get(0, 2));
        let x = c11 - c10 * c01;
        assert!((d.get((1, 0, 0, 1)) - x).norm() < 1e-14);
        assert!((d.get((0, 1, 1, 0)) - x).norm() < 1e-14);
        assert!((d.get((1, 0, 1, 0)) - (2.0 * c20 - c10 * c10)).norm() < 1e-14);
        assert!((d.get((0, 1, 0, 1)) - (2.0 * c02 - c01 * c01)).norm() < 1e-14);
        assert!((d.get((1, 1, 0, 0))).norm() == 0.0);
        assert!((d.get((0, 0, 1, 1))).norm() == 0.0);
        assert_eq!(d.get((0, 0, 0, 0)), Complex64::ONE);
    }

    #[test]
    fn ratio_unit_for_constant_weight() {
        let w = WeightSpec::constant();
        let ct = weight_taylor(&w, 6, Rep::Z).unwrap();
        let inv = invert_series(&ct, 6).unwrap();
        let d = ratio_coeffs(&ct, &inv, 6, RatioDirection::SumOverProduct).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.get((0, 0, 0, 0)), Complex64::ONE);
    }

    #[test]
    fn vanishing_pattern_is_structural() {
        let (t, inv) = generic_table(8);
        for dir in [
            RatioDirection::SumOverProduct,
            RatioDirection::ProductOverSum,
        ] {
            let d = ratio_coeffs(&t, &inv, 8, dir).unwrap();
            for (&(a, b, cc, dd), _) in d.iter() {
                let bad = (cc == 0 && dd == 0 && a + b >= 1) || (a == 0 && b == 0 && cc + dd >= 1);
                assert!(!bad, "{dir:?} kept pattern entry ({a},{b},{cc},{dd})");
            }
        }
    }

    #[test]
    fn star_low_order_entries_z_rep() {
        let (t, inv) = generic_table(6);
        let d = ratio_coeffs(&t, &inv, 6, RatioDirection::SumOverProduct).unwrap();
        let a = star_coeffs(&d, 6, StarVariant::Plain);
        let x = t.get(1, 1) - t.get(1, 0) * t.get(0, 1);
        assert!((a.get((1, 0, 0, 1)) - (x - 0.5)).norm() < 1e-14);
        assert!((a.get((0, 1, 1, 0)) - (x + 0.5)).norm() < 1e-14);
        assert!((a.get((1, 0, 1, 0)) - d.get((1, 0, 1, 0))).norm() < 1e-15);
        assert!((a.get((0, 1, 0, 1)) - d.get((0, 1, 0, 1))).norm() < 1e-15);
        assert!(!a.contains((2, 0, 0, 0)));
        assert!(!a.contains((0, 0, 0, 2)));

        let dt = ratio_coeffs(&t, &inv, 6, RatioDirection::ProductOverSum).unwrap();
        let at = star_coeffs(&dt, 6, StarVariant::Tilde);
        assert!((at.get((1, 0, 0, 1)) + (x - 0.5)).norm() < 1e-14);
        assert!((at.get((0, 1, 1, 0)) + (x + 0.5)).norm() < 1e-14);
        // duality forces atilde_{1010} = -a_{1010} = -2 c20 + c10^2
        let c20 = t.get(2, 0);
        let c10 = t.get(1, 0);
        assert!((at.get((1, 0, 1, 0)) - (-2.0 * c20 + c10 * c10)).norm() < 1e-14);
    }

    #[test]
    fn star_low_order_entries_qp_rep() {
        let gauss = WeightSpec::separable_gaussian(1.0, 2.0).unwrap();
        let tables = WeightTables::build(&gauss, 6, Rep::Qp).unwrap();
        let (cq, a) = (&tables.c, &tables.a);
        let x = cq.get(1, 1) - cq.get(1, 0) * cq.get(0, 1);
        assert!((a.get((1, 0, 0, 1)) - (x + c64(0.0, 0.5))).norm() < 1e-14);
        assert!((a.get((0, 1, 1, 0)) - (x - c64(0.0, 0.5))).norm() < 1e-14);
        assert!(
            (a.get((1, 0, 1, 0)) - (2.0 * cq.get(2, 0) - cq.get(1, 0) * cq.get(1, 0))).norm()
                < 1e-14
        );
        assert!(!a.contains((0, 2, 0, 0)));
    }

    #[test]
    fn a_equals_d_on_unbarred_indices() {
        let (t, inv) = generic_table(8);
        let d = ratio_coeffs(&t, &inv, 8, RatioDirection::SumOverProduct).unwrap();
        let a = star_coeffs(&d, 8, StarVariant::Plain);
        for i in 0..4u32 {
            for j in 0..4u32 {
                assert!((a.get((i, 0, j, 0)) - d.get((i, 0, j, 0))).norm() < 1e-15);
                assert!((a.get((0, i, 0, j)) - d.get((0, i, 0, j))).norm() < 1e-15);
            }
        }
    }

    fn convolution_residual(x: &CoeffTable4, y: &CoeffTable4, cap: usize) -> f64 {
        let mut worst = 0.0f64;
        for total in 1..=cap as u32 {
            for k in 0..=total {
                for kb in 0..=(total - k) {
                    for l in 0..=(total - k - kb) {
                        let lb = total - k - kb - l;
                        let mut acc = Complex64::ZERO;
                        for (&(i, ib, j, jb), &v) in x.iter() {
                            if i <= k && ib <= kb && j <= l && jb <= lb {
                                acc += v * y.get((k - i, kb - ib, l - j, lb - jb));
                            }
                        }
                        worst = worst.max(acc.norm());
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn convolution_duality_of_ratio_and_star_families() {
        let weights = [
            WeightSpec::cahill_glauber(c64(-0.5, 0.0)).unwrap(),
            WeightSpec::cahill_glauber(c64(0.4, 0.0)).unwrap(),
            WeightSpec::born_jordan(),
            WeightSpec::separable_gaussian(1.0, 2.0).unwrap(),
        ];
        for w in &weights {
            for rep in [Rep::Z, Rep::Qp] {
                let t = WeightTables::build(w, 8, rep).unwrap();
                assert!(
                    convolution_residual(&t.d, &t.d_inv, 8) < 1e-10,
                    "d * dtilde for {w} in {rep:?}"
                );
                assert!(
                    convolution_residual(&t.a, &t.a_tilde, 8) < 1e-10,
                    "a * atilde for {w} in {rep:?}"
                );
            }
        }
    }

    #[test]
    fn closed_form_matches_generic_for_exponential_weight() {
        for &s in &[-1.0, -0.5, 0.0, 0.5] {
            let w = WeightSpec::cahill_glauber(c64(s, 0.0)).unwrap();
            let t = WeightTables::build(&w, 6, Rep::Z).unwrap();
            for variant in [StarVariant::Plain, StarVariant::Tilde] {
                let closed = cg_star_coeffs(c64(s, 0.0), 6, variant).unwrap();
                let generic = match variant {
                    StarVariant::Plain => &t.a,
                    StarVariant::Tilde => &t.a_tilde,
                };
                for (&k, &v) in closed.iter() {
                    assert!(
                        (generic.get(k) - v).norm() < 1e-10,
                        "s={s} {variant:?} {k:?}: {} vs {v}",
                        generic.get(k)
                    );
                }
                for (&k, &v) in generic.iter() {
                    assert!(
                        (closed.get(k) - v).norm() < 1e-10,
                        "s={s} {variant:?} {k:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn cg_anti_normal_collapses_second_slot() {
        // at s = -1 the factor ((s+1)/2)^j kills every j >= 1 term
        let a = cg_star_coeffs(c64(-1.0, 0.0), 6, StarVariant::Plain).unwrap();
        for (&(i, ib, j, jb), _) in a.iter() {
            assert_eq!(j, 0, "({i},{ib},{j},{jb})");
            assert_eq!(ib, 0);
            assert_eq!(i, jb);
        }
        assert_eq!(a.get((0, 0, 0, 0)), Complex64::ONE);
        assert!((a.get((1, 0, 0, 1)) + 1.0).norm() < 1e-15);
    }

    #[test]
    fn cg_weyl_point_values() {
        let a = cg_star_coeffs(Complex64::ZERO, 4, StarVariant::Plain).unwrap();
        assert!((a.get((1, 0, 0, 1)) - c64(-0.5, 0.0)).norm() < 1e-15);
        assert!((a.get((0, 1, 1, 0)) - c64(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn bj_taylor_and_inversion_values() {
        let (c, c_inv, d) = bj_tables(8).unwrap();
        assert_eq!(c.get(0, 0), Complex64::ONE);
        assert_eq!(c.get(1, 1), Complex64::ZERO);
        assert!((c.get(2, 2) - c64(-1.0 / 6.0, 0.0)).norm() < 1e-16);
        // series inversion of sinc: q p csc(q p) = 1 + (qp)^2/6 + 7 (qp)^4/360 + ...
        assert!((c_inv.get(2, 2) - c64(1.0 / 6.0, 0.0)).norm() < 1e-15);
        assert!((c_inv.get(4, 4) - c64(7.0 / 360.0, 0.0)).norm() < 1e-15);
        // parity: entries with odd total order never appear
        for (&(k, l, kp, lp), _) in d.iter() {
            assert_eq!((k + l + kp + lp) % 2, 0);
            assert_eq!(k + kp, l + lp);
        }
    }

    #[test]
    fn bj_reciprocal_matches_bernoulli_not_bell() {
        let (_, c_inv, _) = bj_tables(8).unwrap();
        let (bern, bell) = bj_ctilde_candidates(8);
        for r in 0..=2u32 {
            let k = 2 * r;
            assert!(
                (c_inv.get(k, k) - bern.get(k, k)).norm() < 1e-12,
                "order {k}: inversion {} vs bernoulli {}",
                c_inv.get(k, k),
                bern.get(k, k)
            );
        }
        assert!((c_inv.get(4, 4) - bell.get(4, 4)).norm() > 1e-3);
    }

    #[test]
    fn bj_closed_form_ratio_cross_check() {
        let (c, c_inv, d) = bj_tables(8).unwrap();
        for (&key, &v) in d.iter() {
            let closed = bj_d_closed_form(&c, &c_inv, key);
            assert!(
                (closed - v).norm() < 1e-12,
                "{key:?}: closed {closed} vs generic {v}"
            );
        }
        // and the closed form does not invent entries the generic path lacks
        for k in 0..4u32 {
            for l in 0..4u32 {
                for kp in 0..4u32 {
                    for lp in 0..4u32 {
                        if (k + l * kp + lp) as usize > 8 {
                            continue;
                        }
                        if !d.contains((k, l, kp, lp))
                            && (k + l + kp + lp) >= 1
                            && (k + l + kp + lp) as usize <= 8
                        {
                            let closed = bj_d_closed_form(&c, &c_inv, (k, l, kp, lp));
                            assert!(closed.norm() < 1e-12, "({k},{l},{kp},{lp}): {closed}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ratio_rejects_mixed_representations() {
        let w = WeightSpec::cahill_glauber(c64(-0.5, 0.0)).unwrap();
        let a = weight_taylor(&w, 4, Rep::Z).unwrap();
        let b = weight_taylor(&w, 4, Rep::Qp).unwrap();
        assert!(matches!(
            ratio_coeffs(&a, &b, 4, RatioDirection::SumOverProduct),
            Err(Error::RepresentationMismatch)
        ));
    }
}
