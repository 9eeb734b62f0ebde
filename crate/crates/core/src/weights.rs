//! Weight functions w(z) = Pi(q,p) selecting a member of the quantization
//! family: evaluation, Taylor tables in both variable sets, series
//! inversion, and classification flags.

use crate::error::{Error, Result};
use crate::fock::PhasePoint;
use crate::special::{binomial, factorial};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Which variable set a coefficient table expands in: powers of (z, zbar)
/// or powers of (q, p).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rep {
    Z,
    Qp,
}

/// Hard cap on Taylor degree; beyond this the inversion coefficients of
/// the built-in weights lose too many digits in double precision.
pub const MAX_TAYLOR_DEGREE: usize = 16;

/// Sparse table of expansion coefficients indexed by the two exponents.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffTable2 {
    rep: Rep,
    cap: usize,
    terms: BTreeMap<(u32, u32), Complex64>,
}

impl CoeffTable2 {
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

    pub fn get(&self, i: u32, ibar: u32) -> Complex64 {
        self.terms
            .get(&(i, ibar))
            .copied()
            .unwrap_or(Complex64::ZERO)
    }

    pub fn set(&mut self, i: u32, ibar: u32, value: Complex64) {
        debug_assert!((i + ibar) as usize <= self.cap);
        if value == Complex64::ZERO {
            self.terms.remove(&(i, ibar));
        } else {
            self.terms.insert((i, ibar), value);
        }
    }

    pub fn add(&mut self, i: u32, ibar: u32, value: Complex64) {
        let v = self.get(i, ibar) + value;
        self.set(i, ibar, v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the truncated series at a point (u, v) standing for
    /// (z, zbar) or (q, p) depending on the representation.
    pub fn eval(&self, u: Complex64, v: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c * u.powu(i) * v.powu(j))
            .sum()
    }

    /// Converts the table to the other representation through the exact
    /// linear substitution z = (q + ip)/sqrt(2).
    pub fn convert(&self, target: Rep) -> CoeffTable2 {
        if target == self.rep {
            return self.clone();
        }
        let mut out = CoeffTable2::new(target, self.cap);
        let i = Complex64::new(0.0, 1.0);
        for (&(k, l), &coef) in &self.terms {
            let scale = coef
                * 2.0f64.powi(-((k + l) as i32) / 2)
                * if (k + l) % 2 == 1 {
                    Complex64::new(1.0 / std::f64::consts::SQRT_2, 0.0)
                } else {
                    Complex64::ONE
                };
            match self.rep {
                // q^k p^l -> 2^{-(k+l)/2} (-i)^l (z+zb)^k (z-zb)^l
                Rep::Qp => {
                    let base = scale * (-i).powu(l);
                    for a in 0..=k {
                        for b in 0..=l {
                            let sign = if (l - b) % 2 == 1 { -1.0 } else { 1.0 };
                            let v = base
                                * binomial(k as i64, a as i64)
                                * binomial(l as i64, b as i64)
                                * sign;
                            out.add(a + b, (k - a) + (l - b), v);
                        }
                    }
                }
                // z^k zb^l -> 2^{-(k+l)/2} (q+ip)^k (q-ip)^l
                Rep::Z => {
                    for a in 0..=k {
                        for b in 0..=l {
                            let v = scale
                                * binomial(k as i64, a as i64)
                                * binomial(l as i64, b as i64)
                                * i.powu(k - a)
                                * (-i).powu(l - b);
                            out.add(a + b, (k - a) + (l - b), v);
                        }
                    }
                }
            }
        }
        out
    }
}

type CustomEval = Arc<dyn Fn(PhasePoint) -> std::result::Result<Complex64, String> + Send + Sync>;

/// User-supplied weight: an evaluator plus an optional Taylor table in the
/// z representation. Without the table only quadrature pipelines apply.
#[derive(Clone)]
pub struct CustomWeight {
    pub eval: CustomEval,
    pub taylor_z: Option<CoeffTable2>,
}

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomWeight")
            .field("taylor_z", &self.taylor_z.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum WeightKind {
    /// Constant weight 1 (historical Weyl-Wigner choice).
    Constant,
    /// e^{s |z|^2 / 2} with Re s < 1.
    CahillGlauber(Complex64),
    /// sinc(q p), with the removable singularity filled by 1.
    BornJordan,
    /// e^{-q^2 / 2 sigma_l^2} e^{-p^2 / 2 sigma_d^2}.
    SeparableGaussian {
        sigma_l: f64,
        sigma_d: f64,
    },
    /// 2 theta(1 - alpha |z|^2) - 1.
    HeavisideElliptic(f64),
    /// 2 theta(1 - alpha q p) - 1.
    HeavisideHyperbolic(f64),
    Custom(CustomWeight),
}

/// Structural properties of a weight, decided analytically per kind and by
/// sampling for custom evaluators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WeightFlags {
    /// even and real: w(-z) = w(z), conj(w(z)) = w(z)
    pub regular: bool,
    /// depends on |z|^2 only
    pub isotropic: bool,
    /// depends on Im(z^2) = q p only
    pub hyperbolic: bool,
    /// |w| = 1 everywhere
    pub isometric: bool,
}

/// Immutable description of a weight function with its classification.
#[derive(Clone, Debug)]
pub struct WeightSpec {
    kind: WeightKind,
    flags: WeightFlags,
}

impl WeightSpec {
    pub fn new(kind: WeightKind) -> Result<Self> {
        match &kind {
            WeightKind::CahillGlauber(s) => {
                if s.re >= 1.0 || s.re.is_nan() || !s.im.is_finite() {
                    return Err(Error::UnsupportedWeight(format!(
                        "cahill-glauber requires Re s < 1, got {s}"
                    )));
                }
            }
            WeightKind::SeparableGaussian { sigma_l, sigma_d } => {
                if !(sigma_l.is_finite() && *sigma_l > 0.0 && sigma_d.is_finite() && *sigma_d > 0.0)
                {
                    return Err(Error::UnsupportedWeight(
                        "gaussian widths must be positive".into(),
                    ));
                }
            }
            WeightKind::HeavisideElliptic(a) | WeightKind::HeavisideHyperbolic(a) => {
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::UnsupportedWeight(
                        "heaviside parameter must be nonnegative".into(),
                    ));
                }
            }
            WeightKind::Custom(cw) => {
                let v = (cw.eval)(PhasePoint::origin()).map_err(Error::WeightEval)?;
                if (v - Complex64::ONE).norm() > 1e-12 {
                    return Err(Error::UnsupportedWeight(format!(
                        "custom weight must equal 1 at the origin, got {v}"
                    )));
                }
            }
            _ => {}
        }
        let flags = classify_kind(&kind)?;
        Ok(Self { kind, flags })
    }

    pub fn constant() -> Self {
        Self::new(WeightKind::Constant).unwrap()
    }

    pub fn cahill_glauber(s: Complex64) -> Result<Self> {
        Self::new(WeightKind::CahillGlauber(s))
    }

    pub fn born_jordan() -> Self {
        Self::new(WeightKind::BornJordan).unwrap()
    }

    pub fn separable_gaussian(sigma_l: f64, sigma_d: f64) -> Result<Self> {
        Self::new(WeightKind::SeparableGaussian { sigma_l, sigma_d })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn flags(&self) -> WeightFlags {
        self.flags
    }

    /// Whether the weight decays fast enough for plain phase-space
    /// quadrature (Gaussian envelope).
    pub fn decays(&self) -> bool {
        match &self.kind {
            WeightKind::CahillGlauber(s) => s.re < 0.0,
            WeightKind::SeparableGaussian { .. } => true,
            _ => false,
        }
    }

    /// Whether Taylor data is available for the coefficient pipelines.
    pub fn is_analytic(&self) -> bool {
        match &self.kind {
            WeightKind::Constant
            | WeightKind::CahillGlauber(_)
            | WeightKind::BornJordan
            | WeightKind::SeparableGaussian { .. } => true,
            WeightKind::Custom(cw) => cw.taylor_z.is_some(),
            _ => false,
        }
    }

    /// Parses the CLI weight grammar: `ww`, `cg:<re>[,<im>]`, `bj`,
    /// `gauss:<sigma_l>,<sigma_d>`, `heavi-e:<alpha>`, `heavi-h:<alpha>`.
    pub fn parse(text: &str) -> Result<Self> {
        let parse_f64 = |s: &str, at: usize| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                at,
                msg: format!("bad number {s:?}: {e}"),
            })
        };
        let (head, rest) = match text.find(':') {
            Some(k) => (&text[..k], Some(&text[k + 1..])),
            None => (text, None),
        };
        let arg_at = head.len() + 1;
        match (head, rest) {
            ("ww", None) => Ok(Self::constant()),
            ("bj", None) => Ok(Self::born_jordan()),
            ("cg", Some(args)) => {
                let mut parts = args.splitn(2, ',');
                let re = parse_f64(parts.next().unwrap_or(""), arg_at)?;
                let im = match parts.next() {
                    Some(s) => parse_f64(s, arg_at)?,
                    None => 0.0,
                };
                Self::cahill_glauber(Complex64::new(re, im))
            }
            ("gauss", Some(args)) => {
                let mut parts = args.splitn(2, ',');
                let l = parse_f64(parts.next().unwrap_or(""), arg_at)?;
                let d = parse_f64(
                    parts.next().ok_or(Error::Parse {
                        at: arg_at,
                        msg: "gauss needs two widths".into(),
                    })?,
                    arg_at,
                )?;
                Self::separable_gaussian(l, d)
            }
            ("heavi-e", Some(a)) => Self::new(WeightKind::HeavisideElliptic(parse_f64(a, arg_at)?)),
            ("heavi-h", Some(a)) => {
                Self::new(WeightKind::HeavisideHyperbolic(parse_f64(a, arg_at)?))
            }
            _ => Err(Error::Parse {
                at: 0,
                msg: format!("unknown weight {text:?}"),
            }),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            WeightKind::Constant => write!(f, "ww"),
            WeightKind::CahillGlauber(s) => {
                if s.im == 0.0 {
                    write!(f, "cg:{}", s.re)
                } else {
                    write!(f, "cg:{},{}", s.re, s.im)
                }
            }
            WeightKind::BornJordan => write!(f, "bj"),
            WeightKind::SeparableGaussian { sigma_l, sigma_d } => {
                write!(f, "gauss:{sigma_l},{sigma_d}")
            }
            WeightKind::HeavisideElliptic(a) => write!(f, "heavi-e:{a}"),
            WeightKind::HeavisideHyperbolic(a) => write!(f, "heavi-h:{a}"),
            WeightKind::Custom(_) => write!(f, "custom"),
        }
    }
}

/// sinc with the removable singularity filled by its series.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x * x * x * x / 120.0
    } else {
        x.sin() / x
    }
}

/// Evaluates w(z) = Pi(q, p) at a phase-space point.
pub fn eval_weight(w: &WeightSpec, pt: PhasePoint) -> Result<Complex64> {
    if !pt.is_finite() {
        return Err(Error::WeightEval("non-finite phase point".into()));
    }
    let val = match &w.kind {
        WeightKind::Constant => Complex64::ONE,
        WeightKind::CahillGlauber(s) => (s * 0.5 * pt.z().norm_sqr()).exp(),
        WeightKind::BornJordan => Complex64::new(sinc(pt.q * pt.p), 0.0),
        WeightKind::SeparableGaussian { sigma_l, sigma_d } => Complex64::new(
            (-0.5 * pt.q * pt.q / (sigma_l * sigma_l) - 0.5 * pt.p * pt.p / (sigma_d * sigma_d))
                .exp(),
            0.0,
        ),
        WeightKind::HeavisideElliptic(a) => Complex64::new(
            if 1.0 - a * pt.z().norm_sqr() >= 0.0 {
                1.0
            } else {
                -1.0
            },
            0.0,
        ),
        WeightKind::HeavisideHyperbolic(a) => Complex64::new(
            if 1.0 - a * pt.q * pt.p >= 0.0 {
                1.0
            } else {
                -1.0
            },
            0.0,
        ),
        WeightKind::Custom(cw) => (cw.eval)(pt).map_err(Error::WeightEval)?,
    };
    Ok(val)
}

/// Taylor table of the weight about the origin, to total degree `cap`,
/// in the requested representation. Heaviside kinds are rejected; custom
/// kinds require a stored table.
pub fn weight_taylor(w: &WeightSpec, cap: usize, rep: Rep) -> Result<CoeffTable2> {
    if cap > MAX_TAYLOR_DEGREE {
        return Err(Error::DegreeCap(format!(
            "taylor degree {cap} > {MAX_TAYLOR_DEGREE}"
        )));
    }
    let natural = match &w.kind {
        WeightKind::Constant => {
            let mut t = CoeffTable2::new(rep, cap);
            t.set(0, 0, Complex64::ONE);
            return Ok(t);
        }
        WeightKind::CahillGlauber(s) => match rep {
            // e^{s |z|^2 / 2} = sum (s/2)^i / i! z^i zb^i
            Rep::Z => {
                let mut t = CoeffTable2::new(Rep::Z, cap);
                for i in 0..=(cap / 2) as u32 {
                    t.set(i, i, (s / 2.0).powu(i) / factorial(i as usize));
                }
                t
            }
            // e^{s (q^2 + p^2) / 4}
            Rep::Qp => {
                let mut t = CoeffTable2::new(Rep::Qp, cap);
                for a in 0..=(cap / 2) as u32 {
                    for b in 0..=(cap / 2 - a as usize) as u32 {
                        t.set(
                            2 * a,
                            2 * b,
                            (s / 4.0).powu(a + b) / (factorial(a as usize) * factorial(b as usize)),
                        );
                    }
                }
                t
            }
        },
        WeightKind::BornJordan => {
            let mut t = CoeffTable2::new(Rep::Qp, cap);
            for r in 0..=(cap / 4) as u32 {
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                t.set(
                    2 * r,
                    2 * r,
                    Complex64::new(sign / factorial(2 * r as usize + 1), 0.0),
                );
            }
            t
        }
        WeightKind::SeparableGaussian { sigma_l, sigma_d } => {
            let mut t = CoeffTable2::new(Rep::Qp, cap);
            for a in 0..=(cap / 2) as u32 {
                for b in 0..=(cap / 2 - a as usize) as u32 {
                    let ca = (-0.5 / (sigma_l * sigma_l)).powi(a as i32) / factorial(a as usize);
                    let cb = (-0.5 / (sigma_d * sigma_d)).powi(b as i32) / factorial(b as usize);
                    t.set(2 * a, 2 * b, Complex64::new(ca * cb, 0.0));
                }
            }
            t
        }
        WeightKind::HeavisideElliptic(_) | WeightKind::HeavisideHyperbolic(_) => {
            return Err(Error::UnsupportedWeight(format!("{w}")));
        }
        WeightKind::Custom(cw) => match &cw.taylor_z {
            Some(t) => {
                let mut copy = t.clone();
                copy.cap = copy.cap.min(cap);
                copy.terms.retain(|&(i, j), _| (i + j) as usize <= cap);
                copy
            }
            None => return Err(Error::MissingTaylorData),
        },
    };
    Ok(natural.convert(rep))
}

/// Inverts a unit-constant power series degree by degree: the output
/// satisfies sum_{i,ibar} c_{n-i, nbar-ibar} cinv_{i, ibar} = delta_{n0}.
pub fn invert_series(c: &CoeffTable2, cap: usize) -> Result<CoeffTable2> {
    if (c.get(0, 0) - Complex64::ONE).norm() > 1e-12 {
        return Err(Error::Normalization(c.get(0, 0)));
    }
    let mut inv = CoeffTable2::new(c.rep, cap);
    inv.set(0, 0, Complex64::ONE);
    for total in 1..=cap as u32 {
        for n in 0..=total {
            let nbar = total - n;
            let mut acc = Complex64::ZERO;
            for i in 0..=n {
                for ibar in 0..=nbar {
                    if i == n && ibar == nbar {
                        continue;
                    }
                    let cc = c.get(n - i, nbar - ibar);
                    if cc != Complex64::ZERO {
                        acc += cc * inv.get(i, ibar);
                    }
                }
            }
            inv.set(n, nbar, -acc);
        }
    }
    Ok(inv)
}

fn classify_kind(kind: &WeightKind) -> Result<WeightFlags> {
    Ok(match kind {
        WeightKind::Constant => WeightFlags {
            regular: true,
            isotropic: true,
            hyperbolic: true,
            isometric: true,
        },
        WeightKind::CahillGlauber(s) => WeightFlags {
            regular: s.im == 0.0,
            isotropic: true,
            hyperbolic: *s == Complex64::ZERO,
            isometric: s.re == 0.0,
        },
        WeightKind::BornJordan => WeightFlags {
            regular: true,
            isotropic: false,
            hyperbolic: true,
            isometric: false,
        },
        WeightKind::SeparableGaussian { sigma_l, sigma_d } => WeightFlags {
            regular: true,
            isotropic: sigma_l == sigma_d,
            hyperbolic: false,
            isometric: false,
        },
        WeightKind::HeavisideElliptic(a) => WeightFlags {
            regular: true,
            isotropic: true,
            hyperbolic: *a == 0.0,
            isometric: true,
        },
        WeightKind::HeavisideHyperbolic(a) => WeightFlags {
            regular: true,
            isotropic: *a == 0.0,
            hyperbolic: true,
            isometric: true,
        },
        WeightKind::Custom(cw) => classify_by_sampling(cw)?,
    })
}

/// Sample set for classifying custom evaluators: three radii by eight
/// angles, checked to 1e-10.
fn classify_by_sampling(cw: &CustomWeight) -> Result<WeightFlags> {
    const TOL: f64 = 1e-10;
    let eval = |z: Complex64| -> Result<Complex64> {
        (cw.eval)(PhasePoint::from_z(z)).map_err(Error::WeightEval)
    };
    let radii = [0.35, 0.8, 1.3];
    let angles: Vec<f64> = (0..8)
        .map(|k| k as f64 * std::f64::consts::PI / 4.0 + 0.1)
        .collect();
    let mut flags = WeightFlags {
        regular: true,
        isotropic: true,
        hyperbolic: true,
        isometric: true,
    };
    for &r in &radii {
        let mut ring = Vec::new();
        for &th in &angles {
            let z = Complex64::from_polar(r, th);
            let v = eval(z)?;
            let vneg = eval(-z)?;
            if (v - vneg).norm() > TOL || (v - v.conj()).norm() > TOL {
                flags.regular = false;
            }
            if (v.norm() - 1.0).abs() > TOL {
                flags.isometric = false;
            }
            ring.push(v);
        }
        if ring.iter().any(|v| (v - ring[0]).norm() > TOL) {
            flags.isotropic = false;
        }
        // hyperbolic: compare pairs of points sharing Im(z^2) = q p
        for &th in &angles {
            let z1 = Complex64::from_polar(r, th);
            let qp = z1.powu(2).im;
            // a second point with the same q p product
            let q2 = 1.7 * r;
            let pt2 = PhasePoint::new(q2 * std::f64::consts::SQRT_2.sqrt(), 0.0);
            let q2v = pt2.q;
            let p2 = qp / q2v;
            let v1 = eval(z1)?;
            let v2 = (cw.eval)(PhasePoint::new(q2v, p2)).map_err(Error::WeightEval)?;
            if (v1 - v2).norm() > TOL {
                flags.hyperbolic = false;
            }
        }
    }
    Ok(flags)
}

/// Re-derives the flags (the constructor already stores them).
pub fn classify_weight(w: &WeightSpec) -> Result<WeightFlags> {
    classify_kind(&w.kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn builtins() -> Vec<WeightSpec> {
        vec![
            WeightSpec::constant(),
            WeightSpec::cahill_glauber(c(-1.0, 0.0)).unwrap(),
            WeightSpec::cahill_glauber(c(-0.5, 0.0)).unwrap(),
            WeightSpec::cahill_glauber(c(0.3, 0.0)).unwrap(),
            WeightSpec::born_jordan(),
            WeightSpec::separable_gaussian(1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn unit_value_at_origin_is_exact() {
        let mut all = builtins();
        all.push(WeightSpec::new(WeightKind::HeavisideElliptic(0.7)).unwrap());
        all.push(WeightSpec::new(WeightKind::HeavisideHyperbolic(0.7)).unwrap());
        for w in &all {
            assert_eq!(
                eval_weight(w, PhasePoint::origin()).unwrap(),
                Complex64::ONE,
                "{w}"
            );
        }
    }

    #[test]
    fn cahill_glauber_decay_value() {
        // |z|^2 = 2 at s = -1 gives e^{-1}
        let w = WeightSpec::cahill_glauber(c(-1.0, 0.0)).unwrap();
        let pt = PhasePoint::new(2.0, 0.0); // z = sqrt(2)
        let v = eval_weight(&w, pt).unwrap();
        assert!((v.re - (-1.0f64).exp()).abs() < 1e-12);
        assert!((v.re - 0.36787944117144233).abs() < 1e-12);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn born_jordan_zero_crossing() {
        let w = WeightSpec::born_jordan();
        let v = eval_weight(&w, PhasePoint::new(1.0, std::f64::consts::PI)).unwrap();
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn cahill_glauber_rejects_re_s_at_one() {
        assert!(WeightSpec::cahill_glauber(c(1.0, 0.0)).is_err());
        assert!(WeightSpec::cahill_glauber(c(1.5, 0.2)).is_err());
    }

    #[test]
    fn constant_taylor_is_single_entry() {
        let t = weight_taylor(&WeightSpec::constant(), 6, Rep::Z).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(0, 0), Complex64::ONE);
    }

    #[test]
    fn born_jordan_taylor_low_orders() {
        let t = weight_taylor(&WeightSpec::born_jordan(), 6, Rep::Qp).unwrap();
        assert_eq!(t.get(1, 1), Complex64::ZERO);
        assert!((t.get(2, 2) - c(-1.0 / 6.0, 0.0)).norm() < 1e-16);
        assert_eq!(t.get(2, 0), Complex64::ZERO);
    }

    #[test]
    fn cahill_glauber_taylor_z_rep() {
        // differentiate e^{s |z|^2 / 2} at the origin: c_11 = s/2
        let w = WeightSpec::cahill_glauber(c(0.4, 0.0)).unwrap();
        let t = weight_taylor(&w, 4, Rep::Z).unwrap();
        assert!((t.get(1, 1) - c(0.2, 0.0)).norm() < 1e-16);
        assert_eq!(t.get(1, 0), Complex64::ZERO);
        assert_eq!(t.get(0, 1), Complex64::ZERO);
        assert!((t.get(2, 2) - c(0.02, 0.0)).norm() < 1e-16);
    }

    #[test]
    fn heaviside_taylor_rejected() {
        let w = WeightSpec::new(WeightKind::HeavisideElliptic(1.0)).unwrap();
        assert!(matches!(
            weight_taylor(&w, 4, Rep::Z),
            Err(Error::UnsupportedWeight(_))
        ));
    }

    #[test]
    fn taylor_matches_eval_for_analytic_kinds() {
        for w in builtins() {
            let t = weight_taylor(&w, 16, Rep::Qp).unwrap();
            for &(q, p) in &[(0.3, 0.2), (-0.4, 0.25), (0.5, -0.5)] {
                let partial = t.eval(c(q, 0.0), c(p, 0.0));
                let exact = eval_weight(&w, PhasePoint::new(q, p)).unwrap();
                assert!(
                    (partial - exact).norm() < 1e-8,
                    "{w} at ({q},{p}): {partial} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn conversion_round_trips() {
        for w in builtins() {
            let zt = weight_taylor(&w, 8, Rep::Z).unwrap();
            let back = zt.convert(Rep::Qp).convert(Rep::Z);
            for (&(i, j), &v) in zt.iter() {
                assert!((back.get(i, j) - v).norm() < 1e-13, "{w} ({i},{j})");
            }
            for (&(i, j), &v) in back.iter() {
                assert!((zt.get(i, j) - v).norm() < 1e-13, "{w} rev ({i},{j})");
            }
        }
    }

    #[test]
    fn inversion_low_order_identities() {
        // asymmetric custom table: c10, c01, c11, c20, c02 all distinct
        let mut ct = CoeffTable2::new(Rep::Z, 4);
        ct.set(0, 0, Complex64::ONE);
        ct.set(1, 0, c(0.3, 0.1));
        ct.set(0, 1, c(-0.2, 0.4));
        ct.set(1, 1, c(0.15, -0.05));
        ct.set(2, 0, c(0.07, 0.0));
        ct.set(0, 2, c(-0.03, 0.02));
        let inv = invert_series(&ct, 4).unwrap();
        let (c10, c01, c11, c20, c02) = (
            ct.get(1, 0),
            ct.get(0, 1),
            ct.get(1, 1),
            ct.get(2, 0),
            ct.get(0, 2),
        );
        assert!((inv.get(1, 0) + c10).norm() < 1e-15);
        assert!((inv.get(0, 1) + c01).norm() < 1e-15);
        assert!((inv.get(1, 1) - (-c11 + 2.0 * c10 * c01)).norm() < 1e-15);
        assert!((inv.get(2, 0) - (-c20 + c10 * c10)).norm() < 1e-15);
        assert!((inv.get(0, 2) - (-c02 + c01 * c01)).norm() < 1e-15);
    }

    #[test]
    fn inversion_of_constant_weight_is_trivial() {
        let t = weight_taylor(&WeightSpec::constant(), 8, Rep::Z).unwrap();
        let inv = invert_series(&t, 8).unwrap();
        assert_eq!(inv.len(), 1);
        assert_eq!(inv.get(0, 0), Complex64::ONE);
    }

    #[test]
    fn inversion_requires_unit_constant() {
        let mut t = CoeffTable2::new(Rep::Z, 2);
        t.set(0, 0, c(2.0, 0.0));
        assert!(matches!(invert_series(&t, 2), Err(Error::Normalization(_))));
    }

    #[test]
    fn inversion_satisfies_convolution_and_is_involutive() {
        for w in builtins() {
            for rep in [Rep::Z, Rep::Qp] {
                let cap = 8;
                let ct = weight_taylor(&w, cap, rep).unwrap();
                let inv = invert_series(&ct, cap).unwrap();
                // convolution identity
                for total in 1..=cap as u32 {
                    for n in 0..=total {
                        let nbar = total - n;
                        let mut acc = Complex64::ZERO;
                        for i in 0..=n {
                            for ibar in 0..=nbar {
                                acc += ct.get(n - i, nbar - ibar) * inv.get(i, ibar);
                            }
                        }
                        assert!(acc.norm() < 1e-12, "{w} {rep:?} ({n},{nbar}): {acc}");
                    }
                }
                // involution
                let back = invert_series(&inv, cap).unwrap();
                for (&(i, j), &v) in ct.iter() {
                    assert!((back.get(i, j) - v).norm() < 1e-12, "{w} {rep:?}");
                }
            }
        }
    }

    #[test]
    fn classification_of_builtins() {
        let all = |w: &WeightSpec| w.flags();
        let ww = all(&WeightSpec::constant());
        assert!(ww.regular && ww.isotropic && ww.hyperbolic && ww.isometric);

        let cg = all(&WeightSpec::cahill_glauber(c(-1.0, 0.0)).unwrap());
        assert!(cg.regular && cg.isotropic && !cg.hyperbolic && !cg.isometric);

        let bj = all(&WeightSpec::born_jordan());
        assert!(bj.regular && bj.hyperbolic && !bj.isotropic && !bj.isometric);

        let even = all(&WeightSpec::separable_gaussian(1.5, 1.5).unwrap());
        assert!(even.isotropic);
        let uneven = all(&WeightSpec::separable_gaussian(1.0, 2.0).unwrap());
        assert!(!uneven.isotropic && uneven.regular);
    }

    #[test]
    fn custom_weight_classified_by_sampling() {
        // an isotropic non-regular complex weight: e^{i |z|^2}
        let cw = CustomWeight {
            eval: Arc::new(|pt: PhasePoint| {
                Ok((Complex64::new(0.0, 1.0) * pt.z().norm_sqr()).exp())
            }),
            taylor_z: None,
        };
        let w = WeightSpec::new(WeightKind::Custom(cw)).unwrap();
        let f = w.flags();
        assert!(f.isotropic && f.isometric && !f.regular && !f.hyperbolic);
    }

    #[test]
    fn parse_grammar() {
        assert!(matches!(
            WeightSpec::parse("ww").unwrap().kind(),
            WeightKind::Constant
        ));
        match WeightSpec::parse("cg:-0.5").unwrap().kind() {
            WeightKind::CahillGlauber(s) => assert_eq!(*s, c(-0.5, 0.0)),
            _ => panic!(),
        }
        match WeightSpec::parse("cg:0.1,0.2").unwrap().kind() {
            WeightKind::CahillGlauber(s) => assert_eq!(*s, c(0.1, 0.2)),
            _ => panic!(),
        }
        match WeightSpec::parse("gauss:1,2").unwrap().kind() {
            WeightKind::SeparableGaussian { sigma_l, sigma_d } => {
                assert_eq!((*sigma_l, *sigma_d), (1.0, 2.0));
            }
            _ => panic!(),
        }
        assert!(WeightSpec::parse("nope").is_err());
        assert!(WeightSpec::parse("gauss:1").is_err());
    }
}
