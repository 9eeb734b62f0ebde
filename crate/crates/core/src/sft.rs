//! Phase-space grids, sampled fields, the symplectic Fourier transform,
//! and partial Fourier transforms of weights.
//!
//! The cartesian grid is uniform in the complex plane: nodes z = x + iy
//! with x, y running over midpoints of [-L, L], so that every node has its
//! reflection -z on the grid and the measure weight is h^2/pi per node.
//! The symplectic transform is evaluated on the same grid through two
//! dense one-dimensional transform matrices; in canonical coordinates this
//! realizes the rotated two-dimensional Fourier transform
//! F_s\[F\](q,p) = F\[F\](-p,q), with the rotation folded into the kernel
//! e^{2i(y u - x v)}.

use crate::error::{Error, Result};
use crate::fock::PhasePoint;
use crate::special::{gauss_hermite_modified, gauss_laguerre_modified};
use crate::weights::{eval_weight, WeightKind, WeightSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

/// Node layout of a quadrature grid over the phase plane.
#[derive(Clone, Debug, PartialEq)]
pub enum GridScheme {
    /// Uniform midpoint grid over [-L, L]^2 in the complex plane.
    CartesianUniform { half_width: f64, points: usize },
    /// Gauss-Laguerre in |z|^2 crossed with uniform angles.
    PolarGaussLaguerre { radial: usize, angular: usize },
    /// Tensor Gauss-Hermite matched to Gaussian widths in q and p.
    TensorGaussHermite {
        sigma_q: f64,
        sigma_p: f64,
        order: usize,
    },
}

/// Quadrature grid: nodes with weights normalized so that
/// sum_i w_i f(z_i) approximates the integral of f against d^2z / pi.
#[derive(Clone, Debug)]
pub struct PhaseGrid {
    scheme: GridScheme,
    nodes: Vec<PhasePoint>,
    qweights: Vec<f64>,
    /// 1-D axis (Re z units) for cartesian grids.
    axis: Vec<f64>,
    calibration_error: f64,
}

impl PhaseGrid {
    pub fn scheme(&self) -> &GridScheme {
        &self.scheme
    }

    pub fn nodes(&self) -> &[PhasePoint] {
        &self.nodes
    }

    pub fn qweights(&self) -> &[f64] {
        &self.qweights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn calibration_error(&self) -> f64 {
        self.calibration_error
    }

    pub fn is_cartesian(&self) -> bool {
        matches!(self.scheme, GridScheme::CartesianUniform { .. })
    }

    /// Largest |z| over the nodes.
    pub fn max_radius(&self) -> f64 {
        self.nodes
            .iter()
            .map(|pt| pt.z().norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn axis(&self) -> &[f64] {
        &self.axis
    }
}

/// Builds a grid and verifies it integrates the reference Gaussian
/// e^{-|z|^2} to 1 within 1e-8 (construction fails otherwise).
pub fn make_grid(scheme: GridScheme) -> Result<Arc<PhaseGrid>> {
    let (nodes, qweights, axis) = match &scheme {
        GridScheme::CartesianUniform { half_width, points } => {
            let (l, m) = (*half_width, *points);
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::GridParams(format!("bad half-width {l}")));
            }
            if m < 4 || m % 2 != 0 {
                return Err(Error::GridParams(format!(
                    "cartesian grid needs an even point count >= 4, got {m}"
                )));
            }
            let h = 2.0 * l / m as f64;
            let axis: Vec<f64> = (0..m).map(|j| -l + (j as f64 + 0.5) * h).collect();
            let w = h * h / std::f64::consts::PI;
            let mut nodes = Vec::with_capacity(m * m);
            for &x in &axis {
                for &y in &axis {
                    nodes.push(PhasePoint::from_z(Complex64::new(x, y)));
                }
            }
            (nodes, vec![w; m * m], axis)
        }
        GridScheme::PolarGaussLaguerre { radial, angular } => {
            if *radial < 2 || *angular < 4 {
                return Err(Error::GridParams(format!(
                    "polar grid needs radial >= 2 and angular >= 4, got {radial}, {angular}"
                )));
            }
            let (u, wmod) = gauss_laguerre_modified(*radial)?;
            let a = *angular;
            let mut nodes = Vec::with_capacity(radial * a);
            let mut weights = Vec::with_capacity(radial * a);
            for (ui, wi) in u.iter().zip(&wmod) {
                let r = ui.sqrt();
                for k in 0..a {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / a as f64;
                    nodes.push(PhasePoint::from_z(Complex64::from_polar(r, phi)));
                    weights.push(wi / a as f64);
                }
            }
            (nodes, weights, Vec::new())
        }
        GridScheme::TensorGaussHermite {
            sigma_q,
            sigma_p,
            order,
        } => {
            if !(sigma_q.is_finite() && *sigma_q > 0.0 && sigma_p.is_finite() && *sigma_p > 0.0) {
                return Err(Error::GridParams(
                    "gauss-hermite widths must be positive".into(),
                ));
            }
            let (t, wmod) = gauss_hermite_modified(*order)?;
            let build = |sigma: f64| -> (Vec<f64>, Vec<f64>) {
                let scale = std::f64::consts::SQRT_2 * sigma;
                (
                    t.iter().map(|ti| scale * ti).collect(),
                    wmod.iter().map(|wi| scale * wi).collect(),
                )
            };
            let (qs, wq) = build(*sigma_q);
            let (ps, wp) = build(*sigma_p);
            let norm = 1.0 / (2.0 * std::f64::consts::PI);
            let mut nodes = Vec::with_capacity(qs.len() * ps.len());
            let mut weights = Vec::with_capacity(qs.len() * ps.len());
            for (q, wqi) in qs.iter().zip(&wq) {
                for (p, wpi) in ps.iter().zip(&wp) {
                    nodes.push(PhasePoint::new(*q, *p));
                    weights.push(wqi * wpi * norm);
                }
            }
            (nodes, weights, Vec::new())
        }
    };

    // self-calibration against int e^{-|z|^2} d^2z / pi = 1
    let total: f64 = nodes
        .iter()
        .zip(&qweights)
        .map(|(pt, w)| w * (-pt.z().norm_sqr()).exp())
        .sum();
    let err = (total - 1.0).abs();
    if err > 1e-8 {
        return Err(Error::GridCalibration(err));
    }
    Ok(Arc::new(PhaseGrid {
        scheme,
        nodes,
        qweights,
        axis,
        calibration_error: err,
    }))
}

/// Default Gauss-Hermite order for a pair of widths, scaled so the
/// mismatched reference Gaussian still calibrates below 1e-8.
pub fn gauss_hermite_order_for(sigma_q: f64, sigma_p: f64) -> usize {
    let s = sigma_q.max(sigma_p);
    (80.0f64).max((10.0 * s * s).ceil()) as usize
}

/// Complex scalar field sampled on a grid.
#[derive(Clone, Debug)]
pub struct PhaseField {
    grid: Arc<PhaseGrid>,
    values: Vec<Complex64>,
    /// set when a transform detected boundary leakage in its input
    pub aliasing_warning: bool,
    /// set when values were requested outside a documented accuracy radius
    pub radius_warning: bool,
}

impl PhaseField {
    pub fn from_fn(grid: Arc<PhaseGrid>, f: impl Fn(PhasePoint) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&pt| f(pt)).collect();
        Self {
            grid,
            values,
            aliasing_warning: false,
            radius_warning: false,
        }
    }

    pub fn from_values(grid: Arc<PhaseGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridFieldMismatch);
        }
        Ok(Self {
            grid,
            values,
            aliasing_warning: false,
            radius_warning: false,
        })
    }

    pub fn grid(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Quadrature of the field: sum w_i v_i ~ int v d^2z / pi.
    pub fn integrate(&self) -> Complex64 {
        self.grid
            .qweights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| *w * v)
            .sum()
    }

    /// Quadrature of g(z) v(z) over the grid.
    pub fn integrate_against(&self, g: impl Fn(PhasePoint) -> Complex64) -> Complex64 {
        self.grid
            .nodes()
            .iter()
            .zip(self.grid.qweights())
            .zip(&self.values)
            .map(|((pt, w), v)| *w * g(*pt) * v)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Pointwise comparison against a reference function.
    pub fn max_abs_error(&self, f: impl Fn(PhasePoint) -> Complex64) -> f64 {
        self.grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(pt, v)| (v - f(*pt)).norm())
            .fold(0.0, f64::max)
    }
}

/// Transform direction: `Forward` applies the kernel e^{z o xi},
/// `Reflected` its inverse-reflected companion e^{-z o xi}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SftDirection {
    Forward,
    Reflected,
}

/// Symplectic Fourier transform of a field on a cartesian grid, evaluated
/// on the same grid. Both directions are involutions; composing one with
/// the other gives the parity reflection.
pub fn sft(field: &PhaseField, direction: SftDirection) -> Result<PhaseField> {
    let grid = field.grid().clone();
    let GridScheme::CartesianUniform { half_width, points } = *grid.scheme() else {
        return Err(Error::UnsupportedGrid);
    };
    let m = points;
    let h = 2.0 * half_width / m as f64;
    let axis = grid.axis();

    // leakage detector: significant boundary magnitude aliases the result
    let peak = field.max_abs();
    let mut boundary = 0.0f64;
    for j in 0..m {
        for &k in &[0usize, m - 1] {
            boundary = boundary.max(field.values[j * m + k].norm());
            boundary = boundary.max(field.values[k * m + j].norm());
        }
    }
    let aliasing = peak > 0.0 && boundary > 1e-6 * peak;

    // plus kernel e^{+2i t t'}, minus kernel its conjugate
    let plus = DMatrix::<Complex64>::from_fn(m, m, |r, c| {
        Complex64::from_polar(1.0, 2.0 * axis[r] * axis[c])
    });
    let minus = plus.map(|c| c.conj());

    let f = DMatrix::<Complex64>::from_fn(m, m, |j, k| field.values[j * m + k]);
    let scale = Complex64::new(h * h / std::f64::consts::PI, 0.0);
    // forward: G[a,b] = (h^2/pi) sum_{j,k} e^{2i(y_b u_j - x_a v_k)} f[j,k]
    let g = match direction {
        SftDirection::Forward => (&minus * f.transpose()) * &plus,
        SftDirection::Reflected => (&plus * f.transpose()) * &minus,
    };

    let mut values = vec![Complex64::ZERO; m * m];
    for a in 0..m {
        for b in 0..m {
            values[a * m + b] = scale * g[(a, b)];
        }
    }
    let mut out = PhaseField::from_values(grid, values)?;
    out.aliasing_warning = aliasing;
    Ok(out)
}

/// Gauss-Legendre 16-point panel rule on [a, b].
fn gl16(g: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
    const X: [f64; 8] = [
        0.0950125098376374,
        0.2816035507792589,
        0.4580167776572274,
        0.6178762444026438,
        0.755404408355003,
        0.8656312023878318,
        0.9445750230732326,
        0.9894009349916499,
    ];
    const W: [f64; 8] = [
        0.1894506104550685,
        0.1826034150449236,
        0.1691565193950025,
        0.1495959888165767,
        0.1246289712555339,
        0.0951585116824928,
        0.0622535239386479,
        0.0271524594117541,
    ];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = Complex64::ZERO;
    for i in 0..8 {
        acc += W[i] * (g(mid + half * X[i]) + g(mid - half * X[i]));
    }
    acc * half
}

/// Half-line integral of an oscillatory decaying integrand by panel sums of
/// length `chunk` accelerated with iterated averaging of the partial sums.
fn oscillatory_halfline(g: impl Fn(f64) -> Complex64, chunk: f64, n_chunks: usize) -> Complex64 {
    let mut partial = Vec::with_capacity(n_chunks);
    let mut acc = Complex64::ZERO;
    for k in 0..n_chunks {
        let a = k as f64 * chunk;
        acc += gl16(&g, a, a + chunk);
        partial.push(acc);
    }
    // iterated averaging damps the alternating remainder geometrically
    let keep = 64.min(partial.len());
    let mut s: Vec<Complex64> = partial[partial.len() - keep..].to_vec();
    while s.len() > 1 {
        s = s.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    s[0]
}

/// Source of a partial Fourier transform in the momentum variable.
pub enum PartialFtSource<'a> {
    Weight(&'a WeightSpec),
    Field(&'a PhaseField),
}

/// Partial Fourier transform over p at fixed q:
///   (1 / sqrt(2 pi)) . int e^{-i y p} Pi(q, p) dp.
/// Analytic for Gaussian-type weights, numeric (accelerated oscillatory
/// panels) for the sinc weight and custom evaluators, and a discrete sum
/// for sampled fields (q must sit on a grid row).
pub fn partial_ft_p(src: PartialFtSource<'_>, q: f64, y: f64) -> Result<Complex64> {
    let sqrt_2pi = (2.0 * std::f64::consts::PI).sqrt();
    match src {
        PartialFtSource::Weight(w) => match w.kind() {
            WeightKind::Constant
            | WeightKind::HeavisideElliptic(_)
            | WeightKind::HeavisideHyperbolic(_) => Err(Error::DistributionalKind),
            WeightKind::SeparableGaussian { sigma_l, sigma_d } => Ok(Complex64::new(
                sigma_d
                    * (-0.5 * q * q / (sigma_l * sigma_l)).exp()
                    * (-0.5 * sigma_d * sigma_d * y * y).exp(),
                0.0,
            )),
            WeightKind::CahillGlauber(s) => {
                if s.re >= 0.0 {
                    return Err(if *s == Complex64::ZERO {
                        Error::DistributionalKind
                    } else {
                        Error::UnsupportedCombination(format!(
                            "partial transform needs Re s < 0, got {s}"
                        ))
                    });
                }
                // int e^{s p^2/4 - iyp} dp = sqrt(-4 pi / s) e^{y^2 / s}
                let root = (Complex64::new(-2.0, 0.0) / s).sqrt();
                Ok(root * (s * 0.25 * q * q).exp() * (Complex64::new(y * y, 0.0) / s).exp())
            }
            WeightKind::BornJordan => {
                if q.abs() < 1e-12 {
                    return Err(Error::DistributionalKind); // sinc(0 . p) = 1 for all p
                }
                let g = |p: f64| {
                    let x = q * p;
                    let sinc = if x.abs() < 1e-8 { 1.0 } else { x.sin() / x };
                    Complex64::new(2.0 * (y * p).cos() * sinc, 0.0)
                };
                let chunk = std::f64::consts::PI / q.abs().max(y.abs());
                Ok(oscillatory_halfline(g, chunk, 400) / sqrt_2pi)
            }
            WeightKind::Custom(_) => {
                // reject p-independent evaluators (delta-valued transform)
                let probes = [0.37, 1.13, -0.83];
                let base = eval_weight(w, PhasePoint::new(q, probes[0]))?;
                if probes[1..]
                    .iter()
                    .all(|&p| match eval_weight(w, PhasePoint::new(q, p)) {
                        Ok(v) => (v - base).norm() < 1e-14,
                        Err(_) => false,
                    })
                {
                    return Err(Error::DistributionalKind);
                }
                let g = |p: f64| -> Complex64 {
                    let plus = eval_weight(w, PhasePoint::new(q, p)).unwrap_or(Complex64::ZERO);
                    let minus = eval_weight(w, PhasePoint::new(q, -p)).unwrap_or(Complex64::ZERO);
                    Complex64::from_polar(1.0, -y * p) * plus
                        + Complex64::from_polar(1.0, y * p) * minus
                };
                let chunk = std::f64::consts::PI / y.abs().max(1.0);
                Ok(oscillatory_halfline(g, chunk, 400) / sqrt_2pi)
            }
        },
        PartialFtSource::Field(field) => {
            let grid = field.grid();
            let GridScheme::CartesianUniform { half_width, points } = *grid.scheme() else {
                return Err(Error::UnsupportedGrid);
            };
            let m = points;
            let h = 2.0 * half_width / m as f64;
            let axis = grid.axis();
            let x_target = q / std::f64::consts::SQRT_2;
            let j = axis
                .iter()
                .position(|&x| (x - x_target).abs() < 1e-9)
                .ok_or(Error::GridFieldMismatch)?;
            let hp = std::f64::consts::SQRT_2 * h; // spacing in p
            let mut acc = Complex64::ZERO;
            for (k, &x) in axis.iter().enumerate() {
                let p = std::f64::consts::SQRT_2 * x;
                acc += Complex64::from_polar(1.0, -y * p) * field.values[j * m + k];
            }
            Ok(acc * hp / sqrt_2pi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::CustomWeight;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cart(l: f64, m: usize) -> Arc<PhaseGrid> {
        make_grid(GridScheme::CartesianUniform {
            half_width: l,
            points: m,
        })
        .unwrap()
    }

    #[test]
    fn cartesian_calibration_is_tight() {
        let g = cart(6.0, 128);
        assert!(g.calibration_error() < 1e-10, "{}", g.calibration_error());
    }

    #[test]
    fn polar_calibration_is_tight() {
        let g = make_grid(GridScheme::PolarGaussLaguerre {
            radial: 40,
            angular: 64,
        })
        .unwrap();
        assert!(g.calibration_error() < 1e-10, "{}", g.calibration_error());
    }

    #[test]
    fn gauss_hermite_grid_calibrates() {
        for sigma in [1.0, 2.0] {
            let g = make_grid(GridScheme::TensorGaussHermite {
                sigma_q: sigma,
                sigma_p: sigma,
                order: gauss_hermite_order_for(sigma, sigma),
            })
            .unwrap();
            assert!(g.calibration_error() < 1e-10, "sigma={sigma}");
        }
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(make_grid(GridScheme::CartesianUniform {
            half_width: 4.0,
            points: 2
        })
        .is_err());
        assert!(make_grid(GridScheme::CartesianUniform {
            half_width: 4.0,
            points: 33
        })
        .is_err());
    }

    #[test]
    fn gaussian_is_a_fixed_point_of_the_transform() {
        // f = e^{-|xi|^2} maps to e^{-|z|^2}
        let grid = cart(8.0, 256);
        let f = PhaseField::from_fn(grid, |pt| c((-pt.z().norm_sqr()).exp(), 0.0));
        let g = sft(&f, SftDirection::Forward).unwrap();
        let err = g.max_abs_error(|pt| c((-pt.z().norm_sqr()).exp(), 0.0));
        assert!(err < 1e-8, "max error {err}");
        assert!(!g.aliasing_warning);
    }

    #[test]
    fn gaussian_scaling_law() {
        // f_s[e^{nu |xi|^2}](z) = (1/(-nu)) e^{|z|^2/nu} for nu = -1/2
        let grid = cart(8.0, 192);
        let nu = -0.5;
        let f = PhaseField::from_fn(grid, |pt| c((nu * pt.z().norm_sqr()).exp(), 0.0));
        let g = sft(&f, SftDirection::Forward).unwrap();
        let err = g.max_abs_error(|pt| c(-(1.0 / nu) * (pt.z().norm_sqr() / nu).exp(), 0.0));
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn transform_is_an_involution() {
        let grid = cart(8.0, 128);
        // asymmetric smooth field: Gaussian times a polynomial
        let f = PhaseField::from_fn(grid, |pt| {
            let z = pt.z();
            (c(1.0, 0.0) + z * 0.3 + z.conj() * z * 0.2) * (-z.norm_sqr()).exp()
        });
        for dir in [SftDirection::Forward, SftDirection::Reflected] {
            let twice = sft(&sft(&f, dir).unwrap(), dir).unwrap();
            let err: f64 = f
                .values()
                .iter()
                .zip(twice.values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "{dir:?}: {err}");
        }
    }

    #[test]
    fn forward_after_reflected_is_parity() {
        let grid = cart(8.0, 128);
        let m = 128;
        let f = PhaseField::from_fn(grid, |pt| {
            let z = pt.z();
            (c(0.4, 0.0) + z) * (-z.norm_sqr()).exp()
        });
        let round = sft(
            &sft(&f, SftDirection::Reflected).unwrap(),
            SftDirection::Forward,
        )
        .unwrap();
        // midpoint grid maps node (j,k) to its reflection (m-1-j, m-1-k)
        let mut err = 0.0f64;
        for j in 0..m {
            for k in 0..m {
                let reflected = f.values()[(m - 1 - j) * m + (m - 1 - k)];
                err = err.max((round.values()[j * m + k] - reflected).norm());
            }
        }
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn derivative_exchange_identity() {
        // d/dq F_s[F] = -i F_s[y F] checked against the analytic transform
        let grid = cart(8.0, 160);
        let yf = PhaseField::from_fn(grid, |pt| {
            c(pt.p * (-0.5 * (pt.q * pt.q + pt.p * pt.p)).exp(), 0.0)
        });
        let rhs = sft(&yf, SftDirection::Forward).unwrap();
        // transform of the unit Gaussian is itself, so the left side is
        // d/dq e^{-(q^2+p^2)/2} = -q e^{-(q^2+p^2)/2}
        let err = rhs.max_abs_error(|pt| {
            let gauss = (-0.5 * (pt.q * pt.q + pt.p * pt.p)).exp();
            c(0.0, 1.0) * c(-pt.q * gauss, 0.0) // rhs = (1/-i) lhs = i lhs
        });
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn convolution_theorem_on_gaussians() {
        // F_s[F * G] = 2 pi F_s[F] F_s[G] with the exact Gaussian convolution
        let grid = cart(9.0, 160);
        let a = 0.5f64;
        let b = 1.0f64;
        let f = PhaseField::from_fn(grid.clone(), |pt| {
            c((-a * (pt.q * pt.q + pt.p * pt.p)).exp(), 0.0)
        });
        let g = PhaseField::from_fn(grid.clone(), |pt| {
            c((-b * (pt.q * pt.q + pt.p * pt.p)).exp(), 0.0)
        });
        let ab = a * b / (a + b);
        let mass = std::f64::consts::PI / (a + b);
        let conv = PhaseField::from_fn(grid, |pt| {
            c(mass * (-ab * (pt.q * pt.q + pt.p * pt.p)).exp(), 0.0)
        });
        let lhs = sft(&conv, SftDirection::Forward).unwrap();
        let tf = sft(&f, SftDirection::Forward).unwrap();
        let tg = sft(&g, SftDirection::Forward).unwrap();
        let mut err = 0.0f64;
        for i in 0..lhs.values().len() {
            let rhs = 2.0 * std::f64::consts::PI * tf.values()[i] * tg.values()[i];
            err = err.max((lhs.values()[i] - rhs).norm());
        }
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn regularized_dirac_mass() {
        // f_s[e^{nu |xi|^2}] concentrates to unit mass as nu -> 0^-
        let grid = cart(20.0, 640);
        let nu = -0.01;
        let f = PhaseField::from_fn(grid, |pt| c((nu * pt.z().norm_sqr()).exp(), 0.0));
        let g = sft(&f, SftDirection::Forward).unwrap();
        let mass = g.integrate();
        assert!((mass.re - 1.0).abs() < 1e-4, "mass {mass}");
        assert!(mass.im.abs() < 1e-10);
    }

    #[test]
    fn aliasing_detector_flags_undamped_input() {
        let grid = cart(5.0, 64);
        let f = PhaseField::from_fn(grid, |_| Complex64::ONE);
        let g = sft(&f, SftDirection::Forward).unwrap();
        assert!(g.aliasing_warning);
    }

    #[test]
    fn sft_requires_cartesian_grid() {
        let g = make_grid(GridScheme::PolarGaussLaguerre {
            radial: 8,
            angular: 8,
        })
        .unwrap();
        let f = PhaseField::from_fn(g, |_| Complex64::ONE);
        assert!(matches!(
            sft(&f, SftDirection::Forward),
            Err(Error::UnsupportedGrid)
        ));
    }

    #[test]
    fn partial_transform_gaussian_value() {
        let w = WeightSpec::separable_gaussian(1.0, 1.0).unwrap();
        let v = partial_ft_p(PartialFtSource::Weight(&w), 0.0, 0.0).unwrap();
        assert!((v - Complex64::ONE).norm() < 1e-14);
        // against the exponential isotropic form at matched widths:
        // s = -0.5 corresponds to sigma = 2
        let cg = WeightSpec::cahill_glauber(c(-0.5, 0.0)).unwrap();
        let gauss = WeightSpec::separable_gaussian(2.0, 2.0).unwrap();
        for &(q, y) in &[(0.0, 0.0), (0.7, 0.4), (1.3, -0.6)] {
            let a = partial_ft_p(PartialFtSource::Weight(&cg), q, y).unwrap();
            let b = partial_ft_p(PartialFtSource::Weight(&gauss), q, y).unwrap();
            assert!((a - b).norm() < 1e-13, "({q},{y}): {a} vs {b}");
        }
    }

    #[test]
    fn partial_transform_sinc_matches_dirichlet_integral() {
        // (1/sqrt(2 pi)) int sinc(p) dp = sqrt(pi/2)
        let w = WeightSpec::born_jordan();
        let v = partial_ft_p(PartialFtSource::Weight(&w), 1.0, 0.0).unwrap();
        let expect = (std::f64::consts::PI / 2.0).sqrt();
        assert!((v.re - expect).abs() < 1e-7, "{} vs {expect}", v.re);
        assert!(v.im.abs() < 1e-9);
        // the transform of sinc is a box: zero outside |y| < |q|
        let outside = partial_ft_p(PartialFtSource::Weight(&w), 1.3, 2.0).unwrap();
        assert!(outside.norm() < 1e-3, "{outside}");
        let inside = partial_ft_p(PartialFtSource::Weight(&w), 1.3, 0.5).unwrap();
        let box_height = std::f64::consts::PI / 1.3 / (2.0 * std::f64::consts::PI).sqrt();
        assert!(
            (inside.re - box_height).abs() < 1e-3,
            "{} vs {box_height}",
            inside.re
        );
    }

    #[test]
    fn partial_transform_rejects_p_independent_weights() {
        assert!(matches!(
            partial_ft_p(PartialFtSource::Weight(&WeightSpec::constant()), 0.3, 0.1),
            Err(Error::DistributionalKind)
        ));
        assert!(matches!(
            partial_ft_p(
                PartialFtSource::Weight(&WeightSpec::born_jordan()),
                0.0,
                0.1
            ),
            Err(Error::DistributionalKind)
        ));
        let cw = CustomWeight {
            eval: std::sync::Arc::new(|pt: PhasePoint| Ok(c((-pt.q * pt.q).exp(), 0.0))),
            taylor_z: None,
        };
        let w = WeightSpec::new(WeightKind::Custom(cw)).unwrap();
        assert!(matches!(
            partial_ft_p(PartialFtSource::Weight(&w), 0.5, 0.2),
            Err(Error::DistributionalKind)
        ));
    }

    #[test]
    fn partial_transform_of_sampled_field() {
        let grid = cart(8.0, 128);
        let w = WeightSpec::separable_gaussian(1.0, 1.5).unwrap();
        let field = PhaseField::from_fn(grid.clone(), |pt| eval_weight(&w, pt).unwrap());
        // pick an actual grid row
        let q = std::f64::consts::SQRT_2 * grid.axis()[70];
        for &y in &[0.0, 0.8] {
            let got = partial_ft_p(PartialFtSource::Field(&field), q, y).unwrap();
            let want = partial_ft_p(PartialFtSource::Weight(&w), q, y).unwrap();
            assert!((got - want).norm() < 1e-6, "y={y}: {got} vs {want}");
        }
        // off-grid rows are rejected
        assert!(partial_ft_p(PartialFtSource::Field(&field), 0.1234, 0.0).is_err());
    }
}
