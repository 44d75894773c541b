//! Numerical integration engines.
//!
//! Two surface integrators are provided. The workhorse follows the
//! icosahedron method: an outer Gauss-Legendre rule in `zeta = cos(theta')`
//! and an adaptive Gauss-Kronrod 7/15 rule in `phi'` per row. Because the
//! Gauss nodes are interior and irrational, the rows never pass exactly
//! through a mesh vertex, which is what keeps the kernel singularity off
//! the quadrature points on the unit sphere. The second integrator is
//! fully adaptive in both variables and works in a rotated frame whose
//! pole is moved away from the field point's direction; it is slower but
//! resolves the integrable surface singularity to tight tolerances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sphere::{normalize_phi, CartesianVec, SphericalPoint};

/// Tolerances and rule sizes for the surface integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Gauss-Legendre order for the `zeta = cos(theta')` integral.
    pub n_gauss_zeta: usize,
    /// Absolute tolerance of the adaptive rule.
    pub inner_abs_tol: f64,
    /// Relative tolerance of the adaptive rule.
    pub inner_rel_tol: f64,
    /// Maximum bisection depth of the adaptive rule.
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            n_gauss_zeta: 5,
            inner_abs_tol: 1e-10,
            inner_rel_tol: 1e-8,
            max_subdivisions: 50,
        }
    }
}

impl QuadratureConfig {
    fn validate(&self) -> Result<()> {
        if self.n_gauss_zeta < 2 || self.n_gauss_zeta > 64 {
            return Err(Error::GaussOrderOutOfRange {
                n: self.n_gauss_zeta,
            });
        }
        if self.inner_abs_tol <= 0.0 || self.inner_rel_tol <= 0.0 {
            return Err(Error::Config(
                "quadrature tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Value, error estimate, and cost of one integral.
#[derive(Debug, Clone, Copy)]
pub struct IntegralResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are the roots of the degree-`n` Legendre polynomial, found by
/// Newton iteration from Chebyshev initial guesses; weights are
/// `2 / ((1 - x^2) P_n'(x)^2)`. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(2..=64).contains(&n) {
        return Err(Error::GaussOrderOutOfRange { n });
    }
    // value and derivative of P_n by the three-term recurrence
    let legendre = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for k in 1..n {
            let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    };

    let mut nodes = vec![0.0; n];
    for (i, node) in nodes.iter_mut().enumerate() {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        *node = x;
    }
    nodes.sort_by(f64::total_cmp);
    // enforce exact symmetry about zero
    for i in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -s;
        nodes[n - 1 - i] = s;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (_, dp) = legendre(x);
            2.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    Ok((nodes, weights))
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (positive half).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_97,
    0.417_959_183_673_469_387_755_102_040_816_33,
];

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
    resabs: f64,
    depth: usize,
    seq: u64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.seq == other.seq
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // worst error first; ties broken by insertion order for determinism
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// QUADPACK-style sharpening of the raw `|K - G|` difference.
fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / resasc).powf(1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && floor > e {
        e = floor;
    }
    e
}

/// One Gauss-Kronrod 7/15 application on `[a, b]`. The real and imaginary
/// parts share the node set; the error estimate is the modulus of the
/// complex K-G difference.
fn gk15<F>(f: &mut F, a: f64, b: f64, depth: usize, seq: u64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut resabs = fc.norm() * WGK[7];
    let mut fv = [Complex64::default(); 14];
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx)?;
        let f2 = f(c + dx)?;
        fv[2 * i] = f1;
        fv[2 * i + 1] = f2;
        kron += WGK[i] * (f1 + f2);
        resabs += WGK[i] * (f1.norm() + f2.norm());
        if i % 2 == 1 {
            gauss += WG[(i - 1) / 2] * (f1 + f2);
        }
    }
    let mean = kron * 0.5;
    let mut resasc = WGK[7] * (fc - mean).norm();
    for i in 0..7 {
        resasc += WGK[i] * ((fv[2 * i] - mean).norm() + (fv[2 * i + 1] - mean).norm());
    }
    let err = ((kron - gauss) * h).norm();
    Ok(Panel {
        a,
        b,
        value: kron * h,
        err: rescale_error(err, resabs * h.abs(), resasc * h.abs()),
        resabs: resabs * h.abs(),
        depth,
        seq,
    })
}

const MAX_PANELS: usize = 200_000;
const MAX_EVALUATIONS: usize = 3_000_000;
/// Multiplier on `eps * integral of |f|` below which further refinement
/// only chases rounding noise in the panel sums.
const ROUNDOFF_FLOOR_FACTOR: f64 = 1000.0;

/// Globally adaptive integration of a complex-valued function on `[a, b]`.
///
/// The worst panel (by error estimate) is bisected until the summed
/// estimate satisfies `max(abs_tol, rel_tol * |value|)`, widened by a
/// roundoff floor proportional to `eps` times the integral of `|f|` - for
/// large oscillatory integrands an absolute tolerance below that floor is
/// not attainable in double precision, and the returned `error_estimate`
/// reports the level actually reached. Panels that hit `max_subdivisions`
/// or whose endpoints become adjacent floats are frozen as-is; if the
/// frozen error keeps the total above tolerance the run fails with
/// `ToleranceNotMet` rather than silently returning.
pub fn adaptive_integrate_1d<F>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let mut f = f;
    cfg.validate()?;
    if a == b {
        return Ok(IntegralResult {
            value: Complex64::default(),
            error_estimate: 0.0,
            evaluations: 0,
        });
    }

    let mut seq = 0u64;
    let mut evaluations = 0usize;
    let mut heap = BinaryHeap::new();
    let mut active_val = Complex64::default();
    let mut active_err = 0.0;
    let mut active_resabs = 0.0;
    let mut frozen_val = Complex64::default();
    let mut frozen_err = 0.0;
    let mut frozen_resabs = 0.0;

    let first = gk15(&mut f, a, b, 0, seq)?;
    evaluations += 15;
    active_val += first.value;
    active_err += first.err;
    active_resabs += first.resabs;
    heap.push(first);

    loop {
        let value = active_val + frozen_val;
        let err = active_err + frozen_err;
        let floor = ROUNDOFF_FLOOR_FACTOR * f64::EPSILON * (active_resabs + frozen_resabs);
        let tol = cfg
            .inner_abs_tol
            .max(cfg.inner_rel_tol * value.norm())
            .max(floor);
        if err <= tol {
            return Ok(IntegralResult {
                value,
                error_estimate: err,
                evaluations,
            });
        }
        // the frozen error alone being over budget, or a blown evaluation
        // budget, means no further splitting can succeed
        if frozen_err > tol || evaluations > MAX_EVALUATIONS {
            return Err(Error::ToleranceNotMet {
                value,
                error_estimate: err,
                evaluations,
            });
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::ToleranceNotMet {
                value,
                error_estimate: err,
                evaluations,
            });
        };
        active_val -= worst.value;
        active_err -= worst.err;
        active_resabs -= worst.resabs;
        let mid = 0.5 * (worst.a + worst.b);
        let splittable = worst.depth < cfg.max_subdivisions && mid > worst.a && mid < worst.b;
        if !splittable || heap.len() + 2 > MAX_PANELS {
            frozen_val += worst.value;
            frozen_err += worst.err;
            frozen_resabs += worst.resabs;
            continue;
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            seq += 1;
            let panel = gk15(&mut f, lo, hi, worst.depth + 1, seq)?;
            evaluations += 15;
            active_val += panel.value;
            active_err += panel.err;
            active_resabs += panel.resabs;
            heap.push(panel);
        }
    }
}

/// Surface integral of `F(phi', theta')` over the unit sphere via the
/// nested scheme: Gauss-Legendre in `zeta = cos(theta')` outside, adaptive
/// quadrature in `phi'` inside. Returns the plain integral (no `1/4pi`).
pub fn surface_integral_nested<F>(mut f: F, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: FnMut(f64, f64) -> Result<Complex64>,
{
    cfg.validate()?;
    let (nodes, weights) = gauss_legendre(cfg.n_gauss_zeta)?;
    let mut value = Complex64::default();
    let mut error_estimate = 0.0;
    let mut evaluations = 0usize;
    for (&zeta, &w) in nodes.iter().zip(&weights) {
        let theta = zeta.clamp(-1.0, 1.0).acos();
        let row = adaptive_integrate_1d(|phi| f(phi, theta), 0.0, 2.0 * PI, cfg)?;
        value += w * row.value;
        error_estimate += w * row.error_estimate;
        evaluations += row.evaluations;
    }
    Ok(IntegralResult {
        value,
        error_estimate,
        evaluations,
    })
}

/// A quadrature point on the unit sphere as seen by the rotated-frame
/// integrator: its spherical angles in the original frame, its unit
/// direction vector, its offset from the field-point direction the frame
/// was built around, and the squared chord `|offset|^2`.
///
/// `offset` and `chord2` are assembled from trigonometric differences in
/// the rotated coordinates, where the field point's position is known
/// exactly, so they keep full relative accuracy at separations the angle
/// or vector representations round away. Integrands that multiply a
/// singular kernel by smooth data should take the kernel argument from
/// `chord2` and, near the field point, rebuild coordinates from `offset`.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub phi: f64,
    pub theta: f64,
    pub dir: CartesianVec,
    /// `q - p_hat` with relative accuracy at any separation.
    pub offset: CartesianVec,
    pub chord2: f64,
}

/// Angular offset between the rotated pole and the field point direction.
const FRAME_POLE_OFFSET: f64 = 1.0;
/// Azimuth of the field point in the rotated frame. Both constants are
/// generic angles so the singular direction never lands on a bisection
/// midpoint or a quadrature node.
const FRAME_AZIMUTH: f64 = 0.8;

fn rotated_frame(p: &SphericalPoint) -> (CartesianVec, CartesianVec, CartesianVec) {
    let phat = p.unit();
    let e = if phat.z.abs() < 0.9 {
        CartesianVec::new(0.0, 0.0, 1.0)
    } else {
        CartesianVec::new(1.0, 0.0, 0.0)
    };
    let that = phat
        .cross(&e)
        .normalized()
        .expect("basis axis not parallel");
    let zp = phat
        .scale(FRAME_POLE_OFFSET.cos())
        .add(&that.scale(FRAME_POLE_OFFSET.sin()));
    let u = phat
        .sub(&zp.scale(phat.dot(&zp)))
        .normalized()
        .expect("pole offset keeps the frame non-degenerate");
    let v = zp.cross(&u);
    let xp = u
        .scale((-FRAME_AZIMUTH).cos())
        .add(&v.scale((-FRAME_AZIMUTH).sin()));
    let yp = zp.cross(&xp);
    (xp, yp, zp)
}

/// Fully adaptive surface integral in a rotated frame whose pole is moved
/// away from the direction of `p`. The integrand receives the full
/// [`SurfacePoint`]. Returns the plain integral (no `1/4pi`); the value is
/// rotation-invariant.
pub fn surface_integral_2d_rotated_dir<F>(
    mut f: F,
    p: &SphericalPoint,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult>
where
    F: FnMut(&SurfacePoint) -> Result<Complex64>,
{
    cfg.validate()?;
    let (xp, yp, zp) = rotated_frame(p);
    // the field point sits at (theta0, phi0) = (offset, azimuth) in the
    // rotated frame, exactly by construction
    let zeta0 = FRAME_POLE_OFFSET.cos();
    let s0 = FRAME_POLE_OFFSET.sin();
    let mut inner_evals = 0usize;
    let mut max_inner_err = 0.0f64;
    let outer = |zeta: f64, f: &mut F, evals: &mut usize, max_err: &mut f64| -> Result<Complex64> {
        let zeta = zeta.clamp(-1.0, 1.0);
        let theta_rot = zeta.acos();
        let (st, ct) = (theta_rot.sin(), theta_rot.cos());
        // sin(theta_rot) - s0, from the exact zeta difference
        let d_zeta = zeta - zeta0;
        let u = d_zeta * (zeta0 + zeta) / (s0 * s0);
        let d_sin = -s0 * u / (1.0 + (1.0 - u).max(0.0).sqrt());
        let row = adaptive_integrate_1d(
            |phi_rot: f64| {
                let (sp, cp) = (phi_rot.sin(), phi_rot.cos());
                let dir = xp.scale(st * cp).add(&yp.scale(st * sp)).add(&zp.scale(ct));
                let theta = dir.z.clamp(-1.0, 1.0).acos();
                let phi = normalize_phi(dir.y.atan2(dir.x));
                // offset from the field point via difference formulas:
                // every term is relatively accurate however small the gap
                let half = 0.5 * (phi_rot - FRAME_AZIMUTH);
                let mid = 0.5 * (phi_rot + FRAME_AZIMUTH);
                let d_cos_phi = -2.0 * half.sin() * mid.sin();
                let d_sin_phi = 2.0 * half.sin() * mid.cos();
                let dx = s0 * d_cos_phi + d_sin * cp;
                let dy = s0 * d_sin_phi + d_sin * sp;
                let chord2 = dx * dx + dy * dy + d_zeta * d_zeta;
                let offset = xp.scale(dx).add(&yp.scale(dy)).add(&zp.scale(d_zeta));
                f(&SurfacePoint {
                    phi,
                    theta,
                    dir,
                    offset,
                    chord2,
                })
            },
            0.0,
            2.0 * PI,
            cfg,
        )?;
        *evals += row.evaluations;
        *max_err = max_err.max(row.error_estimate);
        Ok(row.value)
    };
    let result = adaptive_integrate_1d(
        |zeta| outer(zeta, &mut f, &mut inner_evals, &mut max_inner_err),
        -1.0,
        1.0,
        cfg,
    )?;
    Ok(IntegralResult {
        value: result.value,
        // inner row errors integrate over a zeta-interval of length 2
        error_estimate: result.error_estimate + 2.0 * max_inner_err,
        evaluations: inner_evals,
    })
}

/// Angle-only variant of [`surface_integral_2d_rotated_dir`].
pub fn surface_integral_2d_rotated<F>(
    mut f: F,
    p: &SphericalPoint,
    cfg: &QuadratureConfig,
) -> Result<IntegralResult>
where
    F: FnMut(f64, f64) -> Result<Complex64>,
{
    surface_integral_2d_rotated_dir(|pt| f(pt.phi, pt.theta), p, cfg)
}
