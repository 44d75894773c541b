//! Surface-harmonic basis, least-squares fitting, and exterior extension.
//!
//! Basis functions are the unnormalized complex surface harmonics
//! `w_{l,m}(phi, theta) = P_l^{|m|}(cos theta) e^{i m phi}` without the
//! Condon-Shortley sign, so the `(1,1)` term is exactly
//! `sin(theta) e^{i phi}`. The default basis holds the eight functions
//! with `l` in `{1, 2}`; `l = 0` is excluded because a decaying potential
//! with a monopole correction would alter the dominant `1/r` term that
//! the perturbation is built around. A degree-`l` term extends into the
//! exterior as `w_{l,m} / r^(l+1)`, which is harmonic and vanishes at
//! infinity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sphere::{CartesianVec, SphericalPoint};

/// Associated Legendre `P_l^m(cos theta)` (no Condon-Shortley sign) and
/// its analytic theta-derivative, by upward recurrence in `l`. The
/// derivative recurrences avoid any division by `sin theta`, so pole
/// evaluations are exact.
pub fn assoc_legendre_theta(l: u32, m: u32, theta: f64) -> (f64, f64) {
    assert!(m <= l, "order must satisfy m <= l");
    let (s, c) = (theta.sin(), theta.cos());

    // seed: P_m^m = (2m-1)!! s^m
    let mut dfact = 1.0;
    for k in 1..=m {
        dfact *= (2 * k - 1) as f64;
    }
    let (mut p_prev, mut dp_prev) = if m == 0 {
        (1.0, 0.0)
    } else {
        (
            dfact * s.powi(m as i32),
            dfact * m as f64 * s.powi(m as i32 - 1) * c,
        )
    };
    if l == m {
        return (p_prev, dp_prev);
    }

    // P_{m+1}^m = (2m+1) c P_m^m
    let k = (2 * m + 1) as f64;
    let mut p = k * c * p_prev;
    let mut dp = k * (-s * p_prev + c * dp_prev);
    for ll in (m + 2)..=l {
        let a = (2 * ll - 1) as f64;
        let b = (ll - 1 + m) as f64;
        let d = (ll - m) as f64;
        let p_next = (a * c * p - b * p_prev) / d;
        let dp_next = (a * (-s * p + c * dp) - b * dp_prev) / d;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (p, dp)
}

fn check_term(l: u32, m: i32) -> Result<()> {
    if m.unsigned_abs() > l {
        return Err(Error::BasisTermInvalid { l, m });
    }
    Ok(())
}

/// `m`-th derivative of the Legendre polynomial `P_l` at `z`, by
/// differentiating the three-term recurrence.
fn legendre_derivative(l: u32, m: u32, z: f64) -> f64 {
    // table[j] holds d^j P_k / dz^j for the current k
    let mm = m as usize;
    let mut prev = vec![0.0f64; mm + 1];
    let mut cur = vec![0.0f64; mm + 1];
    prev[0] = 1.0; // P_0
    if l == 0 {
        return prev[mm];
    }
    cur[0] = z; // P_1
    if mm >= 1 {
        cur[1] = 1.0;
    }
    for k in 1..l {
        let mut next = vec![0.0f64; mm + 1];
        let a = (2 * k + 1) as f64;
        let b = k as f64;
        let d = (k + 1) as f64;
        for j in 0..=mm {
            let lower = if j > 0 { cur[j - 1] } else { 0.0 };
            next[j] = (a * (z * cur[j] + j as f64 * lower) - b * prev[j]) / d;
        }
        prev = cur;
        cur = next;
    }
    cur[mm]
}

/// The surface harmonic evaluated from a point's Cartesian coordinates:
/// `w_{l,m} = (d^{|m|} P_l / dz^{|m|})(z) * (x + i sign(m) y)^{|m|}`,
/// identical to [`eval_surface_harmonic`] on the unit sphere.
///
/// Because this form is polynomial in `(x, y, z)`, it keeps full relative
/// accuracy near the poles, where recovering `sin(theta)` and the
/// longitude from a unit vector collapses; singular-kernel integrands
/// multiply exactly those values by something large.
pub fn eval_surface_harmonic_cartesian(l: u32, m: i32, v: &CartesianVec) -> Result<Complex64> {
    check_term(l, m)?;
    let q = legendre_derivative(l, m.unsigned_abs(), v.z);
    let transverse = Complex64::new(v.x, if m >= 0 { v.y } else { -v.y });
    Ok(q * transverse.powu(m.unsigned_abs()))
}

/// `w_{l,m}(phi, theta) = P_l^{|m|}(cos theta) e^{i m phi}`.
pub fn eval_surface_harmonic(l: u32, m: i32, phi: f64, theta: f64) -> Result<Complex64> {
    check_term(l, m)?;
    let (p, _) = assoc_legendre_theta(l, m.unsigned_abs(), theta);
    Ok(p * Complex64::from_polar(1.0, m as f64 * phi))
}

/// Analytic `d w_{l,m} / d theta`.
pub fn eval_dtheta(l: u32, m: i32, phi: f64, theta: f64) -> Result<Complex64> {
    check_term(l, m)?;
    let (_, dp) = assoc_legendre_theta(l, m.unsigned_abs(), theta);
    Ok(dp * Complex64::from_polar(1.0, m as f64 * phi))
}

/// `d w_{l,m} / d phi = i m w_{l,m}`.
pub fn eval_dphi(l: u32, m: i32, phi: f64, theta: f64) -> Result<Complex64> {
    Ok(Complex64::new(0.0, m as f64) * eval_surface_harmonic(l, m, phi, theta)?)
}

/// Ordered list of `(l, m)` terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonicBasis {
    terms: Vec<(u32, i32)>,
}

impl Default for HarmonicBasis {
    /// The eight harmonics with `l` in `{1, 2}`, all orders.
    fn default() -> Self {
        Self::with_lmax(2).expect("default basis degree is valid")
    }
}

impl HarmonicBasis {
    /// All `(l, m)` with `1 <= l <= lmax`.
    pub fn with_lmax(lmax: u32) -> Result<Self> {
        if !(1..=4).contains(&lmax) {
            return Err(Error::BasisDegreeUnsupported { lmax });
        }
        let mut terms = Vec::new();
        for l in 1..=lmax {
            for m in -(l as i32)..=(l as i32) {
                terms.push((l, m));
            }
        }
        Ok(Self { terms })
    }

    pub fn from_terms(terms: Vec<(u32, i32)>) -> Result<Self> {
        for (i, &(l, m)) in terms.iter().enumerate() {
            check_term(l, m)?;
            if terms[..i].contains(&(l, m)) {
                return Err(Error::DuplicateBasisTerm { l, m });
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(u32, i32)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Fitted coefficients over a [`HarmonicBasis`].
#[derive(Debug, Clone)]
pub struct HarmonicExpansion {
    pub basis: HarmonicBasis,
    pub coeffs: Vec<Complex64>,
    /// 2-norm of the fit residual at the fit nodes.
    pub residual_norm: f64,
    /// Ratio of the largest to smallest pivot of the factorized design
    /// matrix; a cheap condition-number estimate.
    pub condition_estimate: f64,
}

impl HarmonicExpansion {
    /// Expansion with all coefficients zero.
    pub fn zero(basis: HarmonicBasis) -> Self {
        let coeffs = vec![Complex64::default(); basis.len()];
        Self {
            basis,
            coeffs,
            residual_norm: 0.0,
            condition_estimate: 1.0,
        }
    }

    /// Surface trace `sum_k a_k w_k(phi, theta)` at `r = 1`.
    pub fn surface_value(&self, phi: f64, theta: f64) -> Complex64 {
        self.basis
            .terms()
            .iter()
            .zip(&self.coeffs)
            .map(|(&(l, m), &a)| a * eval_surface_harmonic(l, m, phi, theta).expect("valid term"))
            .sum()
    }

    /// `sum_k a_k d w_k / d theta` on the surface.
    pub fn surface_dtheta(&self, phi: f64, theta: f64) -> Complex64 {
        self.basis
            .terms()
            .iter()
            .zip(&self.coeffs)
            .map(|(&(l, m), &a)| a * eval_dtheta(l, m, phi, theta).expect("valid term"))
            .sum()
    }

    /// `sum_k a_k d w_k / d phi` on the surface.
    pub fn surface_dphi(&self, phi: f64, theta: f64) -> Complex64 {
        self.basis
            .terms()
            .iter()
            .zip(&self.coeffs)
            .map(|(&(l, m), &a)| a * eval_dphi(l, m, phi, theta).expect("valid term"))
            .sum()
    }

    /// Inward-normal derivative of the exterior extension on the unit
    /// sphere: each degree-`l` term decays like `r^-(l+1)`, so
    /// `du/dn = -du/dr|_{r=1} = sum_k (l_k + 1) a_k w_k`.
    pub fn surface_normal_derivative(&self, phi: f64, theta: f64) -> Complex64 {
        self.basis
            .terms()
            .iter()
            .zip(&self.coeffs)
            .map(|(&(l, m), &a)| {
                ((l + 1) as f64) * a * eval_surface_harmonic(l, m, phi, theta).expect("valid term")
            })
            .sum()
    }
}

/// A complex 3-vector in the local orthonormal frame `(r_hat, theta_hat,
/// phi_hat)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphericalVector {
    pub r: Complex64,
    pub theta: Complex64,
    pub phi: Complex64,
}

impl SphericalVector {
    pub fn new(r: Complex64, theta: Complex64, phi: Complex64) -> Self {
        Self { r, theta, phi }
    }

    /// Formal (non-conjugating) dot product; the boundary-data recursion
    /// squares complex sums directly.
    pub fn dot(&self, other: &Self) -> Complex64 {
        self.r * other.r + self.theta * other.theta + self.phi * other.phi
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(k * self.r, k * self.theta, k * self.phi)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.r + other.r,
            self.theta + other.theta,
            self.phi + other.phi,
        )
    }

    /// Components in the global Cartesian frame for a vector anchored at
    /// `(phi, theta)`.
    pub fn to_cartesian(&self, phi: f64, theta: f64) -> [Complex64; 3] {
        let (st, ct) = (theta.sin(), theta.cos());
        let (sp, cp) = (phi.sin(), phi.cos());
        [
            self.r * (st * cp) + self.theta * (ct * cp) - self.phi * sp,
            self.r * (st * sp) + self.theta * (ct * sp) + self.phi * cp,
            self.r * ct - self.theta * st,
        ]
    }
}

/// Design-matrix entry for a node: the exterior extension
/// `w_{l,m}(phi, theta) / r^(l+1)`. Nodes on the unit sphere reduce to
/// the plain surface harmonic.
fn design_entry(l: u32, m: i32, node: &SphericalPoint) -> Complex64 {
    eval_surface_harmonic(l, m, node.phi, node.theta).expect("valid term")
        / node.r.powi(l as i32 + 1)
}

/// Least-squares fit of sampled values against the basis, by
/// column-pivoted Householder QR. Deterministic; minimizes the 2-norm
/// residual. Samples taken at exterior nodes are fitted with the
/// radially decayed basis so a single run handles any mesh radius.
pub fn fit_least_squares(
    nodes: &[SphericalPoint],
    samples: &[Complex64],
    basis: &HarmonicBasis,
) -> Result<HarmonicExpansion> {
    let m_rows = nodes.len();
    let n_cols = basis.len();
    assert_eq!(m_rows, samples.len(), "one sample per node");
    if m_rows < n_cols {
        return Err(Error::NotEnoughNodes {
            nodes: m_rows,
            terms: n_cols,
        });
    }

    let mut a: Vec<Vec<Complex64>> = nodes
        .iter()
        .map(|node| {
            basis
                .terms()
                .iter()
                .map(|&(l, m)| design_entry(l, m, node))
                .collect()
        })
        .collect();
    let mut b: Vec<Complex64> = samples.to_vec();
    let mut perm: Vec<usize> = (0..n_cols).collect();
    let mut diag = vec![0.0f64; n_cols];

    for k in 0..n_cols {
        // column pivoting on remaining column norms
        let (pivot, _) = (k..n_cols)
            .map(|j| {
                let norm2: f64 = (k..m_rows).map(|i| a[i][j].norm_sqr()).sum();
                (j, norm2)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty column range");
        if pivot != k {
            for row in a.iter_mut() {
                row.swap(k, pivot);
            }
            perm.swap(k, pivot);
        }

        // Householder reflector annihilating column k below the diagonal
        let col_norm = ((k..m_rows).map(|i| a[i][k].norm_sqr()).sum::<f64>()).sqrt();
        diag[k] = col_norm;
        if col_norm == 0.0 {
            continue;
        }
        let akk = a[k][k];
        let alpha = if akk.norm() == 0.0 {
            Complex64::new(-col_norm, 0.0)
        } else {
            -(akk / akk.norm()) * col_norm
        };
        let mut v: Vec<Complex64> = (k..m_rows).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let v_norm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if v_norm2 > 0.0 {
            #[allow(clippy::needless_range_loop)]
            for j in k..n_cols {
                let proj: Complex64 = (k..m_rows).map(|i| v[i - k].conj() * a[i][j]).sum();
                let f = 2.0 * proj / v_norm2;
                for i in k..m_rows {
                    a[i][j] -= f * v[i - k];
                }
            }
            let proj: Complex64 = (k..m_rows).map(|i| v[i - k].conj() * b[i]).sum();
            let f = 2.0 * proj / v_norm2;
            for i in k..m_rows {
                b[i] -= f * v[i - k];
            }
        }
        a[k][k] = alpha;
    }

    let dmax = diag.iter().cloned().fold(0.0f64, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_estimate = if dmin > 0.0 {
        dmax / dmin
    } else {
        f64::INFINITY
    };
    if condition_estimate.is_nan() || condition_estimate >= 1e12 {
        return Err(Error::RankDeficientFit {
            cond: condition_estimate,
        });
    }

    // back substitution on the triangular factor
    let mut x = vec![Complex64::default(); n_cols];
    for k in (0..n_cols).rev() {
        let mut s = b[k];
        for j in (k + 1)..n_cols {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    let mut coeffs = vec![Complex64::default(); n_cols];
    for (k, &p) in perm.iter().enumerate() {
        coeffs[p] = x[k];
    }
    let residual_norm = (n_cols..m_rows)
        .map(|i| b[i].norm_sqr())
        .sum::<f64>()
        .sqrt();

    Ok(HarmonicExpansion {
        basis: basis.clone(),
        coeffs,
        residual_norm,
        condition_estimate,
    })
}

/// Pole guard for gradient components carrying `1/sin(theta)`.
pub const POLE_CLAMP: f64 = 1e-7;

/// Exterior value `sum_k a_k w_k(phi, theta) / r^(l_k + 1)`.
pub fn eval_expansion_exterior(exp: &HarmonicExpansion, p: &SphericalPoint) -> Complex64 {
    exp.basis
        .terms()
        .iter()
        .zip(&exp.coeffs)
        .map(|(&(l, m), &a)| a * design_entry(l, m, p))
        .sum()
}

/// Gradient of the exterior extension in the `(r_hat, theta_hat,
/// phi_hat)` frame. Fails within [`POLE_CLAMP`] of a pole, where the
/// `phi_hat` component divides by `sin(theta)`.
pub fn grad_expansion_exterior(
    exp: &HarmonicExpansion,
    p: &SphericalPoint,
) -> Result<SphericalVector> {
    let st = p.theta.sin();
    if st < POLE_CLAMP {
        return Err(Error::PoleEvaluation { theta: p.theta });
    }
    let mut grad = SphericalVector::default();
    for (&(l, m), &a) in exp.basis.terms().iter().zip(&exp.coeffs) {
        let w = eval_surface_harmonic(l, m, p.phi, p.theta).expect("valid term");
        let dw = eval_dtheta(l, m, p.phi, p.theta).expect("valid term");
        let decay = p.r.powi(l as i32 + 2);
        grad.r += a * w * (-((l + 1) as f64)) / decay;
        grad.theta += a * dw / decay;
        grad.phi += a * w * Complex64::new(0.0, m as f64) / (decay * st);
    }
    Ok(grad)
}
