//! Manufactured exact solutions for validation.
//!
//! Each model fixes a known exterior-harmonic correction `u`, giving the
//! exact potential `v = 1/r + eps u`, its gradient, and the boundary
//! intensity `h` defined by `(grad v . grad v)|_S = 1 + eps h`. Running
//! the cascade on `h` and comparing against `v` measures the solver
//! error exactly.

use std::sync::Arc;

use num_complex::Complex64;

use crate::harmonics::SphericalVector;
use crate::perturbation::{BoundaryData, BoundaryLabel};
use crate::sphere::SphericalPoint;

/// Which manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `v = 1/r + eps sin(t) e^{i p} / r^2` (degree-1 correction).
    Degree1,
    /// `v = 1/r - eps (5 / 2 r^5) sin(t)(7 cos^3 t - 3 cos t) e^{i p}`
    /// (degree-4 correction).
    Degree4,
}

#[derive(Debug, Clone, Copy)]
pub struct ExactModel {
    pub kind: ModelKind,
    pub epsilon: f64,
}

/// `g(t) = sin t (7 cos^3 t - 3 cos t)`; the degree-4 angular factor.
fn g4(theta: f64) -> f64 {
    let c = theta.cos();
    theta.sin() * (7.0 * c * c * c - 3.0 * c)
}

/// `g'(t) = 28 cos^4 t - 27 cos^2 t + 3`.
fn g4_dtheta(theta: f64) -> f64 {
    let c2 = theta.cos() * theta.cos();
    28.0 * c2 * c2 - 27.0 * c2 + 3.0
}

impl ExactModel {
    pub fn new(kind: ModelKind, epsilon: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        Self { kind, epsilon }
    }

    /// Exact potential at `p`.
    pub fn v_exact(&self, p: &SphericalPoint) -> Complex64 {
        let eps = self.epsilon;
        let monopole = Complex64::new(1.0 / p.r, 0.0);
        match self.kind {
            ModelKind::Degree1 => {
                monopole + eps * Complex64::from_polar(p.theta.sin(), p.phi) / p.r.powi(2)
            }
            ModelKind::Degree4 => {
                monopole - eps * 2.5 * Complex64::from_polar(1.0, p.phi) * g4(p.theta) / p.r.powi(5)
            }
        }
    }

    /// Exact gradient in the `(r_hat, theta_hat, phi_hat)` frame. Closed
    /// form; the `phi_hat` components stay finite at the poles because
    /// the `1/sin t` factor cancels analytically.
    pub fn grad_v_exact(&self, p: &SphericalPoint) -> SphericalVector {
        let eps = self.epsilon;
        let e_ip = Complex64::from_polar(1.0, p.phi);
        let i = Complex64::new(0.0, 1.0);
        let inv_r2 = Complex64::new(-1.0 / (p.r * p.r), 0.0);
        match self.kind {
            ModelKind::Degree1 => {
                let r3 = p.r.powi(3);
                SphericalVector::new(
                    inv_r2 - eps * 2.0 * p.theta.sin() * e_ip / r3,
                    eps * p.theta.cos() * e_ip / r3,
                    eps * i * e_ip / r3,
                )
            }
            ModelKind::Degree4 => {
                let r6 = p.r.powi(6);
                let c = p.theta.cos();
                let g_over_sin = 7.0 * c * c * c - 3.0 * c;
                SphericalVector::new(
                    inv_r2 + eps * 12.5 * g4(p.theta) * e_ip / r6,
                    -eps * 2.5 * g4_dtheta(p.theta) * e_ip / r6,
                    -eps * 2.5 * i * g_over_sin * e_ip / r6,
                )
            }
        }
    }

    /// Boundary intensity `h(phi, theta)` with
    /// `(grad v . grad v)|_S = 1 + eps h`.
    pub fn h_of(&self, phi: f64, theta: f64) -> Complex64 {
        let eps = self.epsilon;
        match self.kind {
            ModelKind::Degree1 => {
                let s = theta.sin();
                4.0 * Complex64::from_polar(s, phi)
                    + 3.0 * eps * Complex64::from_polar(s * s, 2.0 * phi)
            }
            ModelKind::Degree4 => {
                let g = g4(theta);
                let gp = g4_dtheta(theta);
                let c = theta.cos();
                let q = 7.0 * c * c * c - 3.0 * c;
                let e1 = Complex64::from_polar(1.0, phi);
                let e2 = Complex64::from_polar(1.0, 2.0 * phi);
                -25.0 * g * e1 + eps * 6.25 * e2 * (25.0 * g * g + gp * gp - q * q)
            }
        }
    }

    /// `h` as boundary data for the cascade.
    pub fn boundary_h(&self) -> BoundaryData {
        let model = *self;
        BoundaryData::new(BoundaryLabel::H, move |phi, theta| model.h_of(phi, theta))
    }
}

/// Builds `h` numerically from any exterior-harmonic correction `u`:
/// `h = ((grad(1/r + eps u) . grad(1/r + eps u))|_S - 1) / eps`, with the
/// gradient of `u` taken by central differences. A generic manufactured-
/// solution generator; also the independent check on the closed-form
/// `h_of` transcriptions.
pub fn h_numeric(
    u: Arc<dyn Fn(&SphericalPoint) -> Complex64 + Send + Sync>,
    epsilon: f64,
) -> BoundaryData {
    assert!(epsilon > 0.0, "epsilon must be positive");
    BoundaryData::new(BoundaryLabel::H, move |phi, theta| {
        let d = 1e-6;
        let at = |r: f64, phi: f64, theta: f64| u(&SphericalPoint::new(r, phi, theta));
        let ur = (at(1.0 + d, phi, theta) - at(1.0 - d, phi, theta)) / (2.0 * d);
        let ut = (at(1.0, phi, theta + d) - at(1.0, phi, theta - d)) / (2.0 * d);
        let st = theta.sin().max(1e-7);
        let up = (at(1.0, phi + d, theta) - at(1.0, phi - d, theta)) / (2.0 * d * st);
        let grad_v = SphericalVector::new(
            Complex64::new(-1.0, 0.0) + epsilon * ur,
            epsilon * ut,
            epsilon * up,
        );
        (grad_v.dot(&grad_v) - 1.0) / epsilon
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_points(n: usize) -> Vec<(f64, f64)> {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n)
            .map(|_| (2.0 * PI * next(), 0.05 + (PI - 0.1) * next()))
            .collect()
    }

    #[test]
    fn v_exact_anchor_values() {
        let m = ExactModel::new(ModelKind::Degree1, 1e-4);
        let v = m.v_exact(&SphericalPoint::new(1.0, 0.0, PI / 2.0));
        assert_abs_diff_eq!((v - c(1.0 + 1e-4, 0.0)).norm(), 0.0, epsilon = 1e-16);
        let v = m.v_exact(&SphericalPoint::new(1.0, 2.2, 0.0));
        assert_abs_diff_eq!((v - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-16);

        let m4 = ExactModel::new(ModelKind::Degree4, 1e-4);
        let v = m4.v_exact(&SphericalPoint::new(1.0, 0.0, PI / 2.0));
        assert_abs_diff_eq!((v - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn grad_anchor_values() {
        // the degree-1 gradient at (1, 0, pi/2)
        let m = ExactModel::new(ModelKind::Degree1, 1e-4);
        let g = m.grad_v_exact(&SphericalPoint::new(1.0, 0.0, PI / 2.0));
        assert_abs_diff_eq!((g.r - c(-1.0 - 2e-4, 0.0)).norm(), 0.0, epsilon = 1e-16);
        assert!(g.theta.norm() <= 1e-20);
        assert_abs_diff_eq!((g.phi - c(0.0, 1e-4)).norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = 1e-6;
        for kind in [ModelKind::Degree1, ModelKind::Degree4] {
            let m = ExactModel::new(kind, 1e-4);
            for &(phi, theta) in sample_points(12).iter() {
                for r in [1.0, 1.3, 2.7] {
                    let p = SphericalPoint::new(r, phi, theta);
                    let g = m.grad_v_exact(&p);
                    let vr = (m.v_exact(&SphericalPoint::new(r + d, phi, theta))
                        - m.v_exact(&SphericalPoint::new(r - d, phi, theta)))
                        / (2.0 * d);
                    let vt = (m.v_exact(&SphericalPoint::new(r, phi, theta + d))
                        - m.v_exact(&SphericalPoint::new(r, phi, theta - d)))
                        / (2.0 * d * r);
                    let vp = (m.v_exact(&SphericalPoint::new(r, phi + d, theta))
                        - m.v_exact(&SphericalPoint::new(r, phi - d, theta)))
                        / (2.0 * d * r * theta.sin());
                    assert!((g.r - vr).norm() <= 1e-8);
                    assert!((g.theta - vt).norm() <= 1e-8);
                    assert!((g.phi - vp).norm() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn h_anchor_values() {
        let m = ExactModel::new(ModelKind::Degree1, 1e-4);
        let h = m.h_of(0.0, PI / 2.0);
        assert_abs_diff_eq!((h - c(4.0 + 3e-4, 0.0)).norm(), 0.0, epsilon = 1e-16);

        // degree-4 model on the equator: h = (225/4) eps e^{2 i phi};
        // cos(pi/2) rounds to ~6e-17, leaving ~5e-15 in the linear term
        let m4 = ExactModel::new(ModelKind::Degree4, 1e-4);
        for phi in [0.0, 0.9, 2.4] {
            let h = m4.h_of(phi, PI / 2.0);
            let expect = 56.25 * 1e-4 * Complex64::from_polar(1.0, 2.0 * phi);
            assert!((h - expect).norm() <= 1e-13);
        }
    }

    #[test]
    fn defining_identity_grad_squared_is_one_plus_eps_h() {
        for kind in [ModelKind::Degree1, ModelKind::Degree4] {
            for eps in [1e-2, 1e-4] {
                let m = ExactModel::new(kind, eps);
                for &(phi, theta) in sample_points(50).iter() {
                    let g = m.grad_v_exact(&SphericalPoint::new(1.0, phi, theta));
                    let lhs = g.dot(&g);
                    let rhs = Complex64::new(1.0, 0.0) + eps * m.h_of(phi, theta);
                    assert!(
                        (lhs - rhs).norm() <= 1e-12,
                        "kind {kind:?} eps {eps} at ({phi}, {theta}): {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn v_exact_stays_near_monopole_for_small_eps() {
        for kind in [ModelKind::Degree1, ModelKind::Degree4] {
            let max_u = match kind {
                ModelKind::Degree1 => 1.0,
                ModelKind::Degree4 => 2.5 * 1.9, // |g4| peaks below 1.9
            };
            for eps in [1e-2, 1e-6] {
                let m = ExactModel::new(kind, eps);
                for &(phi, theta) in sample_points(20).iter() {
                    for r in [1.0, 2.0, 10.0] {
                        let p = SphericalPoint::new(r, phi, theta);
                        let dev = (m.v_exact(&p) - c(1.0 / r, 0.0)).norm();
                        assert!(dev <= eps * max_u);
                    }
                }
            }
        }
    }

    #[test]
    fn h_numeric_matches_closed_forms() {
        let eps = 1e-4;
        let u1 = Arc::new(|p: &SphericalPoint| {
            Complex64::from_polar(p.theta.sin(), p.phi) / p.r.powi(2)
        });
        let hn = h_numeric(u1, eps);
        let m = ExactModel::new(ModelKind::Degree1, eps);
        for &(phi, theta) in sample_points(20).iter() {
            assert!((hn.eval(phi, theta) - m.h_of(phi, theta)).norm() <= 1e-8);
        }

        let u4 = Arc::new(|p: &SphericalPoint| {
            -2.5 * Complex64::from_polar(1.0, p.phi) * g4(p.theta) / p.r.powi(5)
        });
        let hn = h_numeric(u4, eps);
        let m4 = ExactModel::new(ModelKind::Degree4, eps);
        for &(phi, theta) in sample_points(20).iter() {
            assert!((hn.eval(phi, theta) - m4.h_of(phi, theta)).norm() <= 1e-7);
        }

        let zero = h_numeric(Arc::new(|_: &SphericalPoint| Complex64::default()), eps);
        assert!(zero.eval(1.0, 1.0).norm() <= 1e-12);
    }

    #[test]
    fn degree4_trace_is_a_single_degree4_harmonic() {
        // fitting the degree-4 surface trace with an l<=4 basis must place
        // everything on the (4,1) term with coefficient -1
        use crate::harmonics::{fit_least_squares, HarmonicBasis};
        use crate::sphere::uv_grid_nodes;
        let basis = HarmonicBasis::with_lmax(4).unwrap();
        // 12 longitudes keep e^{+-4 i phi} distinguishable on the grid
        let mesh = uv_grid_nodes(12, 8, 1.0);
        let samples: Vec<Complex64> = mesh
            .nodes
            .iter()
            .map(|n| -2.5 * Complex64::from_polar(1.0, n.phi) * g4(n.theta))
            .collect();
        let fit = fit_least_squares(&mesh.nodes, &samples, &basis).unwrap();
        for (&(l, m), &a) in basis.terms().iter().zip(&fit.coeffs) {
            if (l, m) == (4, 1) {
                assert!((a - c(-1.0, 0.0)).norm() <= 1e-10);
            } else {
                assert!(a.norm() <= 1e-10, "({l},{m}) leaked {a}");
            }
        }
    }
}
