//! Second-kind Green's function for the exterior Neumann problem of the
//! unit sphere.
//!
//! For a field point `P` at radius `r >= 1` and a source point `Q` on the
//! unit sphere separated by the angle `gamma`,
//!
//! ```text
//! G(P, Q) = 2/s - ln[(1 + s - r cos g) / (r - r cos g)],
//! s = sqrt(1 + r^2 - 2 r cos g).
//! ```
//!
//! Internally the log argument is rewritten as `(s + r + 1)/(s + r - 1)`,
//! which is algebraically identical but does not cancel as `gamma -> 0`,
//! and `s` is built from the haversine of `gamma` so that `s` stays
//! accurate down to machine-scale separations. The kernel is singular only
//! for `r = 1`, `gamma = 0`; for `r > 1` the collinear direction is a
//! removable singularity with limit `2/(r-1) - ln(r/(r-1))`.

use crate::error::{Error, Result};
use crate::sphere::{haversine, CartesianVec, SphericalPoint};

/// What to do when `P` and `Q` coincide on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionBehavior {
    /// Signal that the mesh/quadrature combination placed a quadrature
    /// node on an evaluation node.
    Error,
    /// Return an infinite kernel value instead of failing.
    ReturnInfinite,
}

/// Policy for detecting and handling the collinear singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityPolicy {
    /// Angles at or below this threshold are treated as collinear.
    pub gamma_tol: f64,
    pub surface_collision: CollisionBehavior,
}

impl Default for SingularityPolicy {
    fn default() -> Self {
        Self {
            gamma_tol: 1e-8,
            surface_collision: CollisionBehavior::Error,
        }
    }
}

impl SingularityPolicy {
    pub fn new(gamma_tol: f64, surface_collision: CollisionBehavior) -> Self {
        assert!(gamma_tol > 0.0, "gamma_tol must be positive");
        Self {
            gamma_tol,
            surface_collision,
        }
    }
}

/// One kernel evaluation with its geometric by-products.
#[derive(Debug, Clone, Copy)]
pub struct KernelEval {
    pub value: f64,
    /// Angle between `OP` and `OQ`, in `[0, pi]`.
    pub gamma: f64,
    /// Chord-like distance `sqrt(1 + r^2 - 2 r cos gamma)`.
    pub s: f64,
    /// True when the collinear limit was substituted.
    pub regularized: bool,
}

const UNIT_SPHERE_TOL: f64 = 1e-12;

/// Evaluates the kernel for a field point `p` (any `r >= 1`) and a source
/// point `q` on the unit sphere.
pub fn green(
    p: &SphericalPoint,
    q: &SphericalPoint,
    policy: &SingularityPolicy,
) -> Result<KernelEval> {
    if (q.r - 1.0).abs() > UNIT_SPHERE_TOL {
        return Err(Error::QOffUnitSphere { r: q.r });
    }
    if p.r < 1.0 - UNIT_SPHERE_TOL {
        return Err(Error::RadiusNotExterior { r: p.r });
    }
    eval_from_hav(p.r.max(1.0), haversine(p, q), policy)
}

/// Kernel evaluation from unit direction vectors.
///
/// The haversine is taken from the Cartesian chord `|p_unit - q_unit|^2 / 4`,
/// which keeps tiny separations exact where recovering angles from rotated
/// Cartesian points would round them to zero.
pub fn green_dir(
    r: f64,
    p_unit: &CartesianVec,
    q_unit: &CartesianVec,
    policy: &SingularityPolicy,
) -> Result<KernelEval> {
    let d = q_unit.sub(p_unit);
    green_chord2(r, d.dot(&d), policy)
}

/// Kernel evaluation from the squared chord `|p_unit - q_unit|^2` between
/// the two directions. The rotated-frame surface integrator supplies this
/// quantity with full relative accuracy arbitrarily close to the field
/// point, where differencing rounded unit vectors would lose it.
pub fn green_chord2(r: f64, chord2: f64, policy: &SingularityPolicy) -> Result<KernelEval> {
    if r < 1.0 - UNIT_SPHERE_TOL {
        return Err(Error::RadiusNotExterior { r });
    }
    let hav = (chord2 / 4.0).clamp(0.0, 1.0);
    eval_from_hav(r.max(1.0), hav, policy)
}

fn eval_from_hav(r: f64, hav: f64, policy: &SingularityPolicy) -> Result<KernelEval> {
    let gamma = 2.0 * hav.sqrt().min(1.0).asin();
    let s = ((r - 1.0) * (r - 1.0) + 4.0 * r * hav).sqrt();
    if gamma <= policy.gamma_tol {
        if r > 1.0 + UNIT_SPHERE_TOL {
            return Ok(KernelEval {
                value: collinear_value(r),
                gamma,
                s,
                regularized: true,
            });
        }
        return match policy.surface_collision {
            CollisionBehavior::Error => Err(Error::SurfaceCollision { gamma }),
            CollisionBehavior::ReturnInfinite => Ok(KernelEval {
                value: f64::INFINITY,
                gamma,
                s,
                regularized: false,
            }),
        };
    }
    // (1 + s - r cos g)/(r - r cos g) == (s + r + 1)/(s + r - 1), using
    // s^2 - (r-1)^2 = 4 r hav and 1 - cos g = 2 hav.
    let value = 2.0 / s - ((s + r + 1.0) / (s + r - 1.0)).ln();
    Ok(KernelEval {
        value,
        gamma,
        s,
        regularized: false,
    })
}

fn collinear_value(r: f64) -> f64 {
    2.0 / (r - 1.0) - (r / (r - 1.0)).ln()
}

/// Limit of the kernel as `Q` approaches the direction of `P` for `r > 1`:
/// `2/(r-1) - ln(r/(r-1))`. Monotone decreasing, vanishing as `r -> inf`.
pub fn green_collinear_limit(r: f64) -> Result<f64> {
    if r <= 1.0 + UNIT_SPHERE_TOL {
        return Err(Error::RadiusNotExterior { r });
    }
    Ok(collinear_value(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::sph_to_cart;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn eval(p: &SphericalPoint, q: &SphericalPoint) -> KernelEval {
        green(p, q, &SingularityPolicy::default()).unwrap()
    }

    /// Direct transcription of the printed kernel formula; the independent
    /// route the stable rewrite is checked against.
    fn green_raw(r: f64, cos_g: f64) -> f64 {
        let s = (1.0 + r * r - 2.0 * r * cos_g).sqrt();
        2.0 / s - ((1.0 + s - r * cos_g) / (r - r * cos_g)).ln()
    }

    #[test]
    fn spot_values_match_direct_evaluation() {
        // P at the pole, Q on the equator: cos g = 0, s = sqrt(2)
        let k = eval(
            &SphericalPoint::new(1.0, 0.0, 0.0),
            &SphericalPoint::new(1.0, 0.0, PI / 2.0),
        );
        let expect = 2.0f64.sqrt() - (1.0 + 2.0f64.sqrt()).ln(); // 0.5328399753535521
        assert_abs_diff_eq!(k.value, expect, epsilon = 1e-14);
        assert_abs_diff_eq!(k.s, 2.0f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(k.gamma, PI / 2.0, epsilon = 1e-14);
        assert!(!k.regularized);

        // antipodal directions at r = 2: cos g = -1, s = 3
        let k = eval(
            &SphericalPoint::new(2.0, 0.0, PI / 2.0),
            &SphericalPoint::new(1.0, PI, PI / 2.0),
        );
        let expect = 2.0 / 3.0 - 1.5f64.ln(); // 0.2612015585585022
        assert_abs_diff_eq!(k.value, expect, epsilon = 1e-14);
        assert_abs_diff_eq!(k.s, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn stable_rewrite_matches_raw_formula_away_from_singularity() {
        for &r in &[1.0, 1.01, 1.5, 2.0, 10.0] {
            for &gamma in &[1e-3, 0.1, 1.0, 2.0, 3.0, PI] {
                let p = SphericalPoint::new(r, 0.0, PI / 2.0);
                let q = SphericalPoint::new(1.0, gamma, PI / 2.0);
                let k = eval(&p, &q);
                let raw = green_raw(r, gamma.cos());
                // the raw form itself cancels near gamma = 0, so compare
                // relative to the kernel magnitude
                assert!(
                    (k.value - raw).abs() <= 1e-9 * k.value.abs().max(1.0),
                    "r={r} gamma={gamma}: {} vs {raw}",
                    k.value
                );
            }
        }
    }

    #[test]
    fn collinear_direction_is_regularized_for_exterior_points() {
        let k = eval(
            &SphericalPoint::new(1.5, 0.0, 0.0),
            &SphericalPoint::new(1.0, 0.0, 0.0),
        );
        assert!(k.regularized);
        assert_abs_diff_eq!(k.value, 4.0 - 3.0f64.ln(), epsilon = 1e-14); // 2.9013877113318902
    }

    #[test]
    fn collinear_limit_values() {
        assert_abs_diff_eq!(
            green_collinear_limit(1.5).unwrap(),
            4.0 - 3.0f64.ln(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            green_collinear_limit(2.0).unwrap(),
            2.0 - 2.0f64.ln(),
            epsilon = 1e-14
        );
        assert!(green_collinear_limit(1e6).unwrap() < 3e-6);
        assert!(green_collinear_limit(1.0).is_err());
        assert!(green_collinear_limit(0.5).is_err());
    }

    #[test]
    fn collinear_limit_matches_richardson_extrapolated_kernel() {
        // Independent oracle: evaluate the raw printed formula at shrinking
        // angles and Richardson-extrapolate the leading gamma^2 error away.
        for &r in &[1.5, 2.0, 5.0] {
            let g1 = green_raw(r, (1e-3f64).cos());
            let g2 = green_raw(r, (1e-4f64).cos());
            let richardson = (100.0 * g2 - g1) / 99.0;
            // the expansion carries gamma^2 log gamma terms, so plain
            // gamma^2 extrapolation levels off around 1e-7
            assert_abs_diff_eq!(
                richardson,
                green_collinear_limit(r).unwrap(),
                epsilon = 1e-7
            );
            // plain convergence of the sequence toward the limit
            let l = green_collinear_limit(r).unwrap();
            assert!((g2 - l).abs() < (g1 - l).abs());
        }
    }

    #[test]
    fn limit_is_monotone_decreasing_in_radius() {
        let mut prev = f64::INFINITY;
        for &r in &[1.1, 1.5, 2.0, 5.0, 10.0, 100.0, 1e4] {
            let v = green_collinear_limit(r).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn kernel_decreases_in_radius_at_fixed_angle() {
        for &gamma in &[0.3, 1.0, 2.5] {
            let q = SphericalPoint::new(1.0, 0.0, PI / 2.0);
            let mut prev = f64::INFINITY;
            for &r in &[1.0, 1.2, 1.5, 2.0, 5.0, 20.0, 200.0] {
                let p = SphericalPoint::new(r, gamma, PI / 2.0);
                let v = eval(&p, &q).value;
                assert!(v < prev, "G must decrease in r (gamma={gamma}, r={r})");
                prev = v;
            }
            assert!(prev.abs() < 2e-2);
        }
    }

    #[test]
    fn surface_collision_policy() {
        let p = SphericalPoint::new(1.0, 1.0, 1.0);
        let q = SphericalPoint::new(1.0, 1.0, 1.0);
        match green(&p, &q, &SingularityPolicy::default()) {
            Err(Error::SurfaceCollision { .. }) => {}
            other => panic!("expected surface-collision error, got {other:?}"),
        }
        let policy = SingularityPolicy::new(1e-8, CollisionBehavior::ReturnInfinite);
        let k = green(&p, &q, &policy).unwrap();
        assert!(k.value.is_infinite());
    }

    #[test]
    fn source_point_must_sit_on_unit_sphere() {
        let p = SphericalPoint::new(2.0, 0.0, 1.0);
        let q = SphericalPoint::new(1.01, 0.0, 1.0);
        assert!(matches!(
            green(&p, &q, &SingularityPolicy::default()),
            Err(Error::QOffUnitSphere { .. })
        ));
    }

    #[test]
    fn value_depends_only_on_gamma() {
        // rotating both points by the same longitude offset changes nothing
        let policy = SingularityPolicy::default();
        for &dphi in &[0.0, 0.7, 2.9, 5.5] {
            let p = SphericalPoint::new(1.3, 0.4 + dphi, 1.1);
            let q = SphericalPoint::new(1.0, 1.9 + dphi, 2.3);
            let base = green(
                &SphericalPoint::new(1.3, 0.4, 1.1),
                &SphericalPoint::new(1.0, 1.9, 2.3),
                &policy,
            )
            .unwrap();
            let rotated = green(&p, &q, &policy).unwrap();
            assert_abs_diff_eq!(base.value, rotated.value, epsilon = 1e-13);
        }
    }

    #[test]
    fn chord_based_evaluation_agrees_with_angle_based() {
        let policy = SingularityPolicy::default();
        for &(r, pp, pt, qp, qt) in &[
            (1.0, 0.3, 1.2, 4.0, 2.2),
            (1.5, 0.0, 0.0, 1.0, 1.0),
            (10.0, 2.0, 2.0, 2.0, 2.2),
        ] {
            let p = SphericalPoint::new(r, pp, pt);
            let q = SphericalPoint::new(1.0, qp, qt);
            let by_angle = green(&p, &q, &policy).unwrap();
            let by_dir = green_dir(r, &p.unit(), &sph_to_cart(&q), &policy).unwrap();
            assert_abs_diff_eq!(by_angle.value, by_dir.value, epsilon = 1e-12);
            assert_abs_diff_eq!(by_angle.s, by_dir.s, epsilon = 1e-13);
        }
    }

    #[test]
    fn s_satisfies_its_definition() {
        for &(r, g) in &[(1.0, 0.5), (1.5, 1e-6), (2.0, 3.0), (7.0, 0.01)] {
            let p = SphericalPoint::new(r, 0.0, PI / 2.0);
            let q = SphericalPoint::new(1.0, g, PI / 2.0);
            let k = eval(&p, &q);
            let direct = (1.0 + r * r - 2.0 * r * k.gamma.cos()).sqrt();
            assert_abs_diff_eq!(k.s, direct, epsilon = 1e-12);
            assert!(k.s >= (r - 1.0).abs() - 1e-15);
        }
    }
}
