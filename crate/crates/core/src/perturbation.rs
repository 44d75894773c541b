//! Order-by-order solver: boundary-data recursion and the cascade.
//!
//! With `v = 1/r + eps u`, `f^2 = 1 + eps h`, and `u = u_1 + eps u_2 +
//! ...`, each `u_k` solves an exterior Neumann problem whose data is
//! built from the previous orders:
//!
//! ```text
//! B_1 = h / 2
//! B_2 = -(1/2) (grad u_1 . grad u_1)|_S
//! B_3 = -(grad u_1 . grad u_2)|_S
//! B_m = -(1/2) sum_{k+j=m} (grad u_k . grad u_j)|_S
//! ```
//!
//! On the surface, `grad u_k = -B_k r_hat + (tangential part of the
//! fitted expansion)`, with the inward normal so `du_k/dn = B_k`. The
//! squares are of complex sums, taken without conjugation. Each order is
//! then evaluated at the mesh nodes as `(1/4pi)` times the surface
//! integral of the kernel against its data.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::green::{green, SingularityPolicy};
use crate::harmonics::{
    fit_least_squares, grad_expansion_exterior, HarmonicBasis, HarmonicExpansion, SphericalVector,
    POLE_CLAMP,
};
use crate::quadrature::{surface_integral_nested, QuadratureConfig};
use crate::sphere::{SphericalPoint, SurfaceMesh};

/// Which quantity a boundary function represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryLabel {
    H,
    B1,
    B2,
    B3,
    Bn(u32),
}

/// A complex-valued function on the unit sphere, `(phi, theta) ->
/// value`. Finite at every off-pole point.
#[derive(Clone)]
pub struct BoundaryData {
    pub label: BoundaryLabel,
    f: Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>,
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryData")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl BoundaryData {
    pub fn new<F>(label: BoundaryLabel, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            label,
            f: Arc::new(f),
        }
    }

    pub fn zero(label: BoundaryLabel) -> Self {
        Self::new(label, |_, _| Complex64::default())
    }

    pub fn eval(&self, phi: f64, theta: f64) -> Complex64 {
        (self.f)(phi, theta)
    }
}

/// First-order data `B_1 = h / 2`.
pub fn b1_from_h(h: &BoundaryData) -> BoundaryData {
    let h = h.clone();
    BoundaryData::new(BoundaryLabel::B1, move |phi, theta| {
        0.5 * h.eval(phi, theta)
    })
}

/// Evaluates one Neumann solution at `p`: `(1/4pi)` times the nested
/// surface integral of the kernel against `bk`.
pub fn solve_uk_at(
    p: &SphericalPoint,
    bk: &BoundaryData,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    let policy = SingularityPolicy::default();
    let result = surface_integral_nested(
        |phi, theta| {
            let q = SphericalPoint::new(1.0, phi, theta);
            Ok(green(p, &q, &policy)?.value * bk.eval(phi, theta))
        },
        cfg,
    )?;
    Ok(result.value / (4.0 * std::f64::consts::PI))
}

/// Second-order data from the fit of `u_1`:
/// `B_2 = -h^2/8 - (1/2) T_1^2 - (1/(2 sin^2 t)) F_1^2`,
/// where `T_1`, `F_1` are the fitted tangential derivative sums.
pub fn b2_from_fit(h: &BoundaryData, exp1: &HarmonicExpansion) -> BoundaryData {
    let h = h.clone();
    let exp1 = exp1.clone();
    BoundaryData::new(BoundaryLabel::B2, move |phi, theta| {
        let hv = h.eval(phi, theta);
        let t1 = exp1.surface_dtheta(phi, theta);
        let f1 = exp1.surface_dphi(phi, theta);
        let s2 = theta.sin() * theta.sin();
        -hv * hv / 8.0 - 0.5 * t1 * t1 - f1 * f1 / (2.0 * s2)
    })
}

/// Third-order data:
/// `B_3 = -(1/2) h B_2 - T_1 T_2 - (1/sin^2 t) F_1 F_2`.
pub fn b3_from_fit(
    h: &BoundaryData,
    b2: &BoundaryData,
    exp1: &HarmonicExpansion,
    exp2: &HarmonicExpansion,
) -> BoundaryData {
    let h = h.clone();
    let b2 = b2.clone();
    let exp1 = exp1.clone();
    let exp2 = exp2.clone();
    BoundaryData::new(BoundaryLabel::B3, move |phi, theta| {
        let s2 = theta.sin() * theta.sin();
        -0.5 * h.eval(phi, theta) * b2.eval(phi, theta)
            - exp1.surface_dtheta(phi, theta) * exp2.surface_dtheta(phi, theta)
            - exp1.surface_dphi(phi, theta) * exp2.surface_dphi(phi, theta) / s2
    })
}

/// Surface gradient of `u_k` assembled from its boundary data and fitted
/// expansion: `-B_k r_hat + T_k theta_hat + (F_k / sin t) phi_hat`.
/// Independent of the expanded product formulas; used to cross-check the
/// data recursion term by term.
pub fn surface_gradient(
    bk: &BoundaryData,
    exp: &HarmonicExpansion,
    phi: f64,
    theta: f64,
) -> Result<SphericalVector> {
    let st = theta.sin();
    if st < POLE_CLAMP {
        return Err(Error::PoleEvaluation { theta });
    }
    Ok(SphericalVector::new(
        -bk.eval(phi, theta),
        exp.surface_dtheta(phi, theta),
        exp.surface_dphi(phi, theta) / st,
    ))
}

/// General-order data `B_m = -(1/2) sum_{k+j=m} (grad u_k . grad u_j)`,
/// over ordered pairs `(k, j)` with `k, j >= 1`; the equal-order square
/// appears once and keeps the half weight. Reduces to [`b2_from_fit`] at
/// `m = 2` and [`b3_from_fit`] at `m = 3`.
pub fn bn_general(
    b_list: &[BoundaryData],
    exp_list: &[HarmonicExpansion],
    m: usize,
) -> Result<BoundaryData> {
    if m < 2 {
        return Err(Error::OrderOutOfRange { order: m });
    }
    if b_list.len() < m - 1 || exp_list.len() < m - 1 {
        return Err(Error::MissingExpansion { order: m });
    }
    let b_list = b_list[..m - 1].to_vec();
    let exp_list = exp_list[..m - 1].to_vec();
    Ok(BoundaryData::new(
        BoundaryLabel::Bn(m as u32),
        move |phi, theta| {
            let s2 = theta.sin() * theta.sin();
            let mut total = Complex64::default();
            for k in 1..m {
                let j = m - k;
                let bk = b_list[k - 1].eval(phi, theta);
                let bj = b_list[j - 1].eval(phi, theta);
                let tk = exp_list[k - 1].surface_dtheta(phi, theta);
                let tj = exp_list[j - 1].surface_dtheta(phi, theta);
                let fk = exp_list[k - 1].surface_dphi(phi, theta);
                let fj = exp_list[j - 1].surface_dphi(phi, theta);
                total += bk * bj + tk * tj + fk * fj / s2;
            }
            -0.5 * total
        },
    ))
}

/// Everything the cascade produced.
#[derive(Debug, Clone)]
pub struct PerturbationSolution {
    pub epsilon: f64,
    pub order: usize,
    pub mesh: SurfaceMesh,
    /// `u_values[k-1][i]` is `u_k` at node `i`.
    pub u_values: Vec<Vec<Complex64>>,
    /// Fitted expansion per order; the final order is fitted too so the
    /// gradient can use the full approximation.
    pub expansions: Vec<HarmonicExpansion>,
    /// Boundary data per order.
    pub boundary_data: Vec<BoundaryData>,
    /// `v_values[k-1][i]` is `v_k = 1/r + sum_{j<=k} eps^j u_j` at node `i`.
    pub v_values: Vec<Vec<Complex64>>,
}

impl PerturbationSolution {
    /// `v_n` at a node for the highest computed order.
    pub fn v_final(&self, node: usize) -> Complex64 {
        self.v_values[self.order - 1][node]
    }

    /// Fit residual norms per order.
    pub fn fit_residuals(&self) -> Vec<f64> {
        self.expansions.iter().map(|e| e.residual_norm).collect()
    }

    /// Reconstructed potential from the monopole plus the fitted
    /// expansions, evaluable anywhere in the exterior.
    pub fn v_from_expansions(&self, p: &SphericalPoint) -> Complex64 {
        let mut v = Complex64::new(1.0 / p.r, 0.0);
        for (k, exp) in self.expansions.iter().enumerate() {
            v +=
                self.epsilon.powi(k as i32 + 1) * crate::harmonics::eval_expansion_exterior(exp, p);
        }
        v
    }
}

const MAX_ORDER: usize = 6;

/// Runs the cascade: `B_1 -> u_1(nodes) -> fit -> B_2 -> ...` up to the
/// requested order, assembling `v_k` along the way.
pub fn run_cascade(
    h: &BoundaryData,
    mesh: &SurfaceMesh,
    epsilon: f64,
    order: usize,
    cfg: &QuadratureConfig,
    basis: &HarmonicBasis,
) -> Result<PerturbationSolution> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::OrderOutOfRange { order });
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    if mesh.is_empty() {
        return Err(Error::Config("mesh has no nodes".into()));
    }

    let mut boundary_data: Vec<BoundaryData> = Vec::with_capacity(order);
    let mut expansions: Vec<HarmonicExpansion> = Vec::with_capacity(order);
    let mut u_values: Vec<Vec<Complex64>> = Vec::with_capacity(order);
    let mut v_values: Vec<Vec<Complex64>> = Vec::with_capacity(order);

    for k in 1..=order {
        let bk = match k {
            1 => b1_from_h(h),
            2 => b2_from_fit(h, &expansions[0]),
            3 => b3_from_fit(h, &boundary_data[1], &expansions[0], &expansions[1]),
            _ => bn_general(&boundary_data, &expansions, k)?,
        };
        let uk: Vec<Complex64> = mesh
            .nodes
            .par_iter()
            .map(|node| solve_uk_at(node, &bk, cfg))
            .collect::<Result<_>>()?;
        let exp = fit_least_squares(&mesh.nodes, &uk, basis)?;

        let vk: Vec<Complex64> = mesh
            .nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let prev = if k == 1 {
                    Complex64::new(1.0 / node.r, 0.0)
                } else {
                    v_values[k - 2][i]
                };
                prev + epsilon.powi(k as i32) * uk[i]
            })
            .collect();

        boundary_data.push(bk);
        expansions.push(exp);
        u_values.push(uk);
        v_values.push(vk);
    }

    Ok(PerturbationSolution {
        epsilon,
        order,
        mesh: mesh.clone(),
        u_values,
        expansions,
        boundary_data,
        v_values,
    })
}

/// How to compute the gradient of the assembled approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    /// Analytic gradient of the monopole plus the fitted exterior
    /// expansions.
    Expansion,
    /// Central differences of the same reconstruction, with the metric
    /// factors `1/r` and `1/(r sin t)`.
    FiniteDifference,
}

/// Gradient of `v_n` at `p` in the `(r_hat, theta_hat, phi_hat)` frame.
pub fn gradient_v(
    sol: &PerturbationSolution,
    p: &SphericalPoint,
    method: GradientMethod,
) -> Result<SphericalVector> {
    match method {
        GradientMethod::Expansion => {
            let mut g = SphericalVector::new(
                Complex64::new(-1.0 / (p.r * p.r), 0.0),
                Complex64::default(),
                Complex64::default(),
            );
            for (k, exp) in sol.expansions.iter().enumerate() {
                let gk = grad_expansion_exterior(exp, p)?;
                g = g.add(&gk.scale(sol.epsilon.powi(k as i32 + 1).into()));
            }
            Ok(g)
        }
        GradientMethod::FiniteDifference => {
            let dr = 1e-6 * p.r;
            let da = 1e-6;
            if p.theta < 1.1 * da || p.theta > std::f64::consts::PI - 1.1 * da {
                return Err(Error::PoleEvaluation { theta: p.theta });
            }
            let v = |r: f64, phi: f64, theta: f64| {
                sol.v_from_expansions(&SphericalPoint::new(r, phi, theta))
            };
            let gr = (v(p.r + dr, p.phi, p.theta) - v(p.r - dr, p.phi, p.theta)) / (2.0 * dr);
            let gt = (v(p.r, p.phi, p.theta + da) - v(p.r, p.phi, p.theta - da)) / (2.0 * da * p.r);
            let gp = (v(p.r, p.phi + da, p.theta) - v(p.r, p.phi - da, p.theta))
                / (2.0 * da * p.r * p.theta.sin());
            Ok(SphericalVector::new(gr, gt, gp))
        }
    }
}

/// Cartesian gradient of `v_n` at `p`, defined everywhere including the
/// poles.
///
/// Off the poles this is [`gradient_v`] rotated into the global frame. At
/// a pole the local `(theta_hat, phi_hat)` frame degenerates, but the
/// Cartesian gradient of each expansion term has a finite limit: only
/// `m = 0` terms contribute along the axis and only `|m| = 1` terms
/// contribute transversally, through `P_l'(+-1) = (+-1)^(l+1) l(l+1)/2`.
pub fn cartesian_field(sol: &PerturbationSolution, p: &SphericalPoint) -> [Complex64; 3] {
    let near_pole = p.theta.sin() < POLE_CLAMP;
    if !near_pole {
        let g =
            gradient_v(sol, p, GradientMethod::Expansion).expect("pole guard handled separately");
        return g.to_cartesian(p.phi, p.theta);
    }
    let sigma = if p.theta < 1.0 { 1.0 } else { -1.0 };
    let r = p.r;
    let mut g = [
        Complex64::default(),
        Complex64::default(),
        Complex64::new(-sigma / (r * r), 0.0),
    ];
    for (k, exp) in sol.expansions.iter().enumerate() {
        let scale = sol.epsilon.powi(k as i32 + 1);
        for (&(l, m), &a) in exp.basis.terms().iter().zip(&exp.coeffs) {
            let decay = r.powi(l as i32 + 2);
            match m {
                0 => {
                    // P_l(+1) = 1, P_l(-1) = (-1)^l
                    let pl_pole = if sigma > 0.0 || l % 2 == 0 { 1.0 } else { -1.0 };
                    g[2] += scale * a * (-sigma * (l + 1) as f64) * pl_pole / decay;
                }
                1 | -1 => {
                    let dpl = 0.5
                        * (l * (l + 1)) as f64
                        * if sigma > 0.0 || l % 2 == 1 { 1.0 } else { -1.0 };
                    g[0] += scale * a * dpl / decay;
                    g[1] += scale * a * Complex64::new(0.0, m as f64) * dpl / decay;
                }
                _ => {} // |m| >= 2 terms vanish quadratically at the poles
            }
        }
    }
    g
}
