//! Python bindings for the backus solver: meshes, the exterior Neumann
//! kernel, surface harmonics, and the perturbation cascade.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use backus_core::error::Error;
use backus_core::green as green_kernel;
use backus_core::green::SingularityPolicy;
use backus_core::harmonics::{self, HarmonicBasis};
use backus_core::models::{ExactModel, ModelKind};
use backus_core::perturbation::{self, GradientMethod, PerturbationSolution};
use backus_core::quadrature;
use backus_core::sphere::{self, SphericalPoint};

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Config(_)
        | Error::GaussOrderOutOfRange { .. }
        | Error::BasisTermInvalid { .. }
        | Error::DuplicateBasisTerm { .. }
        | Error::BasisDegreeUnsupported { .. }
        | Error::OrderOutOfRange { .. }
        | Error::NotEnoughNodes { .. } => PyValueError::new_err(err.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_model(model: &str, epsilon: f64) -> PyResult<ExactModel> {
    let kind = match model {
        "degree1" => ModelKind::Degree1,
        "degree4" => ModelKind::Degree4,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown model `{other}` (expected degree1 or degree4)"
            )))
        }
    };
    if epsilon <= 0.0 {
        return Err(PyValueError::new_err("epsilon must be positive"));
    }
    Ok(ExactModel::new(kind, epsilon))
}

/// A node set on a sphere.
#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: sphere::SurfaceMesh,
}

#[pymethods]
impl PyMesh {
    /// The twelve icosahedron vertices.
    #[staticmethod]
    fn icosahedron(radius: f64) -> PyResult<Self> {
        if radius <= 0.0 {
            return Err(PyValueError::new_err("radius must be positive"));
        }
        Ok(Self {
            inner: sphere::icosahedron_nodes(radius),
        })
    }

    /// Longitude/co-latitude grid with the poles excluded.
    #[staticmethod]
    fn uv_grid(n_phi: usize, n_theta: usize, radius: f64) -> PyResult<Self> {
        if n_phi < 2 || n_theta < 2 || radius <= 0.0 {
            return Err(PyValueError::new_err(
                "need n_phi >= 2, n_theta >= 2, radius > 0",
            ));
        }
        Ok(Self {
            inner: sphere::uv_grid_nodes(n_phi, n_theta, radius),
        })
    }

    /// Plain-text triangle mesh, radially projected onto the radius.
    #[staticmethod]
    fn from_file(path: &str, radius: f64) -> PyResult<Self> {
        sphere::load_triangle_mesh(path, radius)
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    /// Node coordinates as `(r, phi, theta)` tuples.
    fn nodes(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .nodes
            .iter()
            .map(|n| (n.r, n.phi, n.theta))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Quadrature settings for the surface integrals.
#[pyclass(name = "QuadratureConfig", from_py_object)]
#[derive(Clone)]
struct PyQuadratureConfig {
    inner: quadrature::QuadratureConfig,
}

#[pymethods]
impl PyQuadratureConfig {
    #[new]
    #[pyo3(signature = (n_gauss_zeta=5, inner_abs_tol=1e-10, inner_rel_tol=1e-8, max_subdivisions=50))]
    fn new(
        n_gauss_zeta: usize,
        inner_abs_tol: f64,
        inner_rel_tol: f64,
        max_subdivisions: usize,
    ) -> Self {
        Self {
            inner: quadrature::QuadratureConfig {
                n_gauss_zeta,
                inner_abs_tol,
                inner_rel_tol,
                max_subdivisions,
            },
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "QuadratureConfig(n_gauss_zeta={}, inner_abs_tol={}, inner_rel_tol={}, max_subdivisions={})",
            self.inner.n_gauss_zeta,
            self.inner.inner_abs_tol,
            self.inner.inner_rel_tol,
            self.inner.max_subdivisions
        )
    }
}

/// Result of a cascade run.
#[pyclass(name = "Solution")]
struct PySolution {
    inner: PerturbationSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn order(&self) -> usize {
        self.inner.order
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    /// `u_k` at every node for one order (1-based).
    fn u_values(&self, order: usize) -> PyResult<Vec<Complex64>> {
        self.check_order(order)?;
        Ok(self.inner.u_values[order - 1].clone())
    }

    /// `v_k` at every node for one order (1-based).
    fn v_values(&self, order: usize) -> PyResult<Vec<Complex64>> {
        self.check_order(order)?;
        Ok(self.inner.v_values[order - 1].clone())
    }

    /// Least-squares residual norm per order.
    fn fit_residuals(&self) -> Vec<f64> {
        self.inner.fit_residuals()
    }

    /// The reconstructed potential anywhere in the exterior.
    fn v_at(&self, r: f64, phi: f64, theta: f64) -> Complex64 {
        self.inner
            .v_from_expansions(&SphericalPoint::new(r, phi, theta))
    }

    /// Gradient of the approximation in the local `(r, theta, phi)`
    /// frame.
    fn gradient(
        &self,
        r: f64,
        phi: f64,
        theta: f64,
    ) -> PyResult<(Complex64, Complex64, Complex64)> {
        let g = perturbation::gradient_v(
            &self.inner,
            &SphericalPoint::new(r, phi, theta),
            GradientMethod::Expansion,
        )
        .map_err(to_py_err)?;
        Ok((g.r, g.theta, g.phi))
    }

    /// Cartesian field vectors at the mesh nodes, as
    /// `((x, y, z), (gx, gy, gz))` pairs.
    #[allow(clippy::type_complexity)]
    fn field_at_nodes(&self) -> Vec<((f64, f64, f64), (Complex64, Complex64, Complex64))> {
        self.inner
            .mesh
            .nodes
            .iter()
            .map(|node| {
                let pos = sphere::sph_to_cart(node);
                let g = perturbation::cartesian_field(&self.inner, node);
                ((pos.x, pos.y, pos.z), (g[0], g[1], g[2]))
            })
            .collect()
    }
}

impl PySolution {
    fn check_order(&self, order: usize) -> PyResult<()> {
        if order == 0 || order > self.inner.order {
            return Err(PyValueError::new_err(format!(
                "order must be in 1..={}",
                self.inner.order
            )));
        }
        Ok(())
    }
}

/// Exterior Neumann kernel value for a field point and a source point on
/// the unit sphere.
#[pyfunction]
fn green(p_r: f64, p_phi: f64, p_theta: f64, q_phi: f64, q_theta: f64) -> PyResult<f64> {
    let p = SphericalPoint::new(p_r, p_phi, p_theta);
    let q = SphericalPoint::new(1.0, q_phi, q_theta);
    green_kernel::green(&p, &q, &SingularityPolicy::default())
        .map(|k| k.value)
        .map_err(to_py_err)
}

/// Collinear limit of the kernel for `r > 1`.
#[pyfunction]
fn green_collinear_limit(r: f64) -> PyResult<f64> {
    green_kernel::green_collinear_limit(r).map_err(to_py_err)
}

/// Surface harmonic `P_l^{|m|}(cos theta) e^{i m phi}`.
#[pyfunction]
fn surface_harmonic(l: u32, m: i32, phi: f64, theta: f64) -> PyResult<Complex64> {
    harmonics::eval_surface_harmonic(l, m, phi, theta).map_err(to_py_err)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[pyfunction]
fn gauss_legendre(n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    quadrature::gauss_legendre(n).map_err(to_py_err)
}

/// Exact manufactured potential at a point.
#[pyfunction]
fn v_exact(model: &str, epsilon: f64, r: f64, phi: f64, theta: f64) -> PyResult<Complex64> {
    Ok(parse_model(model, epsilon)?.v_exact(&SphericalPoint::new(r, phi, theta)))
}

/// Boundary intensity of a manufactured model.
#[pyfunction]
fn h_of(model: &str, epsilon: f64, phi: f64, theta: f64) -> PyResult<Complex64> {
    Ok(parse_model(model, epsilon)?.h_of(phi, theta))
}

/// Runs the perturbation cascade for a manufactured model on a mesh.
#[pyfunction]
#[pyo3(signature = (model, epsilon, mesh, order=3, basis_lmax=2, config=None))]
fn solve_cascade(
    model: &str,
    epsilon: f64,
    mesh: &PyMesh,
    order: usize,
    basis_lmax: u32,
    config: Option<PyQuadratureConfig>,
) -> PyResult<PySolution> {
    let exact = parse_model(model, epsilon)?;
    let basis = HarmonicBasis::with_lmax(basis_lmax).map_err(to_py_err)?;
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let sol = perturbation::run_cascade(
        &exact.boundary_h(),
        &mesh.inner,
        epsilon,
        order,
        &cfg,
        &basis,
    )
    .map_err(to_py_err)?;
    Ok(PySolution { inner: sol })
}

/// Per-node absolute error of each approximation order against the exact
/// model, as `errors[order-1][node]`.
#[pyfunction]
fn cascade_errors(model: &str, solution: &PySolution) -> PyResult<Vec<Vec<f64>>> {
    let exact = parse_model(model, solution.inner.epsilon)?;
    Ok((0..solution.inner.order)
        .map(|k| {
            solution
                .inner
                .mesh
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| (exact.v_exact(node) - solution.inner.v_values[k][i]).norm())
                .collect()
        })
        .collect())
}

#[pymodule]
fn backus_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyQuadratureConfig>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(green, m)?)?;
    m.add_function(wrap_pyfunction!(green_collinear_limit, m)?)?;
    m.add_function(wrap_pyfunction!(surface_harmonic, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(v_exact, m)?)?;
    m.add_function(wrap_pyfunction!(h_of, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cascade, m)?)?;
    m.add_function(wrap_pyfunction!(cascade_errors, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
