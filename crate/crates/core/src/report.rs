//! Run configuration, pipeline orchestration, and CSV reports.
//!
//! The config file is flat `key = value` text with `[section]` headers
//! and `#` comments. Every knob has a default; `--print-config` emits the
//! effective configuration in the same format. All reports are plain CSV
//! with full round-trip floats (17 significant digits), complex values
//! split into `_re`/`_im` columns, and byte-identical output across runs
//! on one platform.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonics::HarmonicBasis;
use crate::models::{ExactModel, ModelKind};
use crate::perturbation::{
    cartesian_field, run_cascade, BoundaryData, BoundaryLabel, PerturbationSolution,
};
use crate::quadrature::QuadratureConfig;
use crate::sphere::{
    icosahedron_nodes, load_triangle_mesh, sph_to_cart, uv_grid_nodes, SurfaceMesh,
};

/// Where the boundary intensity comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Degree1,
    Degree4,
    /// CSV of `(phi, theta, h_re, h_im)` samples; fitted with the run's
    /// harmonic basis before use.
    External(PathBuf),
}

impl FromStr for ModelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree1" => Ok(Self::Degree1),
            "degree4" => Ok(Self::Degree4),
            other => {
                if let Some(path) = other.strip_prefix("external:") {
                    Ok(Self::External(PathBuf::from(path)))
                } else {
                    Err(Error::Config(format!(
                        "unknown model `{other}` (expected degree1, degree4, or external:<path>)"
                    )))
                }
            }
        }
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Degree1 => write!(f, "degree1"),
            Self::Degree4 => write!(f, "degree4"),
            Self::External(p) => write!(f, "external:{}", p.display()),
        }
    }
}

/// Which mesh to evaluate on.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Ico,
    Uv(usize, usize),
    Tri(PathBuf),
}

impl FromStr for MeshSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "ico" {
            return Ok(Self::Ico);
        }
        if let Some(dims) = s.strip_prefix("uv:") {
            let parts: Vec<&str> = dims.split('x').collect();
            if parts.len() == 2 {
                let n_phi = parts[0].parse().map_err(|_| bad_mesh(s))?;
                let n_theta = parts[1].parse().map_err(|_| bad_mesh(s))?;
                if n_phi >= 2 && n_theta >= 2 {
                    return Ok(Self::Uv(n_phi, n_theta));
                }
            }
            return Err(bad_mesh(s));
        }
        if let Some(path) = s.strip_prefix("tri:") {
            return Ok(Self::Tri(PathBuf::from(path)));
        }
        Err(bad_mesh(s))
    }
}

fn bad_mesh(s: &str) -> Error {
    Error::Config(format!(
        "unknown mesh `{s}` (expected ico, uv:NxM, or tri:<path>)"
    ))
}

impl std::fmt::Display for MeshSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ico => write!(f, "ico"),
            Self::Uv(n, m) => write!(f, "uv:{n}x{m}"),
            Self::Tri(p) => write!(f, "tri:{}", p.display()),
        }
    }
}

/// Which report files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    ErrorTable,
    Field,
    RadiusSweep,
}

impl FromStr for OutputKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error_table" => Ok(Self::ErrorTable),
            "field" => Ok(Self::Field),
            "radius_sweep" => Ok(Self::RadiusSweep),
            other => Err(Error::Config(format!("unknown output kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for OutputKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ErrorTable => write!(f, "error_table"),
            Self::Field => write!(f, "field"),
            Self::RadiusSweep => write!(f, "radius_sweep"),
        }
    }
}

/// Full description of one solver run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub epsilon: f64,
    pub radius: f64,
    pub mesh: MeshSpec,
    pub order: usize,
    pub quadrature: QuadratureConfig,
    pub basis_lmax: u32,
    pub outputs: Vec<OutputKind>,
    pub out_dir: PathBuf,
    pub sweep_radii: Vec<f64>,
    /// 1-based node id probed by the radius sweep.
    pub sweep_probe: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::Degree1,
            epsilon: 1e-4,
            radius: 1.0,
            mesh: MeshSpec::Ico,
            order: 3,
            quadrature: QuadratureConfig::default(),
            basis_lmax: 2,
            outputs: vec![OutputKind::ErrorTable],
            out_dir: PathBuf::from("out"),
            sweep_radii: vec![1.0, 10.0, 100.0],
            sweep_probe: 5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.radius < 1.0 {
            return Err(Error::Config("radius must be >= 1".into()));
        }
        if !(1..=3).contains(&self.order) {
            return Err(Error::Config("order must be 1, 2, or 3".into()));
        }
        if !(1..=4).contains(&self.basis_lmax) {
            return Err(Error::Config("basis_lmax must be in 1..=4".into()));
        }
        if self.sweep_probe == 0 {
            return Err(Error::Config("sweep probe node ids are 1-based".into()));
        }
        Ok(())
    }

    /// Parses the flat `key = value` config format.
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_str_config(&text)
    }

    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad number `{v}`")))
        };
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad integer `{v}`")))
        };
        match (section, key) {
            ("run", "model") | ("", "model") => self.model = value.parse()?,
            ("run", "epsilon") | ("", "epsilon") => self.epsilon = parse_f64(value)?,
            ("run", "radius") | ("", "radius") => self.radius = parse_f64(value)?,
            ("run", "mesh") | ("", "mesh") => self.mesh = value.parse()?,
            ("run", "order") | ("", "order") => self.order = parse_usize(value)?,
            ("run", "basis_lmax") | ("", "basis_lmax") => {
                self.basis_lmax = parse_usize(value)? as u32
            }
            ("run", "out_dir") | ("", "out_dir") => self.out_dir = PathBuf::from(value),
            ("run", "outputs") | ("", "outputs") => {
                self.outputs = value
                    .split(',')
                    .map(|t| t.trim().parse())
                    .collect::<Result<_>>()?
            }
            ("sweep", "radii") => {
                self.sweep_radii = value
                    .split(',')
                    .map(|t| parse_f64(t.trim()))
                    .collect::<Result<_>>()?
            }
            ("sweep", "probe") => self.sweep_probe = parse_usize(value)?,
            ("quadrature", "n_gauss_zeta") => self.quadrature.n_gauss_zeta = parse_usize(value)?,
            ("quadrature", "inner_abs_tol") => self.quadrature.inner_abs_tol = parse_f64(value)?,
            ("quadrature", "inner_rel_tol") => self.quadrature.inner_rel_tol = parse_f64(value)?,
            ("quadrature", "max_subdivisions") => {
                self.quadrature.max_subdivisions = parse_usize(value)?
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown key `{key}` in section `[{section}]`"
                )))
            }
        }
        Ok(())
    }

    /// The effective configuration, printable and re-parseable.
    pub fn to_config_string(&self) -> String {
        let outputs: Vec<String> = self.outputs.iter().map(|o| o.to_string()).collect();
        let radii: Vec<String> = self.sweep_radii.iter().map(|r| r.to_string()).collect();
        format!(
            "[run]\n\
             model = {}\n\
             epsilon = {}\n\
             radius = {}\n\
             mesh = {}\n\
             order = {}\n\
             basis_lmax = {}\n\
             outputs = {}\n\
             out_dir = {}\n\
             \n\
             [sweep]\n\
             radii = {}\n\
             probe = {}\n\
             \n\
             [quadrature]\n\
             n_gauss_zeta = {}\n\
             inner_abs_tol = {}\n\
             inner_rel_tol = {}\n\
             max_subdivisions = {}\n",
            self.model,
            self.epsilon,
            self.radius,
            self.mesh,
            self.order,
            self.basis_lmax,
            outputs.join(","),
            self.out_dir.display(),
            radii.join(","),
            self.sweep_probe,
            self.quadrature.n_gauss_zeta,
            self.quadrature.inner_abs_tol,
            self.quadrature.inner_rel_tol,
            self.quadrature.max_subdivisions,
        )
    }
}

/// Reference potential the error columns compare against.
#[derive(Debug, Clone)]
pub enum Reference {
    Exact(ExactModel),
    /// External boundary data has no known solution; errors are reported
    /// against the unperturbed monopole.
    Monopole,
}

impl Reference {
    fn v(&self, p: &crate::sphere::SphericalPoint) -> Complex64 {
        match self {
            Self::Exact(m) => m.v_exact(p),
            Self::Monopole => Complex64::new(1.0 / p.r, 0.0),
        }
    }
}

fn build_mesh(spec: &MeshSpec, radius: f64) -> Result<SurfaceMesh> {
    Ok(match spec {
        MeshSpec::Ico => icosahedron_nodes(radius),
        MeshSpec::Uv(n_phi, n_theta) => uv_grid_nodes(*n_phi, *n_theta, radius),
        MeshSpec::Tri(path) => load_triangle_mesh(path, radius)?,
    })
}

fn load_external_h(path: &Path, basis: &HarmonicBasis) -> Result<BoundaryData> {
    let text = std::fs::read_to_string(path)?;
    let mut nodes = Vec::new();
    let mut samples = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Config(format!(
                "{}:{}: expected `phi,theta,h_re,h_im`",
                path.display(),
                lineno + 1
            )));
        }
        if lineno == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header row
        }
        let nums: Vec<f64> = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "{}:{}: bad number `{f}`",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        nodes.push(crate::sphere::SphericalPoint::new(1.0, nums[0], nums[1]));
        samples.push(Complex64::new(nums[2], nums[3]));
    }
    // nearest-harmonic representation of the samples: fit once, then
    // evaluate the fitted trace everywhere
    let fit = crate::harmonics::fit_least_squares(&nodes, &samples, basis)?;
    Ok(BoundaryData::new(BoundaryLabel::H, move |phi, theta| {
        fit.surface_value(phi, theta)
    }))
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// `max_errors[k-1]` is `max_i |v_ref - v_k|` over the mesh nodes.
    pub max_errors: Vec<f64>,
    pub files: Vec<PathBuf>,
}

/// Executes a configured run and writes the requested reports.
/// Deterministic: identical configs produce byte-identical files.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let basis = HarmonicBasis::with_lmax(cfg.basis_lmax)?;
    let mesh = build_mesh(&cfg.mesh, cfg.radius)?;
    let (h, reference) = match &cfg.model {
        ModelSpec::Degree1 => {
            let m = ExactModel::new(ModelKind::Degree1, cfg.epsilon);
            (m.boundary_h(), Reference::Exact(m))
        }
        ModelSpec::Degree4 => {
            let m = ExactModel::new(ModelKind::Degree4, cfg.epsilon);
            (m.boundary_h(), Reference::Exact(m))
        }
        ModelSpec::External(path) => (load_external_h(path, &basis)?, Reference::Monopole),
    };

    let sol = run_cascade(&h, &mesh, cfg.epsilon, cfg.order, &cfg.quadrature, &basis)?;
    let max_errors = max_errors(&sol, &reference);

    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut files = Vec::new();
    for kind in &cfg.outputs {
        let path = match kind {
            OutputKind::ErrorTable => {
                let p = cfg.out_dir.join("error_table.csv");
                std::fs::write(&p, error_table_csv(&sol, &reference))?;
                p
            }
            OutputKind::Field => {
                let p = cfg.out_dir.join("field.csv");
                std::fs::write(&p, field_csv(&sol))?;
                p
            }
            OutputKind::RadiusSweep => {
                let p = cfg.out_dir.join("radius_sweep.csv");
                std::fs::write(&p, radius_sweep_csv(cfg, &h, &reference, &basis)?)?;
                p
            }
        };
        files.push(path);
    }

    println!(
        "max |v - v{}| over {} nodes = {:.6e}",
        cfg.order,
        mesh.len(),
        max_errors[cfg.order - 1]
    );
    Ok(RunSummary { max_errors, files })
}

fn max_errors(sol: &PerturbationSolution, reference: &Reference) -> Vec<f64> {
    (0..sol.order)
        .map(|k| {
            sol.mesh
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| (reference.v(node) - sol.v_values[k][i]).norm())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// 17 significant digits; enough to round-trip any f64.
fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Error table: per node, the exact reference and `v - v_k` per order.
pub fn error_table_csv(sol: &PerturbationSolution, reference: &Reference) -> String {
    let mut out =
        String::from("node,phi,theta,v_exact_re,v_exact_im,e1_re,e1_im,e2_re,e2_im,e3_re,e3_im\n");
    for (i, node) in sol.mesh.nodes.iter().enumerate() {
        let ve = reference.v(node);
        let mut row = format!(
            "{},{},{},{},{}",
            i + 1,
            fmt_f(node.phi),
            fmt_f(node.theta),
            fmt_f(ve.re),
            fmt_f(ve.im)
        );
        for k in 0..3 {
            if k < sol.order {
                let e = ve - sol.v_values[k][i];
                write!(row, ",{},{}", fmt_f(e.re), fmt_f(e.im)).unwrap();
            } else {
                row.push_str(",,");
            }
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Field table: per node, Cartesian position and the Cartesian components
/// of the gradient of the highest-order approximation.
pub fn field_csv(sol: &PerturbationSolution) -> String {
    let mut out = String::from("node,x,y,z,gx_re,gy_re,gz_re,gx_im,gy_im,gz_im\n");
    for (i, node) in sol.mesh.nodes.iter().enumerate() {
        let pos = sph_to_cart(node);
        let g = cartesian_field(sol, node);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            i + 1,
            fmt_f(pos.x),
            fmt_f(pos.y),
            fmt_f(pos.z),
            fmt_f(g[0].re),
            fmt_f(g[1].re),
            fmt_f(g[2].re),
            fmt_f(g[0].im),
            fmt_f(g[1].im),
            fmt_f(g[2].im),
        ));
    }
    out
}

/// Radius sweep: reruns the cascade on the same angular mesh scaled to
/// each radius and reports `|v_ref - v_n|` at the probe node, plus the
/// fit residual per order. Quadrature and fit settings are echoed as
/// comment lines.
pub fn radius_sweep_csv(
    cfg: &RunConfig,
    h: &BoundaryData,
    reference: &Reference,
    basis: &HarmonicBasis,
) -> Result<String> {
    let base_mesh = build_mesh(&cfg.mesh, 1.0)?;
    if cfg.sweep_probe > base_mesh.len() {
        return Err(Error::Config(format!(
            "sweep probe {} exceeds node count {}",
            cfg.sweep_probe,
            base_mesh.len()
        )));
    }
    let probe = cfg.sweep_probe - 1;
    let mut out = String::new();
    writeln!(
        out,
        "# model={} epsilon={} mesh={} order={} basis_lmax={} probe={}",
        cfg.model, cfg.epsilon, cfg.mesh, cfg.order, cfg.basis_lmax, cfg.sweep_probe
    )
    .unwrap();
    writeln!(
        out,
        "# n_gauss_zeta={} inner_abs_tol={} inner_rel_tol={} max_subdivisions={} final_order_fitted=true",
        cfg.quadrature.n_gauss_zeta,
        cfg.quadrature.inner_abs_tol,
        cfg.quadrature.inner_rel_tol,
        cfg.quadrature.max_subdivisions
    )
    .unwrap();
    out.push_str("r,err_abs,fit_residual_u1,fit_residual_u2,fit_residual_u3\n");
    for &r in &cfg.sweep_radii {
        let mesh = base_mesh.with_radius(r);
        let sol = run_cascade(h, &mesh, cfg.epsilon, cfg.order, &cfg.quadrature, basis)?;
        let err = (reference.v(&mesh.nodes[probe]) - sol.v_final(probe)).norm();
        let residuals = sol.fit_residuals();
        let mut row = format!("{},{}", fmt_f(r), fmt_f(err));
        for k in 0..3 {
            if k < residuals.len() {
                write!(row, ",{}", fmt_f(residuals[k])).unwrap();
            } else {
                row.push(',');
            }
        }
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

/// Stage label for diagnostics, derived from the error kind.
pub fn failure_stage(err: &Error) -> &'static str {
    match err {
        Error::Config(_) => "configuration",
        Error::Io(_) => "file io",
        Error::MeshParse { .. } | Error::DegenerateVertex { .. } => "mesh import",
        Error::GaussOrderOutOfRange { .. } => "quadrature setup",
        Error::ToleranceNotMet { .. } => "adaptive quadrature",
        Error::SurfaceCollision { .. } | Error::QOffUnitSphere { .. } => "surface integration",
        Error::RankDeficientFit { .. }
        | Error::NotEnoughNodes { .. }
        | Error::BasisTermInvalid { .. }
        | Error::DuplicateBasisTerm { .. }
        | Error::BasisDegreeUnsupported { .. } => "harmonic fit",
        Error::MissingExpansion { .. } | Error::OrderOutOfRange { .. } => "cascade",
        Error::PoleEvaluation { .. } => "gradient evaluation",
        Error::RadiusNotExterior { .. } => "kernel evaluation",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_config_string();
        let parsed = RunConfig::from_str_config(&text).unwrap();
        assert_eq!(parsed.model, cfg.model);
        assert_eq!(parsed.epsilon, cfg.epsilon);
        assert_eq!(parsed.mesh, cfg.mesh);
        assert_eq!(parsed.quadrature, cfg.quadrature);
        assert_eq!(parsed.sweep_radii, cfg.sweep_radii);
    }

    #[test]
    fn config_parses_overrides_and_comments() {
        let text = "\
            # comment\n\
            [run]\n\
            model = degree4\n\
            epsilon = 1e-2  # trailing comment\n\
            mesh = uv:6x6\n\
            outputs = error_table, field\n\
            \n\
            [quadrature]\n\
            n_gauss_zeta = 20\n";
        let cfg = RunConfig::from_str_config(text).unwrap();
        assert_eq!(cfg.model, ModelSpec::Degree4);
        assert_eq!(cfg.epsilon, 1e-2);
        assert_eq!(cfg.mesh, MeshSpec::Uv(6, 6));
        assert_eq!(cfg.outputs, vec![OutputKind::ErrorTable, OutputKind::Field]);
        assert_eq!(cfg.quadrature.n_gauss_zeta, 20);
    }

    #[test]
    fn config_rejects_bad_input() {
        assert!(RunConfig::from_str_config("model = degree7\n").is_err());
        assert!(RunConfig::from_str_config("mesh = uv:1x9\n").is_err());
        assert!(RunConfig::from_str_config("[run]\nnonsense = 1\n").is_err());
        assert!(RunConfig::from_str_config("order = 5\n").is_err());
        assert!(RunConfig::from_str_config("epsilon = -1\n").is_err());
        assert!(RunConfig::from_str_config("just words\n").is_err());
    }

    #[test]
    fn mesh_and_model_specs_parse() {
        assert_eq!("ico".parse::<MeshSpec>().unwrap(), MeshSpec::Ico);
        assert_eq!(
            "uv:12x12".parse::<MeshSpec>().unwrap(),
            MeshSpec::Uv(12, 12)
        );
        assert!(matches!(
            "tri:a/b.txt".parse::<MeshSpec>().unwrap(),
            MeshSpec::Tri(_)
        ));
        assert!("grid".parse::<MeshSpec>().is_err());
        assert!(matches!(
            "external:h.csv".parse::<ModelSpec>().unwrap(),
            ModelSpec::External(_)
        ));
    }
}
