//! Spherical-coordinate geometry and surface meshes.
//!
//! Conventions: `theta` is the co-latitude measured from the +z axis in
//! `[0, pi]`, `phi` is the longitude in `[0, 2*pi)`, and
//! `(x, y, z) = r (sin t cos p, sin t sin p, cos t)`.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// A point in spherical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPoint {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

impl SphericalPoint {
    /// Builds a point, normalizing `phi` into `[0, 2*pi)`.
    pub fn new(r: f64, phi: f64, theta: f64) -> Self {
        assert!(r > 0.0, "radial distance must be positive (got {r})");
        assert!(
            (-1e-12..=PI + 1e-12).contains(&theta),
            "co-latitude must lie in [0, pi] (got {theta})"
        );
        Self {
            r,
            phi: normalize_phi(phi),
            theta: theta.clamp(0.0, PI),
        }
    }

    /// Same angular position at a different radius.
    pub fn with_radius(&self, r: f64) -> Self {
        Self::new(r, self.phi, self.theta)
    }

    /// Unit direction vector of this point.
    pub fn unit(&self) -> CartesianVec {
        sph_to_cart(&Self::new(1.0, self.phi, self.theta))
    }
}

/// Wraps a longitude into `[0, 2*pi)`.
pub fn normalize_phi(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p < 0.0 {
        p += 2.0 * PI;
    }
    // rem_euclid of an exact multiple can round to the full period
    if p >= 2.0 * PI {
        p = 0.0;
    }
    p
}

/// A vector in Cartesian coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianVec {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianVec {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(k * self.x, k * self.y, k * self.z)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::DegenerateVertex { index: 0 });
        }
        Ok(self.scale(1.0 / n))
    }
}

/// Spherical to Cartesian conversion.
pub fn sph_to_cart(p: &SphericalPoint) -> CartesianVec {
    let (st, ct) = (p.theta.sin(), p.theta.cos());
    let (sp, cp) = (p.phi.sin(), p.phi.cos());
    CartesianVec::new(p.r * st * cp, p.r * st * sp, p.r * ct)
}

/// Cartesian to spherical conversion; fails on the zero vector.
pub fn cart_to_sph(v: &CartesianVec) -> Result<SphericalPoint> {
    let r = v.norm();
    if r == 0.0 {
        return Err(Error::DegenerateVertex { index: 0 });
    }
    let theta = (v.z / r).clamp(-1.0, 1.0).acos();
    let phi = normalize_phi(v.y.atan2(v.x));
    Ok(SphericalPoint::new(r, phi, theta))
}

/// Cosine of the angle between the directions of `p` and `q`,
/// clamped into `[-1, 1]`. Independent of the radii.
pub fn cos_gamma(p: &SphericalPoint, q: &SphericalPoint) -> f64 {
    let c = p.theta.cos() * q.theta.cos() + p.theta.sin() * q.theta.sin() * (p.phi - q.phi).cos();
    c.clamp(-1.0, 1.0)
}

/// Haversine `sin^2(gamma/2)` of the angle between the directions of `p`
/// and `q`. Stable for nearly coincident directions, where `cos_gamma`
/// rounds to 1.
pub fn haversine(p: &SphericalPoint, q: &SphericalPoint) -> f64 {
    let sd_theta = ((p.theta - q.theta) / 2.0).sin();
    let sd_phi = ((p.phi - q.phi) / 2.0).sin();
    let h = sd_theta * sd_theta + p.theta.sin() * q.theta.sin() * sd_phi * sd_phi;
    h.clamp(0.0, 1.0)
}

/// How a mesh was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Icosahedron,
    UvGrid,
    TriangleImport,
}

/// Node set (plus optional elements) on a sphere of a given radius.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub radius: f64,
    pub nodes: Vec<SphericalPoint>,
    pub elements: Option<Vec<[usize; 3]>>,
    pub kind: MeshKind,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same mesh scaled to a different radius (angles unchanged).
    pub fn with_radius(&self, radius: f64) -> Self {
        assert!(radius > 0.0);
        Self {
            radius,
            nodes: self.nodes.iter().map(|n| n.with_radius(radius)).collect(),
            elements: self.elements.clone(),
            kind: self.kind,
        }
    }
}

/// Co-latitude of the five-node ring listed first in the vertex table:
/// `acos(cos(2pi/5) / (cos(2pi/5) - 1))`, about 116.57 degrees.
pub fn theta_upper() -> f64 {
    let c = (2.0 * PI / 5.0).cos();
    (c / (c - 1.0)).acos()
}

/// Co-latitude of the other ring: `acos(cos(2pi/5) / (1 - cos(2pi/5)))`,
/// about 63.43 degrees.
pub fn theta_lower() -> f64 {
    let c = (2.0 * PI / 5.0).cos();
    (c / (1.0 - c)).acos()
}

/// The 20 faces of the icosahedron in the node order produced by
/// [`icosahedron_nodes`] (node 0 at the north pole, node 11 at the south).
const ICO_FACES: [[usize; 3]; 20] = [
    // cap around the north pole and its ring (nodes 2,4,6,8,10)
    [0, 2, 4],
    [0, 4, 6],
    [0, 6, 8],
    [0, 8, 10],
    [0, 10, 2],
    // cap around the south pole and its ring (nodes 1,3,5,7,9)
    [11, 1, 3],
    [11, 3, 5],
    [11, 5, 7],
    [11, 7, 9],
    [11, 9, 1],
    // equatorial band
    [2, 4, 3],
    [4, 6, 5],
    [6, 8, 7],
    [8, 10, 9],
    [10, 2, 1],
    [1, 3, 2],
    [3, 5, 4],
    [5, 7, 6],
    [7, 9, 8],
    [9, 1, 10],
];

/// The twelve vertices of a regular icosahedron inscribed in a sphere,
/// in the fixed order: north pole, then alternating-ring nodes at
/// `phi_k = k*pi/5` for `k = 1..=10`, then the south pole.
pub fn icosahedron_nodes(radius: f64) -> SurfaceMesh {
    assert!(radius > 0.0, "radius must be positive");
    let (tu, tl) = (theta_upper(), theta_lower());
    let mut nodes = Vec::with_capacity(12);
    nodes.push(SphericalPoint::new(radius, 0.0, 0.0));
    for k in 1..=10u32 {
        let phi = k as f64 * PI / 5.0;
        let theta = if k % 2 == 1 { tu } else { tl };
        nodes.push(SphericalPoint::new(radius, phi, theta));
    }
    nodes.push(SphericalPoint::new(radius, 0.0, PI));
    SurfaceMesh {
        radius,
        nodes,
        elements: Some(ICO_FACES.to_vec()),
        kind: MeshKind::Icosahedron,
    }
}

/// Regular longitude/co-latitude grid with `n_phi * n_theta` nodes at
/// `phi_i = 2*pi*i/n_phi` and `theta_j = pi*j/(n_theta + 1)`.
///
/// The exact poles are excluded so that boundary data containing
/// `1/sin^2(theta)` terms stays finite at every node.
pub fn uv_grid_nodes(n_phi: usize, n_theta: usize, radius: f64) -> SurfaceMesh {
    assert!(n_phi >= 2 && n_theta >= 2, "grid needs at least 2x2 nodes");
    assert!(radius > 0.0, "radius must be positive");
    let mut nodes = Vec::with_capacity(n_phi * n_theta);
    for j in 1..=n_theta {
        let theta = PI * j as f64 / (n_theta + 1) as f64;
        for i in 0..n_phi {
            let phi = 2.0 * PI * i as f64 / n_phi as f64;
            nodes.push(SphericalPoint::new(radius, phi, theta));
        }
    }
    SurfaceMesh {
        radius,
        nodes,
        elements: None,
        kind: MeshKind::UvGrid,
    }
}

/// Loads a plain-text triangle mesh and projects every vertex radially
/// onto the sphere of the requested radius.
///
/// Format: first line `nv nf`; then `nv` lines `x y z`; then `nf` lines
/// `i j k` with 0-based vertex indices. Whitespace-separated, `#` starts
/// a comment.
pub fn load_triangle_mesh<P: AsRef<Path>>(path: P, radius: f64) -> Result<SurfaceMesh> {
    assert!(radius > 0.0, "radius must be positive");
    let text = std::fs::read_to_string(path)?;
    parse_triangle_mesh(&text, radius)
}

pub(crate) fn parse_triangle_mesh(text: &str, radius: f64) -> Result<SurfaceMesh> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            rows.push((lineno + 1, line));
        }
    }
    let parse_err = |line: usize, message: &str| Error::MeshParse {
        line,
        message: message.to_string(),
    };
    let (first_line, header) = *rows
        .first()
        .ok_or_else(|| parse_err(0, "empty mesh file"))?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(first_line, &format!("bad header: {e}")))?;
    if counts.len() != 2 {
        return Err(parse_err(first_line, "header must be `nv nf`"));
    }
    let (nv, nf) = (counts[0], counts[1]);
    if rows.len() != 1 + nv + nf {
        return Err(parse_err(
            first_line,
            &format!("expected {} data lines, found {}", nv + nf, rows.len() - 1),
        ));
    }

    let mut nodes = Vec::with_capacity(nv);
    for (idx, &(lineno, line)) in rows[1..1 + nv].iter().enumerate() {
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(lineno, &format!("bad vertex: {e}")))?;
        if coords.len() != 3 {
            return Err(parse_err(lineno, "vertex line must be `x y z`"));
        }
        let v = CartesianVec::new(coords[0], coords[1], coords[2]);
        if v.norm() == 0.0 {
            return Err(Error::DegenerateVertex { index: idx });
        }
        let sph = cart_to_sph(&v)?;
        nodes.push(sph.with_radius(radius));
    }

    let mut elements = Vec::with_capacity(nf);
    for &(lineno, line) in &rows[1 + nv..] {
        let idxs: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(lineno, &format!("bad face: {e}")))?;
        if idxs.len() != 3 {
            return Err(parse_err(lineno, "face line must be `i j k`"));
        }
        for &i in &idxs {
            if i >= nv {
                return Err(parse_err(lineno, &format!("vertex index {i} out of range")));
            }
        }
        elements.push([idxs[0], idxs[1], idxs[2]]);
    }

    Ok(SurfaceMesh {
        radius,
        nodes,
        elements: Some(elements),
        kind: MeshKind::TriangleImport,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn icosahedron_matches_vertex_table() {
        let mesh = icosahedron_nodes(1.0);
        assert_eq!(mesh.len(), 12);
        // closed forms evaluate to acos(-1/sqrt(5)) and acos(1/sqrt(5))
        assert_abs_diff_eq!(theta_lower(), 1.1071487177940904, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_upper(), 2.0344439357957027, epsilon = 1e-12);
        let p1 = mesh.nodes[0];
        assert_eq!((p1.r, p1.phi, p1.theta), (1.0, 0.0, 0.0));
        let p12 = mesh.nodes[11];
        assert_eq!((p12.r, p12.phi), (1.0, 0.0));
        assert_abs_diff_eq!(p12.theta, PI, epsilon = 0.0);
        // ring structure: odd k at theta_upper, even at theta_lower
        assert_abs_diff_eq!(mesh.nodes[1].phi, PI / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mesh.nodes[1].theta, theta_upper(), epsilon = 1e-15);
        assert_abs_diff_eq!(mesh.nodes[4].phi, 4.0 * PI / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mesh.nodes[4].theta, theta_lower(), epsilon = 1e-15);
        // node 11 in the table is listed at phi = 2*pi, normalized to 0
        assert_abs_diff_eq!(mesh.nodes[10].phi, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn icosahedron_scales_radius_without_touching_angles() {
        let unit = icosahedron_nodes(1.0);
        let scaled = icosahedron_nodes(1.5);
        for (a, b) in unit.nodes.iter().zip(&scaled.nodes) {
            assert_eq!(b.r, 1.5);
            assert_eq!(a.phi, b.phi);
            assert_eq!(a.theta, b.theta);
        }
    }

    #[test]
    fn icosahedron_edges_are_uniform() {
        let mesh = icosahedron_nodes(1.0);
        let mut dists = Vec::new();
        for i in 0..12 {
            for j in (i + 1)..12 {
                let c = cos_gamma(&mesh.nodes[i], &mesh.nodes[j]);
                dists.push(c.acos());
            }
        }
        dists.sort_by(f64::total_cmp);
        let edge = dists[0];
        let edges: Vec<f64> = dists
            .iter()
            .copied()
            .take_while(|d| d - edge < 1e-9)
            .collect();
        assert_eq!(edges.len(), 30, "regular icosahedron has 30 edges");
        for d in edges {
            assert_abs_diff_eq!(d, edge, epsilon = 1e-9);
        }
    }

    #[test]
    fn uv_grid_counts_and_angles() {
        assert_eq!(uv_grid_nodes(6, 6, 1.0).len(), 36);
        assert_eq!(uv_grid_nodes(12, 12, 1.0).len(), 144);
        let g = uv_grid_nodes(2, 2, 1.0);
        assert_eq!(g.len(), 4);
        let mut thetas: Vec<f64> = g.nodes.iter().map(|n| n.theta).collect();
        thetas.dedup();
        assert_abs_diff_eq!(thetas[0], PI / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(thetas[1], 2.0 * PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn uv_grid_avoids_poles() {
        for (np, nt) in [(2, 2), (6, 6), (12, 12), (5, 9)] {
            for n in uv_grid_nodes(np, nt, 1.0).nodes {
                assert!(n.theta.sin() > 1e-3);
            }
        }
    }

    #[test]
    fn cos_gamma_examples() {
        let pole = SphericalPoint::new(1.0, 0.0, 0.0);
        for phi in [0.0, 1.0, 3.0, 6.0] {
            let q = SphericalPoint::new(1.0, phi, PI / 2.0);
            assert_abs_diff_eq!(cos_gamma(&pole, &q), 0.0, epsilon = 1e-15);
        }
        let p = SphericalPoint::new(2.0, 1.2, 0.7);
        assert_abs_diff_eq!(cos_gamma(&p, &p), 1.0, epsilon = 0.0);
        let a = SphericalPoint::new(1.0, 0.0, PI / 2.0);
        let b = SphericalPoint::new(1.0, PI, PI / 2.0);
        assert_abs_diff_eq!(cos_gamma(&a, &b), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn conversion_anchors() {
        let v = sph_to_cart(&SphericalPoint::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 1.0, epsilon = 1e-15);
        let v = sph_to_cart(&SphericalPoint::new(2.0, PI / 2.0, PI / 2.0));
        assert_abs_diff_eq!(v.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.y, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn cart_to_sph_rejects_zero() {
        assert!(cart_to_sph(&CartesianVec::new(0.0, 0.0, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn sph_cart_round_trip(r in 0.5f64..10.0, phi in 0.0f64..(2.0 * PI), theta in 1e-6f64..(PI - 1e-6)) {
            let p = SphericalPoint::new(r, phi, theta);
            let v = sph_to_cart(&p);
            prop_assert!((v.norm() - r).abs() <= 1e-12 * r);
            let back = cart_to_sph(&v).unwrap();
            prop_assert!((back.r - p.r).abs() <= 1e-12 * r);
            prop_assert!((back.theta - p.theta).abs() <= 1e-12);
            let dphi = (back.phi - p.phi).abs();
            prop_assert!(dphi <= 1e-11 || (2.0 * PI - dphi) <= 1e-11);
        }

        #[test]
        fn cos_gamma_agrees_with_unit_dot(phi1 in 0.0f64..(2.0 * PI), t1 in 0.0f64..PI,
                                          phi2 in 0.0f64..(2.0 * PI), t2 in 0.0f64..PI,
                                          r1 in 0.5f64..5.0, r2 in 0.5f64..5.0) {
            let p = SphericalPoint::new(r1, phi1, t1);
            let q = SphericalPoint::new(r2, phi2, t2);
            let dot = p.unit().dot(&q.unit());
            prop_assert!((cos_gamma(&p, &q) - dot).abs() <= 1e-12);
            prop_assert!((cos_gamma(&p, &q) - cos_gamma(&q, &p)).abs() == 0.0);
            prop_assert!(cos_gamma(&p, &q) <= 1.0 && cos_gamma(&p, &q) >= -1.0);
        }
    }

    #[test]
    fn triangle_mesh_octahedron() {
        let text = "# octahedron\n6 8\n1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n\
                    0 2 4\n2 1 4\n1 3 4\n3 0 4\n2 0 5\n1 2 5\n3 1 5\n0 3 5\n";
        let mesh = parse_triangle_mesh(text, 1.0).unwrap();
        assert_eq!(mesh.len(), 6);
        assert_eq!(mesh.elements.as_ref().unwrap().len(), 8);
        for n in &mesh.nodes {
            assert!((n.r - 1.0).abs() <= 1e-12);
        }
        let projected = parse_triangle_mesh(text, 1.1).unwrap();
        for n in &projected.nodes {
            assert!((n.r - 1.1).abs() <= 1e-12);
        }
    }

    #[test]
    fn triangle_mesh_file_round_trip_98_nodes() {
        // a 12 x 8 latitude/longitude shell plus both poles: 98 vertices
        let mut text = String::from("98 0\n");
        for j in 1..=12 {
            let theta = PI * j as f64 / 13.0;
            for i in 0..8 {
                let phi = 2.0 * PI * i as f64 / 8.0;
                let v = sph_to_cart(&SphericalPoint::new(1.0, phi, theta));
                text.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
            }
        }
        text.push_str("0 0 1\n0 0 -1\n");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shell.txt");
        std::fs::write(&path, text).unwrap();
        let mesh = load_triangle_mesh(&path, 1.1).unwrap();
        assert_eq!(mesh.len(), 98);
        assert_eq!(mesh.kind, MeshKind::TriangleImport);
        for n in &mesh.nodes {
            assert!((n.r - 1.1).abs() <= 1e-12);
        }
    }

    #[test]
    fn triangle_mesh_rejects_origin_vertex() {
        let text = "2 0\n0 0 0\n1 0 0\n";
        match parse_triangle_mesh(text, 1.0) {
            Err(Error::DegenerateVertex { index: 0 }) => {}
            other => panic!("expected degenerate-vertex error, got {other:?}"),
        }
    }

    #[test]
    fn triangle_mesh_rejects_malformed_files() {
        assert!(parse_triangle_mesh("", 1.0).is_err());
        assert!(parse_triangle_mesh("1\n1 0 0\n", 1.0).is_err());
        assert!(parse_triangle_mesh("1 1\n1 0 0\n0 0 7\n", 1.0).is_err());
        assert!(parse_triangle_mesh("2 0\n1 0 0\n", 1.0).is_err());
        assert!(parse_triangle_mesh("1 0\nnot a number 0 0\n", 1.0).is_err());
    }
}
