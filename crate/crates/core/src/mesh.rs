//! Simplicial triangulations of planar polygonal domains.
//!
//! Vertices of each triangle are stored counterclockwise. Local edge `i` of a
//! triangle is the edge opposite its local vertex `i`, traversed from vertex
//! `i+1` to vertex `i+2` (indices mod 3).
//!
//! Every edge carries one global unit normal. For an interior edge it points
//! from the lower-indexed adjacent triangle into the higher-indexed one; on the
//! boundary it points outward. `edge_sign(t, i)` is `+1` when the global normal
//! of local edge `i` is the outward normal of triangle `t` and `-1` otherwise.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FemError, Result};

pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Triangulation {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// `(lo, hi)` vertex pairs, `lo < hi`.
    edges: Vec<[usize; 2]>,
    /// First entry is the lower triangle index; second is `None` on the boundary.
    edge_triangles: Vec<(usize, Option<usize>)>,
    edge_normals: Vec<Point>,
    triangle_edges: Vec<[usize; 3]>,
    triangle_edge_signs: Vec<[f64; 3]>,
    diameters: Vec<f64>,
    areas: Vec<f64>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Triangulation {
    /// Builds a triangulation from raw vertex coordinates and counterclockwise
    /// triangles, deriving edges, orientations and per-element sizes.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(FemError::InvalidMesh("no triangles".into()));
        }
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut diameters = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= nv) {
                return Err(FemError::InvalidMesh(format!(
                    "triangle {t} references vertex {bad} but only {nv} vertices exist"
                )));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            if !(area > 0.0) {
                return Err(FemError::DegenerateElement { element: t, area });
            }
            areas.push(area);
            diameters.push(dist(a, b).max(dist(b, c)).max(dist(c, a)));
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<(usize, Option<usize>)> = Vec::new();
        // local traversal direction of the first owner, to detect orientation clashes
        let mut first_direction: Vec<bool> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut triangle_edge_signs = Vec::with_capacity(triangles.len());

        for (t, tri) in triangles.iter().enumerate() {
            let mut ids = [0usize; 3];
            let mut signs = [0.0; 3];
            for i in 0..3 {
                let start = tri[(i + 1) % 3];
                let end = tri[(i + 2) % 3];
                let key = [start.min(end), start.max(end)];
                match edge_index.get(&key) {
                    None => {
                        let id = edges.len();
                        edge_index.insert(key, id);
                        edges.push(key);
                        edge_triangles.push((t, None));
                        first_direction.push(start < end);
                        ids[i] = id;
                        signs[i] = 1.0;
                    }
                    Some(&id) => {
                        if edge_triangles[id].1.is_some() {
                            return Err(FemError::InvalidMesh(format!(
                                "edge ({}, {}) shared by more than two triangles",
                                key[0], key[1]
                            )));
                        }
                        if first_direction[id] == (start < end) {
                            return Err(FemError::InvalidMesh(format!(
                                "triangles {} and {t} traverse edge ({}, {}) in the same direction",
                                edge_triangles[id].0, key[0], key[1]
                            )));
                        }
                        edge_triangles[id].1 = Some(t);
                        ids[i] = id;
                        signs[i] = -1.0;
                    }
                }
            }
            triangle_edges.push(ids);
            triangle_edge_signs.push(signs);
        }

        let edge_normals = edge_triangles
            .iter()
            .enumerate()
            .map(|(e, &(owner, _))| {
                let tri = triangles[owner];
                let i = triangle_edges[owner].iter().position(|&id| id == e).unwrap();
                let a = vertices[tri[(i + 1) % 3]];
                let b = vertices[tri[(i + 2) % 3]];
                let len = dist(a, b);
                // outward normal of a counterclockwise triangle
                [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
            })
            .collect();

        Ok(Self {
            vertices,
            triangles,
            edges,
            edge_triangles,
            edge_normals,
            triangle_edges,
            triangle_edge_signs,
            diameters,
            areas,
        })
    }

    /// Right-triangle mesh of the unit square with `m` cells per side; every
    /// cell is cut along the same diagonal.
    pub fn structured(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(FemError::InvalidArgument("structured mesh needs m >= 1".into()));
        }
        let n = m + 1;
        let step = 1.0 / m as f64;
        let mut vertices = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push([i as f64 * step, j as f64 * step]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let v00 = i + j * n;
                let v10 = v00 + 1;
                let v01 = v00 + n;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::from_parts(vertices, triangles)
    }

    /// Red refinement: every triangle is split into four similar children
    /// through its edge midpoints.
    pub fn refine_uniform(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let midpoint: Vec<usize> = self
            .edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                vertices.len() - 1
            })
            .collect();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            // local edge i is opposite vertex i
            let [m_bc, m_ca, m_ab] = self.triangle_edges[t].map(|e| midpoint[e]);
            triangles.push([a, m_ab, m_ca]);
            triangles.push([m_ab, b, m_bc]);
            triangles.push([m_ca, m_bc, c]);
            triangles.push([m_ab, m_bc, m_ca]);
        }
        Self::from_parts(vertices, triangles).expect("refinement of a valid mesh is valid")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Global edge ids of the three local edges of `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    /// Relative orientation of local edge `i` of `t` with respect to the global normal.
    pub fn edge_sign(&self, t: usize, i: usize) -> f64 {
        self.triangle_edge_signs[t][i]
    }

    pub fn edge_normal(&self, e: usize) -> Point {
        self.edge_normals[e]
    }

    /// Adjacent triangles of edge `e`, lower index first.
    pub fn edge_triangles(&self, e: usize) -> (usize, Option<usize>) {
        self.edge_triangles[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_triangles[e].1.is_none()
    }

    pub fn boundary_edge_flags(&self) -> Vec<bool> {
        self.edge_triangles.iter().map(|(_, other)| other.is_none()).collect()
    }

    /// Diameter `h_T` of element `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        self.diameters[t]
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    pub fn h_max(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Maximum over elements of diameter / inscribed-circle diameter.
    pub fn shape_regularity(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for t in 0..self.num_triangles() {
            let [a, b, c] = self.triangle_vertices(t);
            worst = worst.max(triangle_shape_ratio(a, b, c).ok_or(
                FemError::DegenerateElement {
                    element: t,
                    area: signed_area(a, b, c),
                },
            )?);
        }
        Ok(worst)
    }

    /// Center of inertia of element `t`.
    pub fn element_centroid(&self, t: usize) -> Result<Point> {
        if t >= self.num_triangles() {
            return Err(FemError::ElementOutOfRange {
                index: t,
                count: self.num_triangles(),
            });
        }
        Ok(self.centroid(t))
    }

    pub(crate) fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_vertices(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Parses the plain-text mesh format: `vertices N`, N lines `x y`,
    /// `triangles M`, M lines `i j k` (0-based, counterclockwise).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let bad = |line: usize, message: String| FemError::MeshFormat { line, message };
        let nv = parse_header(&mut lines, "vertices")?;

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, l) = lines
                .next()
                .ok_or_else(|| bad(0, "unexpected end of file in vertex block".into()))?;
            let coords: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(line, format!("bad coordinate: {e}")))?;
            if coords.len() != 2 || !coords.iter().all(|c| c.is_finite()) {
                return Err(bad(line, "expected two finite coordinates".into()));
            }
            vertices.push([coords[0], coords[1]]);
        }

        let nt = parse_header(&mut lines, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, l) = lines
                .next()
                .ok_or_else(|| bad(0, "unexpected end of file in triangle block".into()))?;
            let ids: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(line, format!("bad vertex index: {e}")))?;
            if ids.len() != 3 {
                return Err(bad(line, "expected three vertex indices".into()));
            }
            triangles.push([ids[0], ids[1], ids[2]]);
        }
        if let Some((line, _)) = lines.next() {
            return Err(bad(line, "trailing content after triangle block".into()));
        }
        Self::from_parts(vertices, triangles)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_mesh_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "vertices {}", self.vertices.len()).unwrap();
        for v in &self.vertices {
            writeln!(out, "{} {}", v[0], v[1]).unwrap();
        }
        writeln!(out, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_mesh_string())?;
        Ok(())
    }
}

fn parse_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    keyword: &str,
) -> Result<usize> {
    let expected = || format!("expected `{keyword} <count>`");
    let (line, l) = lines.next().ok_or_else(|| FemError::MeshFormat {
        line: 0,
        message: format!("missing `{keyword}` header"),
    })?;
    match l.split_whitespace().collect::<Vec<_>>().as_slice() {
        [k, n] if *k == keyword => n.parse().map_err(|_| FemError::MeshFormat {
            line,
            message: expected(),
        }),
        _ => Err(FemError::MeshFormat {
            line,
            message: expected(),
        }),
    }
}

/// diameter / (2 * inradius) of a single triangle, `None` when degenerate.
pub fn triangle_shape_ratio(a: Point, b: Point, c: Point) -> Option<f64> {
    let area = signed_area(a, b, c).abs();
    if area == 0.0 {
        return None;
    }
    let (ab, bc, ca) = (dist(a, b), dist(b, c), dist(c, a));
    let perimeter = ab + bc + ca;
    let inradius_diameter = 4.0 * area / perimeter;
    Some(ab.max(bc).max(ca) / inradius_diameter)
}
