//! Polylines and triangle meshes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::chart::{Chart, End};
use super::{jet_geometry, BoundarySample, SurfaceSample};
use crate::cone::SolidCone;
use crate::linalg::{self, cross, dot, norm, sub, DMatrix, Vec3};
use crate::scalar::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Segments(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexGeometry<T: Real> {
    pub normal: Vec3<T>,
    pub mean_curvature: T,
    pub sigma2: T,
}

#[derive(Debug, Clone)]
pub struct Mesh<T: Real> {
    vertices: Vec<Vec3<T>>,
    cells: Cells,
    /// Vertices lying on `∂M` (the discrete `∂Σ`).
    on_cone_boundary: Vec<bool>,
    geometry: Vec<VertexGeometry<T>>,
    exact_geometry: bool,
    tol_boundary: T,
    possible_tangency: Vec<usize>,
}

impl<T: Real> Mesh<T> {
    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    pub fn vertex_geometry(&self) -> &[VertexGeometry<T>] {
        &self.geometry
    }

    pub fn on_cone_boundary(&self) -> &[bool] {
        &self.on_cone_boundary
    }

    /// True when vertex curvatures come from a generating chart.
    pub fn has_exact_geometry(&self) -> bool {
        self.exact_geometry
    }

    /// Vertices on `∂M` that are not on the topological boundary of the mesh:
    /// either interior tangency or a misclassified contact.
    pub fn possible_tangency(&self) -> &[usize] {
        &self.possible_tangency
    }

    pub fn tol_boundary(&self) -> T {
        self.tol_boundary
    }

    pub fn param_dim(&self) -> usize {
        match self.cells {
            Cells::Segments(_) => 1,
            Cells::Triangles(_) => 2,
        }
    }

    pub fn max_cell_diameter(&self) -> T {
        let v = &self.vertices;
        let d = |a: usize, b: usize| norm(&sub(&v[a], &v[b]));
        match &self.cells {
            Cells::Segments(s) => s.iter().map(|c| d(c[0], c[1])).fold(T::zero(), |a, b| a.max(b)),
            Cells::Triangles(t) => t
                .iter()
                .map(|c| d(c[0], c[1]).max(d(c[1], c[2])).max(d(c[2], c[0])))
                .fold(T::zero(), |a, b| a.max(b)),
        }
    }

    pub(crate) fn scale(&mut self, t: T) {
        for v in &mut self.vertices {
            *v = linalg::scale(t, v);
        }
        for g in &mut self.geometry {
            g.mean_curvature = g.mean_curvature / t;
            g.sigma2 = g.sigma2 / (t * t);
        }
        self.tol_boundary = self.tol_boundary * t.max(T::one());
    }

    /// Builds a mesh on the chart's parameter domain with exact vertex geometry.
    pub fn from_chart(chart: Arc<dyn Chart<T>>, segments: usize, rings: usize) -> Result<Self> {
        let n = chart.param_dim();
        let dom = chart.domain();
        let orient = chart.orientation();
        let mut vertices = Vec::new();
        let mut geometry = Vec::new();
        let mut marks = Vec::new();
        let vertex_geo = |u: [T; 2]| -> Result<VertexGeometry<T>> {
            let jet = chart.jet(u);
            let g = jet_geometry(n, &jet, orient)
                .ok_or_else(|| Error::InvalidInput("degenerate chart vertex".into()))?;
            Ok(VertexGeometry {
                normal: g.normal,
                mean_curvature: g.mean_curvature,
                sigma2: g.sigma2,
            })
        };
        if n == 1 {
            let m = segments.max(3);
            let count = if dom.periodic { m } else { m + 1 };
            for j in 0..count {
                let t = dom.lo + (dom.hi - dom.lo) * T::from_usize_lossy(j) / T::from_usize_lossy(m);
                vertices.push(chart.position([t, T::zero()]));
                geometry.push(vertex_geo([t, T::zero()])?);
                let mark = !dom.periodic
                    && ((j == 0 && dom.lo_end == End::Boundary) || (j == m && dom.hi_end == End::Boundary));
                marks.push(mark);
            }
            let segs = if dom.periodic {
                (0..m).map(|j| [j, (j + 1) % m]).collect()
            } else {
                (0..m).map(|j| [j, j + 1]).collect()
            };
            return Ok(Self::assemble(vertices, Cells::Segments(segs), marks, geometry, true, T::c(super::DEFAULT_TOL_BOUNDARY)));
        }

        let s = segments.max(3);
        let r = rings.max(1);
        let two_pi = T::c(2.0) * T::PI();
        let delta = (dom.hi - dom.lo) * T::c(1e-6);
        // level index -> vertex indices (one entry for a pole)
        let mut levels: Vec<Vec<usize>> = Vec::with_capacity(r + 1);
        for i in 0..=r {
            let th = dom.lo + (dom.hi - dom.lo) * T::from_usize_lossy(i) / T::from_usize_lossy(r);
            let pole = (i == 0 && dom.lo_end == End::Pole) || (i == r && dom.hi_end == End::Pole);
            if pole {
                let off = if i == 0 { th + delta } else { th - delta };
                vertices.push(chart.position([th, T::zero()]));
                geometry.push(vertex_geo([off, T::zero()])?);
                marks.push(false);
                levels.push(vec![vertices.len() - 1]);
                continue;
            }
            let boundary = (i == 0 && dom.lo_end == End::Boundary) || (i == r && dom.hi_end == End::Boundary);
            let mut ring = Vec::with_capacity(s);
            for j in 0..s {
                let ph = two_pi * T::from_usize_lossy(j) / T::from_usize_lossy(s);
                vertices.push(chart.position([th, ph]));
                geometry.push(vertex_geo([th, ph])?);
                marks.push(boundary);
                ring.push(vertices.len() - 1);
            }
            levels.push(ring);
        }
        let mut tris = Vec::new();
        for i in 0..r {
            let (a, b) = (&levels[i], &levels[i + 1]);
            match (a.len(), b.len()) {
                (1, _) => {
                    for j in 0..s {
                        tris.push([a[0], b[j], b[(j + 1) % s]]);
                    }
                }
                (_, 1) => {
                    for j in 0..s {
                        tris.push([a[j], a[(j + 1) % s], b[0]]);
                    }
                }
                _ => {
                    for j in 0..s {
                        let j1 = (j + 1) % s;
                        tris.push([a[j], a[j1], b[j1]]);
                        tris.push([a[j], b[j1], b[j]]);
                    }
                }
            }
        }
        Ok(Self::assemble(vertices, Cells::Triangles(tris), marks, geometry, true, T::c(super::DEFAULT_TOL_BOUNDARY)))
    }

    fn assemble(
        vertices: Vec<Vec3<T>>,
        cells: Cells,
        on_cone_boundary: Vec<bool>,
        geometry: Vec<VertexGeometry<T>>,
        exact_geometry: bool,
        tol_boundary: T,
    ) -> Self {
        let mut mesh = Self {
            vertices,
            cells,
            on_cone_boundary,
            geometry,
            exact_geometry,
            tol_boundary,
            possible_tangency: Vec::new(),
        };
        let topo = mesh.topological_boundary();
        mesh.possible_tangency = (0..mesh.vertices.len())
            .filter(|i| mesh.on_cone_boundary[*i] && !topo.contains(i))
            .collect();
        mesh
    }

    /// Vertices on the topological boundary of the mesh.
    fn topological_boundary(&self) -> BTreeSet<usize> {
        match &self.cells {
            Cells::Segments(segs) => {
                let mut count = vec![0usize; self.vertices.len()];
                for s in segs {
                    count[s[0]] += 1;
                    count[s[1]] += 1;
                }
                (0..count.len()).filter(|i| count[*i] == 1).collect()
            }
            Cells::Triangles(_) => self.boundary_edges().into_iter().flat_map(|(e, _)| [e[0], e[1]]).collect(),
        }
    }

    /// Edges used by exactly one triangle, with the opposite vertex.
    fn boundary_edges(&self) -> Vec<([usize; 2], usize)> {
        let Cells::Triangles(tris) = &self.cells else {
            return Vec::new();
        };
        let mut edges: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for t in tris {
            for k in 0..3 {
                let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                edges.entry(key).and_modify(|e| e.0 += 1).or_insert((1, c));
            }
        }
        edges
            .into_iter()
            .filter(|(_, (count, _))| *count == 1)
            .map(|((a, b), (_, c))| ([a, b], c))
            .collect()
    }

    /// Lumped-weight samples at the vertices and boundary samples at the
    /// vertices on `∂M`.
    pub(crate) fn samples(&self) -> Result<(Vec<SurfaceSample<T>>, Vec<BoundarySample<T>>)> {
        let nv = self.vertices.len();
        let mut weight = vec![T::zero(); nv];
        let v = &self.vertices;
        match &self.cells {
            Cells::Segments(segs) => {
                for s in segs {
                    let l = norm(&sub(&v[s[1]], &v[s[0]])) * T::c(0.5);
                    weight[s[0]] = weight[s[0]] + l;
                    weight[s[1]] = weight[s[1]] + l;
                }
            }
            Cells::Triangles(tris) => {
                for t in tris {
                    let a = norm(&cross(&sub(&v[t[1]], &v[t[0]]), &sub(&v[t[2]], &v[t[0]]))) / T::c(6.0);
                    for i in t {
                        weight[*i] = weight[*i] + a;
                    }
                }
            }
        }
        let samples = (0..nv)
            .map(|i| SurfaceSample {
                param: [T::from_usize_lossy(i), T::zero()],
                point: v[i],
                normal: self.geometry[i].normal,
                mean_curvature: self.geometry[i].mean_curvature,
                sigma2: self.geometry[i].sigma2,
                weight: weight[i],
            })
            .collect();

        let mut boundary = Vec::new();
        match &self.cells {
            Cells::Segments(segs) => {
                let mut nbr: Vec<Vec<usize>> = vec![Vec::new(); nv];
                for s in segs {
                    nbr[s[0]].push(s[1]);
                    nbr[s[1]].push(s[0]);
                }
                for i in 0..nv {
                    if !self.on_cone_boundary[i] || nbr[i].len() != 1 {
                        continue;
                    }
                    let dir = sub(&v[nbr[i][0]], &v[i]);
                    let nrm = self.geometry[i].normal;
                    let t = linalg::axpy(&dir, -dot(&dir, &nrm), &nrm);
                    boundary.push(BoundarySample {
                        param: [T::from_usize_lossy(i), T::zero()],
                        point: v[i],
                        normal: nrm,
                        conormal: linalg::normalize(&t).unwrap_or(t),
                        weight: T::one(),
                        trace: vec![(i, T::one())],
                    });
                }
            }
            Cells::Triangles(_) => {
                let mut len = vec![T::zero(); nv];
                let mut inward = vec![linalg::zero3::<T>(); nv];
                for (e, c) in self.boundary_edges() {
                    let (a, b) = (e[0], e[1]);
                    if !(self.on_cone_boundary[a] && self.on_cone_boundary[b]) {
                        continue;
                    }
                    let edge = sub(&v[b], &v[a]);
                    let l = norm(&edge);
                    let to_c = sub(&v[c], &v[a]);
                    let perp = linalg::axpy(&to_c, -dot(&to_c, &edge) / (l * l), &edge);
                    let perp = linalg::normalize(&perp).unwrap_or(perp);
                    for i in [a, b] {
                        len[i] = len[i] + l * T::c(0.5);
                        inward[i] = linalg::axpy(&inward[i], l, &perp);
                    }
                }
                for i in 0..nv {
                    if len[i] == T::zero() {
                        continue;
                    }
                    let nrm = self.geometry[i].normal;
                    let t = linalg::axpy(&inward[i], -dot(&inward[i], &nrm), &nrm);
                    boundary.push(BoundarySample {
                        param: [T::from_usize_lossy(i), T::zero()],
                        point: v[i],
                        normal: nrm,
                        conormal: linalg::normalize(&t).unwrap_or(t),
                        weight: len[i],
                        trace: vec![(i, T::one())],
                    });
                }
            }
        }
        Ok((samples, boundary))
    }

    fn mark_boundary(vertices: &[Vec3<T>], cone: &SolidCone<T>, tol: T) -> Vec<bool> {
        vertices
            .iter()
            .map(|p| {
                let d = cone.boundary_distance(p);
                d.is_finite() && (norm(p) * d.sin()).abs() <= tol
            })
            .collect()
    }

    /// OBJ subset: `v x y z` and `f i j k ...` (1-based, `i/t/n` forms and
    /// negative indices accepted; polygons are fan-triangulated).
    pub fn parse_obj(text: &str, cone: &SolidCone<T>, tol_boundary: T) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut tris = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let bad = |m: &str| Error::InvalidInput(format!("obj line {}: {m}", lineno + 1));
            match it.next() {
                Some("v") => {
                    let xs: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>().map_err(|_| bad("bad coordinate")))
                        .collect::<Result<_>>()?;
                    if xs.len() != 3 {
                        return Err(bad("vertex needs three coordinates"));
                    }
                    vertices.push([T::c(xs[0]), T::c(xs[1]), T::c(xs[2])]);
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in it {
                        let head = tok.split('/').next().unwrap_or("");
                        let k: i64 = head.parse().map_err(|_| bad("bad face index"))?;
                        let i = if k > 0 {
                            k as usize - 1
                        } else if k < 0 && (-k) as usize <= vertices.len() {
                            vertices.len() - (-k) as usize
                        } else {
                            return Err(bad("face index out of range"));
                        };
                        idx.push(i);
                    }
                    if idx.len() < 3 {
                        return Err(bad("face needs three vertices"));
                    }
                    for j in 1..idx.len() - 1 {
                        tris.push([idx[0], idx[j], idx[j + 1]]);
                    }
                }
                _ => {}
            }
        }
        if vertices.is_empty() || tris.is_empty() {
            return Err(Error::InvalidInput("obj has no faces".into()));
        }
        if tris.iter().flatten().any(|i| *i >= vertices.len()) {
            return Err(Error::InvalidInput("face index out of range".into()));
        }
        if cone.ambient_dim() != 3 {
            return Err(Error::InvalidInput("triangle meshes need a spatial cone".into()));
        }
        let marks = Self::mark_boundary(&vertices, cone, tol_boundary);
        let geometry = estimate_triangle_geometry(&vertices, &tris);
        Ok(Self::assemble(vertices, Cells::Triangles(tris), marks, geometry, false, tol_boundary))
    }

    /// Two-column CSV polyline; a header row is skipped.
    pub fn parse_csv(text: &str, cone: &SolidCone<T>, tol_boundary: T) -> Result<Self> {
        let mut pts: Vec<Vec3<T>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse::<f64>().ok()).collect();
            match parsed {
                Some(xs) if xs.len() == 2 => pts.push([T::c(xs[0]), T::c(xs[1]), T::zero()]),
                _ if pts.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(Error::InvalidInput(format!("csv line {}: expected two numbers", lineno + 1)));
                }
            }
        }
        if cone.ambient_dim() != 2 {
            return Err(Error::InvalidInput("polylines need a planar cone".into()));
        }
        let closed = pts.len() > 3 && norm(&sub(&pts[0], &pts[pts.len() - 1])) <= T::c(1e-12);
        if closed {
            pts.pop();
        }
        if pts.len() < 3 {
            return Err(Error::InvalidInput("polyline needs at least three points".into()));
        }
        let m = pts.len();
        let segs: Vec<[usize; 2]> = if closed {
            (0..m).map(|j| [j, (j + 1) % m]).collect()
        } else {
            (0..m - 1).map(|j| [j, j + 1]).collect()
        };
        let marks = Self::mark_boundary(&pts, cone, tol_boundary);
        let geometry = estimate_polyline_geometry(&pts, closed);
        Ok(Self::assemble(pts, Cells::Segments(segs), marks, geometry, false, tol_boundary))
    }
}

/// Curvature from the circle through three consecutive points, evaluated
/// at the middle (or end) point.
fn estimate_polyline_geometry<T: Real>(pts: &[Vec3<T>], closed: bool) -> Vec<VertexGeometry<T>> {
    let m = pts.len();
    (0..m)
        .map(|i| {
            let (a, b, c) = if closed {
                ((i + m - 1) % m, i, (i + 1) % m)
            } else if i == 0 {
                (0, 1, 2)
            } else if i == m - 1 {
                (m - 3, m - 2, m - 1)
            } else {
                (i - 1, i, i + 1)
            };
            let p = pts[i];
            let travel = sub(&pts[c], &pts[a]);
            match circumcenter(&pts[a], &pts[b], &pts[c]) {
                Some(center) => {
                    let radial = sub(&center, &p);
                    let rr = dot(&radial, &radial);
                    let mut t = [-radial[1], radial[0], T::zero()];
                    if dot(&t, &travel) < T::zero() {
                        t = linalg::scale(-T::one(), &t);
                    }
                    let t = linalg::normalize(&t).unwrap_or(t);
                    let normal = [-t[1], t[0], T::zero()];
                    let h = dot(&radial, &normal) / rr;
                    VertexGeometry {
                        normal,
                        mean_curvature: h,
                        sigma2: h * h,
                    }
                }
                None => {
                    let t = linalg::normalize(&travel).unwrap_or(travel);
                    VertexGeometry {
                        normal: [-t[1], t[0], T::zero()],
                        mean_curvature: T::zero(),
                        sigma2: T::zero(),
                    }
                }
            }
        })
        .collect()
}

fn circumcenter<T: Real>(a: &Vec3<T>, b: &Vec3<T>, c: &Vec3<T>) -> Option<Vec3<T>> {
    let u = sub(b, a);
    let v = sub(c, a);
    let w = cross(&u, &v);
    let ww = dot(&w, &w);
    let scale = dot(&u, &u) * dot(&v, &v);
    if ww <= T::c(1e-24) * scale {
        return None;
    }
    let term = linalg::add(
        &linalg::scale(dot(&u, &u), &cross(&v, &w)),
        &linalg::scale(dot(&v, &v), &cross(&w, &u)),
    );
    Some(linalg::axpy(a, T::one() / (T::c(2.0) * ww), &term))
}

/// Area-weighted normals and curvatures from a local quadric fit
/// `z = a x² + b xy + c y² + d x + e y` over the vertex neighborhood.
fn estimate_triangle_geometry<T: Real>(v: &[Vec3<T>], tris: &[[usize; 3]]) -> Vec<VertexGeometry<T>> {
    let nv = v.len();
    let mut normals = vec![linalg::zero3::<T>(); nv];
    let mut ring: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nv];
    for t in tris {
        let nrm = cross(&sub(&v[t[1]], &v[t[0]]), &sub(&v[t[2]], &v[t[0]]));
        for k in 0..3 {
            normals[t[k]] = linalg::add(&normals[t[k]], &nrm);
            ring[t[k]].insert(t[(k + 1) % 3]);
            ring[t[k]].insert(t[(k + 2) % 3]);
        }
    }
    (0..nv)
        .map(|i| {
            let normal = linalg::normalize(&normals[i]).unwrap_or([T::zero(), T::zero(), T::one()]);
            let mut nbrs: BTreeSet<usize> = ring[i].clone();
            if nbrs.len() < 6 {
                for j in ring[i].iter() {
                    nbrs.extend(ring[*j].iter().copied());
                }
                nbrs.remove(&i);
            }
            let (t1, t2) = linalg::orthonormal_frame(&normal);
            let mut ata = DMatrix::<T>::zeros(5, 5);
            let mut atb = vec![T::zero(); 5];
            for j in &nbrs {
                let w = sub(&v[*j], &v[i]);
                let (x, y, z) = (dot(&w, &t1), dot(&w, &t2), dot(&w, &normal));
                let row = [x * x, x * y, y * y, x, y];
                for a in 0..5 {
                    atb[a] = atb[a] + row[a] * z;
                    for b in 0..5 {
                        ata[(a, b)] = ata[(a, b)] + row[a] * row[b];
                    }
                }
            }
            let coef = if nbrs.len() >= 5 { ata.solve(&atb).ok() } else { None };
            let Some(c) = coef else {
                return VertexGeometry {
                    normal,
                    mean_curvature: T::zero(),
                    sigma2: T::zero(),
                };
            };
            let (d, e) = (c[3], c[4]);
            let q = (T::one() + d * d + e * e).sqrt();
            let h = [[T::c(2.0) * c[0] / q, c[1] / q], [c[1] / q, T::c(2.0) * c[2] / q]];
            let g = [[T::one() + d * d, d * e], [d * e, T::one() + e * e]];
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            let inv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
            let mut s = [[T::zero(); 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] = inv[a][0] * h[0][b] + inv[a][1] * h[1][b];
                }
            }
            let tr = s[0][0] + s[1][1];
            let tr2 = s[0][0] * s[0][0] + T::c(2.0) * s[0][1] * s[1][0] + s[1][1] * s[1][1];
            // the fitted graph normal differs from the vertex normal by the slope
            let graph_normal = linalg::normalize(&linalg::add(
                &normal,
                &linalg::add(&linalg::scale(-d, &t1), &linalg::scale(-e, &t2)),
            ))
            .unwrap_or(normal);
            VertexGeometry {
                normal: graph_normal,
                mean_curvature: tr / T::c(2.0),
                sigma2: tr2,
            }
        })
        .collect()
}
