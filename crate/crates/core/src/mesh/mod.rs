//! Triangle meshes with per-corner UVs.

mod generate;
mod obj;

pub use generate::{generate_test_mesh, MeshKind};
pub use obj::{load_mesh, parse_obj, write_obj};

use std::collections::HashSet;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Incident faces bent more than 45° away from a face are left out of that
/// face's corner normals, so hard edges (cube) shade flat.
const CREASE_COS: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Maps normalized coordinates back to the file's original frame:
/// `original = normalized * scale + center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub center: Vec3,
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            center: Vec3::zeros(),
            scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub corner_uvs: Vec<[Vec2; 3]>,
    pub vertex_normals: Vec<Vec3>,
    /// Shading normal per face corner (vertex normal smoothed within the crease angle).
    pub corner_normals: Vec<[Vec3; 3]>,
    pub normalization: Normalization,
}

impl TriangleMesh {
    /// Validates indices and UVs, then computes vertex normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, corner_uvs: Vec<[Vec2; 3]>) -> Result<Self> {
        if faces.len() != corner_uvs.len() {
            return Err(Error::InvalidMesh(format!(
                "{} faces but {} UV triples",
                faces.len(),
                corner_uvs.len()
            )));
        }
        for (i, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "face {i} references vertex {bad} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
        }
        const UV_TOL: f64 = 1e-6;
        for (i, uvs) in corner_uvs.iter().enumerate() {
            for uv in uvs {
                if !(uv.x >= -UV_TOL && uv.x <= 1.0 + UV_TOL && uv.y >= -UV_TOL && uv.y <= 1.0 + UV_TOL) {
                    return Err(Error::InvalidMesh(format!(
                        "face {i} has UV ({}, {}) outside [0,1]^2; wrapped atlases are not supported",
                        uv.x, uv.y
                    )));
                }
            }
        }
        let corner_uvs = corner_uvs
            .into_iter()
            .map(|uvs| uvs.map(|uv| Vec2::new(uv.x.clamp(0.0, 1.0), uv.y.clamp(0.0, 1.0))))
            .collect();
        let mesh = Self {
            vertex_normals: Vec::new(),
            corner_normals: Vec::new(),
            vertices,
            faces,
            corner_uvs,
            normalization: Normalization::default(),
        };
        Ok(mesh.compute_vertex_normals())
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            corner_uvs: Vec::new(),
            vertex_normals: Vec::new(),
            corner_normals: Vec::new(),
            normalization: Normalization::default(),
        }
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Unnormalized face normal; its length is twice the triangle area.
    pub fn face_normal_weighted(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.faces[face];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_normal_weighted(face).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted vertex normals; vertices without incident area get +Z.
    /// Also refreshes the per-corner shading normals.
    pub fn compute_vertex_normals(mut self) -> Self {
        let weighted: Vec<Vec3> = (0..self.faces.len()).map(|f| self.face_normal_weighted(f)).collect();
        let unit: Vec<Option<Vec3>> = weighted
            .iter()
            .map(|n| {
                let len = n.norm();
                (len > 1e-300 && len.is_finite()).then(|| n / len)
            })
            .collect();
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in face {
                acc[v] += weighted[f];
                incident[v].push(f);
            }
        }
        let normalize_or_z = |n: Vec3| {
            let len = n.norm();
            if len > 1e-300 && len.is_finite() {
                n / len
            } else {
                Vec3::z()
            }
        };
        self.vertex_normals = acc.into_iter().map(normalize_or_z).collect();
        self.corner_normals = (0..self.faces.len())
            .map(|f| {
                self.faces[f].map(|v| match unit[f] {
                    None => self.vertex_normals[v],
                    Some(nf) => {
                        let mut sum = Vec3::zeros();
                        for &g in &incident[v] {
                            if unit[g].is_some_and(|ng| ng.dot(&nf) >= CREASE_COS) {
                                sum += weighted[g];
                            }
                        }
                        normalize_or_z(sum)
                    }
                })
            })
            .collect();
        self
    }

    /// Per-corner shading normals used by the rasterizer.
    pub fn shading_normals(&self, face: usize) -> [Vec3; 3] {
        self.corner_normals[face]
    }

    /// Recenters on the bounding-box center and rescales so the largest
    /// coordinate magnitude is 1. The applied transform is kept for export.
    pub fn normalized(mut self) -> Self {
        if self.vertices.is_empty() {
            return self;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let center = (lo + hi) * 0.5;
        let extent = self
            .vertices
            .iter()
            .map(|v| (v - center).abs().max())
            .fold(0.0, f64::max);
        let scale = if extent > 0.0 { extent } else { 1.0 };
        for v in &mut self.vertices {
            *v = (*v - center) / scale;
        }
        // Compose with any prior normalization.
        let prior = self.normalization;
        self.normalization = Normalization {
            center: prior.center + center * prior.scale,
            scale: prior.scale * scale,
        };
        self.compute_vertex_normals()
    }

    pub fn original_position(&self, v: usize) -> Vec3 {
        self.vertices[v] * self.normalization.scale + self.normalization.center
    }

    pub fn edge_count(&self) -> usize {
        let mut edges = HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// V − E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    /// Fraction of a `grid`×`grid` UV raster covered by more than one face.
    pub fn uv_overlap_fraction(&self, grid: usize) -> f64 {
        let mut hits = vec![0u16; grid * grid];
        for uvs in &self.corner_uvs {
            let p = uvs.map(|uv| Vec2::new(uv.x * grid as f64, uv.y * grid as f64));
            let area = edge(p[0], p[1], p[2]);
            if area.abs() < 1e-18 {
                continue;
            }
            let (x0, x1, y0, y1) = bbox2(&p, grid, grid);
            for y in y0..y1 {
                for x in x0..x1 {
                    let c = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                    let w0 = edge(p[1], p[2], c) / area;
                    let w1 = edge(p[2], p[0], c) / area;
                    let w2 = edge(p[0], p[1], c) / area;
                    // Strict interior so charts sharing an edge are not counted twice.
                    if w0 > 0.0 && w1 > 0.0 && w2 > 0.0 {
                        hits[y * grid + x] = hits[y * grid + x].saturating_add(1);
                    }
                }
            }
        }
        hits.iter().filter(|&&h| h > 1).count() as f64 / (grid * grid) as f64
    }
}

#[inline]
pub(crate) fn edge(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Pixel-index bounding box `[x0, x1) × [y0, y1)` of a 2-D triangle, clipped.
pub(crate) fn bbox2(p: &[Vec2; 3], width: usize, height: usize) -> (usize, usize, usize, usize) {
    let min_x = p.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = p.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max);
    let clip = |v: f64, hi: usize| -> usize { v.max(0.0).min(hi as f64) as usize };
    (
        clip((min_x - 0.5).floor(), width),
        clip((max_x + 0.5).ceil() + 1.0, width),
        clip((min_y - 0.5).floor(), height),
        clip((max_y + 0.5).ceil() + 1.0, height),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn icosphere(subdivisions: usize) -> TriangleMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
                *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::new();
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let uvs = vec![[Vec2::zeros(); 3]; faces.len()];
        TriangleMesh::new(verts, faces, uvs).unwrap()
    }

    #[test]
    fn icosphere_normals_match_analytic_sphere() {
        let mesh = icosphere(2);
        for (v, n) in mesh.vertices.iter().zip(&mesh.vertex_normals) {
            let angle = v.normalize().dot(n).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 2.0, "normal deviates by {angle}°");
        }
    }

    #[test]
    fn isolated_vertex_gets_plus_z() {
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(5.0, 5.0, 5.0),
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2]], vec![[Vec2::zeros(); 3]]).unwrap();
        assert_eq!(mesh.vertex_normals[3], Vec3::z());
    }

    #[test]
    fn degenerate_face_contributes_nothing() {
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
        ];
        let faces = vec![[0, 1, 2], [0, 1, 3]];
        let mesh = TriangleMesh::new(verts, faces, vec![[Vec2::zeros(); 3]; 2]).unwrap();
        assert!((mesh.vertex_normals[0] - Vec3::z()).norm() < 1e-12);
        assert_eq!(mesh.vertex_normals[3], Vec3::z());
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriangleMesh::new(vec![Vec3::zeros()], vec![[0, 1, 2]], vec![[Vec2::zeros(); 3]]);
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn normalization_fits_unit_box() {
        let mesh = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        let scaled: Vec<Vec3> = mesh.vertices.iter().map(|v| v * 5.0 + Vec3::repeat(5.0)).collect();
        let m = TriangleMesh::new(scaled, mesh.faces.clone(), mesh.corner_uvs.clone())
            .unwrap()
            .normalized();
        let max = m.vertices.iter().map(|v| v.abs().max()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        assert!((m.normalization.scale - 5.0).abs() < 1e-12);
        assert!((m.original_position(0) - (mesh.vertices[0] * 5.0 + Vec3::repeat(5.0))).norm() < 1e-12);
    }

    #[test]
    fn cube_corners_shade_flat() {
        let mesh = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        for f in 0..mesh.face_count() {
            let n = mesh.face_normal_weighted(f).normalize();
            for s in mesh.shading_normals(f) {
                assert!((s - n).norm() < 1e-12);
            }
        }
    }
}
