//! Procedural watertight test meshes with non-overlapping UV atlases.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use super::{TriangleMesh, Vec2, Vec3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    UvSphere,
    Cube,
    Capsule,
}

impl FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uv_sphere" | "sphere" => Ok(MeshKind::UvSphere),
            "cube" => Ok(MeshKind::Cube),
            "capsule" => Ok(MeshKind::Capsule),
            other => Err(Error::UnknownMeshKind(other.to_string())),
        }
    }
}

impl std::fmt::Display for MeshKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeshKind::UvSphere => "uv_sphere",
            MeshKind::Cube => "cube",
            MeshKind::Capsule => "capsule",
        })
    }
}

pub fn generate_test_mesh(kind: MeshKind, subdivision: usize) -> Result<TriangleMesh> {
    if subdivision == 0 {
        return Err(Error::InvalidMesh("subdivision must be at least 1".into()));
    }
    let mut b = Builder::default();
    match kind {
        MeshKind::UvSphere => uv_sphere(&mut b, subdivision.max(3)),
        MeshKind::Cube => cube(&mut b, subdivision),
        MeshKind::Capsule => capsule(&mut b, subdivision),
    }
    b.finish()
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    uvs: Vec<[Vec2; 3]>,
}

impl Builder {
    fn vertex(&mut self, p: Vec3) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    /// Adds a triangle, flipping it if needed so the winding faces away from
    /// the origin (all generated shapes are convex and centered).
    fn tri(&mut self, idx: [usize; 3], uv: [Vec2; 3]) {
        let [a, b, c] = idx.map(|i| self.vertices[i]);
        let n = (b - a).cross(&(c - a));
        let centroid = (a + b + c) / 3.0;
        if n.dot(&centroid) < 0.0 {
            self.faces.push([idx[0], idx[2], idx[1]]);
            self.uvs.push([uv[0], uv[2], uv[1]]);
        } else {
            self.faces.push(idx);
            self.uvs.push(uv);
        }
    }

    fn quad(&mut self, idx: [usize; 4], uv: [Vec2; 4]) {
        self.tri([idx[0], idx[1], idx[2]], [uv[0], uv[1], uv[2]]);
        self.tri([idx[0], idx[2], idx[3]], [uv[0], uv[2], uv[3]]);
    }

    fn finish(self) -> Result<TriangleMesh> {
        Ok(TriangleMesh::new(self.vertices, self.faces, self.uvs)?.normalized())
    }
}

/// Poles on ±Y, longitude 0 facing +Z; equirectangular UVs whose seam column
/// appears at both u = 0 and u = 1.
fn uv_sphere(b: &mut Builder, n: usize) {
    let north = b.vertex(Vec3::new(0.0, 1.0, 0.0));
    let mut rings = Vec::new();
    for i in 1..n {
        let theta = PI * i as f64 / n as f64;
        let ring: Vec<usize> = (0..n)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / n as f64;
                b.vertex(Vec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos()))
            })
            .collect();
        rings.push(ring);
    }
    let south = b.vertex(Vec3::new(0.0, -1.0, 0.0));
    let uv = |i: usize, j: usize| Vec2::new(j as f64 / n as f64, 1.0 - i as f64 / n as f64);
    for j in 0..n {
        let jn = (j + 1) % n;
        let pole_u = (j as f64 + 0.5) / n as f64;
        b.tri(
            [north, rings[0][j], rings[0][jn]],
            [Vec2::new(pole_u, 1.0), uv(1, j), uv(1, j + 1)],
        );
        b.tri(
            [south, rings[n - 2][j], rings[n - 2][jn]],
            [Vec2::new(pole_u, 0.0), uv(n - 1, j), uv(n - 1, j + 1)],
        );
        for i in 1..n - 1 {
            b.quad(
                [rings[i - 1][j], rings[i][j], rings[i][jn], rings[i - 1][jn]],
                [uv(i, j), uv(i + 1, j), uv(i + 1, j + 1), uv(i, j + 1)],
            );
        }
    }
}

/// Six charts in a 3×2 grid; each cube face is a `k`×`k` grid of quads.
fn cube(b: &mut Builder, k: usize) {
    // (normal, s axis, t axis): s/t chosen so each face reads upright from outside.
    let sides: [([f64; 3], [f64; 3], [f64; 3]); 6] = [
        ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        ([1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]),
        ([0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
        ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
        ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
    ];
    const PAD: f64 = 0.02;
    let mut lattice: HashMap<[i64; 3], usize> = HashMap::new();
    for (chart, (n, s, t)) in sides.iter().enumerate() {
        let (n, s, t) = (Vec3::from(*n), Vec3::from(*s), Vec3::from(*t));
        let (col, row) = ((chart % 3) as f64, (chart / 3) as f64);
        let mut grid = vec![vec![0usize; k + 1]; k + 1];
        let mut uv = vec![vec![Vec2::zeros(); k + 1]; k + 1];
        for (a, grid_row) in grid.iter_mut().enumerate() {
            for (c, slot) in grid_row.iter_mut().enumerate() {
                let (fs, ft) = (a as f64 / k as f64, c as f64 / k as f64);
                let p = n + s * (2.0 * fs - 1.0) + t * (2.0 * ft - 1.0);
                let key = [0, 1, 2].map(|d| ((p[d] + 1.0) * 0.5 * k as f64).round() as i64);
                *slot = *lattice.entry(key).or_insert_with(|| b.vertex(p));
                uv[a][c] = Vec2::new(
                    (col + PAD + fs * (1.0 - 2.0 * PAD)) / 3.0,
                    (row + PAD + ft * (1.0 - 2.0 * PAD)) / 2.0,
                );
            }
        }
        for a in 0..k {
            for c in 0..k {
                b.quad(
                    [grid[a][c], grid[a + 1][c], grid[a + 1][c + 1], grid[a][c + 1]],
                    [uv[a][c], uv[a + 1][c], uv[a + 1][c + 1], uv[a][c + 1]],
                );
            }
        }
    }
}

/// Capsule along Y (radius 0.5, total height 2). Charts: the cylinder band in
/// the top half of the atlas, one disc per hemispherical cap in the bottom half.
fn capsule(b: &mut Builder, n: usize) {
    const RADIUS: f64 = 0.5;
    const HALF: f64 = 0.5;
    const PAD: f64 = 0.02;
    let around = (2 * n).max(3);
    let cap_rings = (n / 2).max(1);
    let body_bands = (n / 2).max(1);

    #[derive(Clone, Copy)]
    enum Chart {
        Top,
        Body,
        Bottom,
    }
    // Rings from top to bottom: (y, rho, polar angle from the nearer cap pole)
    let mut rings: Vec<(f64, f64, f64)> = Vec::new();
    for i in 1..=cap_rings {
        let th = FRAC_PI_2 * i as f64 / cap_rings as f64;
        rings.push((HALF + RADIUS * th.cos(), RADIUS * th.sin(), th));
    }
    for k in 1..body_bands {
        rings.push((HALF - 2.0 * HALF * k as f64 / body_bands as f64, RADIUS, FRAC_PI_2));
    }
    for i in 0..cap_rings {
        let th = FRAC_PI_2 * (cap_rings - i) as f64 / cap_rings as f64;
        rings.push((-HALF - RADIUS * th.cos(), RADIUS * th.sin(), th));
    }
    let top = b.vertex(Vec3::new(0.0, HALF + RADIUS, 0.0));
    let ring_ids: Vec<Vec<usize>> = rings
        .iter()
        .map(|&(y, rho, _)| {
            (0..around)
                .map(|j| {
                    let phi = 2.0 * PI * j as f64 / around as f64;
                    b.vertex(Vec3::new(rho * phi.sin(), y, rho * phi.cos()))
                })
                .collect()
        })
        .collect();
    let bottom = b.vertex(Vec3::new(0.0, -HALF - RADIUS, 0.0));

    let disc = |center: Vec2, polar: f64, j: f64| {
        let r = 0.23 * polar / FRAC_PI_2;
        let phi = 2.0 * PI * j / around as f64;
        center + Vec2::new(r * phi.cos(), r * phi.sin())
    };
    let top_center = Vec2::new(0.25, 0.25);
    let bottom_center = Vec2::new(0.75, 0.25);
    let y_top = HALF;
    let body_uv = |y: f64, j: f64| {
        let u = PAD + (1.0 - 2.0 * PAD) * j / around as f64;
        let v = 0.5 + PAD + (0.5 - 2.0 * PAD) * (y + y_top) / (2.0 * y_top);
        Vec2::new(u, v)
    };
    let uv_of = |chart: Chart, ring: usize, j: usize| -> Vec2 {
        let (y, _, polar) = rings[ring];
        match chart {
            Chart::Top => disc(top_center, polar, j as f64),
            Chart::Bottom => disc(bottom_center, polar, j as f64),
            Chart::Body => body_uv(y, j as f64),
        }
    };

    for j in 0..around {
        let jn = (j + 1) % around;
        b.tri(
            [top, ring_ids[0][j], ring_ids[0][jn]],
            [top_center, uv_of(Chart::Top, 0, j), uv_of(Chart::Top, 0, j + 1)],
        );
        let last = rings.len() - 1;
        b.tri(
            [bottom, ring_ids[last][j], ring_ids[last][jn]],
            [
                bottom_center,
                uv_of(Chart::Bottom, last, j),
                uv_of(Chart::Bottom, last, j + 1),
            ],
        );
        for r in 0..last {
            let chart = if r + 1 < cap_rings {
                Chart::Top
            } else if r + 1 < cap_rings + body_bands {
                Chart::Body
            } else {
                Chart::Bottom
            };
            b.quad(
                [ring_ids[r][j], ring_ids[r + 1][j], ring_ids[r + 1][jn], ring_ids[r][jn]],
                [
                    uv_of(chart, r, j),
                    uv_of(chart, r + 1, j),
                    uv_of(chart, r + 1, j + 1),
                    uv_of(chart, r, j + 1),
                ],
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts() {
        let m = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        assert_eq!(m.vertex_count(), 8);
        assert_eq!(m.face_count(), 12);
        // Six charts: one distinct UV bounding cell per side.
        let mut cells = std::collections::HashSet::new();
        for uvs in &m.corner_uvs {
            let c = (uvs[0] + uvs[1] + uvs[2]) / 3.0;
            cells.insert(((c.x * 3.0) as i32, (c.y * 2.0) as i32));
        }
        assert_eq!(cells.len(), 6);
    }

    #[test]
    fn sphere_area_close_to_analytic() {
        let m = generate_test_mesh(MeshKind::UvSphere, 16).unwrap();
        let area = m.surface_area();
        let exact = 4.0 * PI;
        assert!((area - exact).abs() / exact < 0.05, "area {area}");
        assert_eq!(m.face_count(), 2 * 16 * 15);
    }

    #[test]
    fn all_generated_meshes_are_genus_zero_with_unit_uvs() {
        for kind in [MeshKind::UvSphere, MeshKind::Cube, MeshKind::Capsule] {
            for sub in [1, 2, 3, 8, 16] {
                let m = generate_test_mesh(kind, sub).unwrap();
                assert_eq!(m.euler_characteristic(), 2, "{kind} {sub}");
                for uvs in &m.corner_uvs {
                    for uv in uvs {
                        assert!((0.0..=1.0).contains(&uv.x) && (0.0..=1.0).contains(&uv.y));
                    }
                }
                let max = m.vertices.iter().map(|v| v.abs().max()).fold(0.0, f64::max);
                assert!(max <= 1.0 + 1e-9);
                for n in &m.vertex_normals {
                    assert!((n.norm() - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn atlases_do_not_overlap() {
        for kind in [MeshKind::UvSphere, MeshKind::Cube, MeshKind::Capsule] {
            let m = generate_test_mesh(kind, 8).unwrap();
            let overlap = m.uv_overlap_fraction(512);
            assert!(overlap <= 0.005, "{kind}: overlap {overlap}");
        }
    }

    #[test]
    fn windings_face_outward() {
        for kind in [MeshKind::UvSphere, MeshKind::Cube, MeshKind::Capsule] {
            let m = generate_test_mesh(kind, 4).unwrap();
            for f in 0..m.face_count() {
                let [a, b, c] = m.faces[f].map(|i| m.vertices[i]);
                assert!(m.face_normal_weighted(f).dot(&((a + b + c) / 3.0)) > 0.0);
            }
        }
    }

    #[test]
    fn unknown_kind_and_zero_subdivision_rejected() {
        assert!(matches!("torus".parse::<MeshKind>(), Err(Error::UnknownMeshKind(_))));
        assert!(generate_test_mesh(MeshKind::Cube, 0).is_err());
    }
}
