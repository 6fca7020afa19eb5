//! Deterministic z-buffer rasterizer producing the per-view geometry buffers.
//!
//! One sample per pixel at pixel centers, no culling, no anti-aliasing. Edges
//! shared by two triangles are owned by exactly one of them (top-left style
//! tie rule). Depth ties keep the lower face index.

use std::collections::BTreeSet;

use crate::camera::Camera;
use crate::image_buf::{ColorImage, Mask, WHITE};
use crate::mesh::{edge, TriangleMesh, Vec2, Vec3};
use crate::texture::TextureMap;

pub const SENTINEL_EMPTY: u32 = u32::MAX;

/// Screen-space triangles below this doubled area (px²) are skipped.
const MIN_SCREEN_AREA: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ViewBuffers {
    pub width: usize,
    pub height: usize,
    pub face_id: Vec<u32>,
    pub depth: Vec<f64>,
    pub world_pos: Vec<Vec3>,
    pub world_normal: Vec<Vec3>,
    pub uv: Vec<Vec2>,
}

impl ViewBuffers {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            face_id: vec![SENTINEL_EMPTY; n],
            depth: vec![f64::INFINITY; n],
            world_pos: vec![Vec3::zeros(); n],
            world_normal: vec![Vec3::zeros(); n],
            uv: vec![Vec2::zeros(); n],
        }
    }

    #[inline]
    pub fn covered(&self, idx: usize) -> bool {
        self.face_id[idx] != SENTINEL_EMPTY
    }

    pub fn silhouette(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.face_id.iter().map(|&f| f != SENTINEL_EMPTY).collect(),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Edge function evaluated with the endpoints in a fixed order, so the two
/// triangles sharing an edge see exactly negated values and the tie rule
/// assigns on-edge pixels to exactly one of them.
#[inline]
fn shared_edge(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    if (a.x, a.y) > (b.x, b.y) {
        -edge(b, a, p)
    } else {
        edge(a, b, p)
    }
}

pub fn rasterize(mesh: &TriangleMesh, camera: &Camera) -> ViewBuffers {
    let (w, h) = (camera.width, camera.height);
    let mut buf = ViewBuffers::empty(w, h);
    let rot = camera.rotation();
    let projected: Vec<(f64, f64, f64)> = mesh.vertices.iter().map(|v| camera.project_with(&rot, v)).collect();

    for (fi, face) in mesh.faces.iter().enumerate() {
        let mut order = [0usize, 1, 2];
        let mut s = order.map(|k| Vec2::new(projected[face[k]].0, projected[face[k]].1));
        let mut area = edge(s[0], s[1], s[2]);
        if area.abs() < MIN_SCREEN_AREA {
            continue;
        }
        if area < 0.0 {
            order.swap(1, 2);
            s.swap(1, 2);
            area = -area;
        }
        let corner = order.map(|k| face[k]);
        let depth = corner.map(|v| projected[v].2);
        let pos = corner.map(|v| mesh.vertices[v]);
        let shading = mesh.shading_normals(fi);
        let nrm = order.map(|k| shading[k]);
        let uvs = order.map(|k| mesh.corner_uvs[fi][k]);
        // Edge k is opposite vertex k: from s[k+1] to s[k+2].
        let owns_zero = [0, 1, 2].map(|k| {
            let (a, b) = (s[(k + 1) % 3], s[(k + 2) % 3]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            dy > 0.0 || (dy == 0.0 && dx > 0.0)
        });

        let (x0, x1, y0, y1) = crate::mesh::bbox2(&s, w, h);
        for py in y0..y1 {
            for px in x0..x1 {
                let c = Vec2::new(px as f64 + 0.5, py as f64 + 0.5);
                let e = [
                    shared_edge(s[1], s[2], c),
                    shared_edge(s[2], s[0], c),
                    shared_edge(s[0], s[1], c),
                ];
                if (0..3).any(|k| e[k] < 0.0 || (e[k] == 0.0 && !owns_zero[k])) {
                    continue;
                }
                let b = e.map(|v| v / area);
                let z = b[0] * depth[0] + b[1] * depth[1] + b[2] * depth[2];
                let idx = py * w + px;
                if z >= buf.depth[idx] {
                    continue;
                }
                buf.depth[idx] = z;
                buf.face_id[idx] = fi as u32;
                buf.world_pos[idx] = pos[0] * b[0] + pos[1] * b[1] + pos[2] * b[2];
                let n = nrm[0] * b[0] + nrm[1] * b[1] + nrm[2] * b[2];
                let len = n.norm();
                buf.world_normal[idx] = if len > 1e-12 {
                    n / len
                } else {
                    mesh.face_normal_weighted(fi).normalize()
                };
                let uv = uvs[0] * b[0] + uvs[1] * b[1] + uvs[2] * b[2];
                buf.uv[idx] = Vec2::new(uv.x.clamp(0.0, 1.0), uv.y.clamp(0.0, 1.0));
            }
        }
    }
    buf
}

/// Camera-space normals encoded as `round(255 (n + 1) / 2)`; background mid-gray.
pub fn render_normal_map(buffers: &ViewBuffers, camera: &Camera) -> image::RgbImage {
    let rot = camera.rotation();
    let mut out = image::RgbImage::from_pixel(buffers.width as u32, buffers.height as u32, image::Rgb([128, 128, 128]));
    for (idx, px) in out.pixels_mut().enumerate() {
        if buffers.covered(idx) {
            let n = rot * buffers.world_normal[idx];
            px.0 = [0, 1, 2].map(|k| (255.0 * (n[k].clamp(-1.0, 1.0) + 1.0) / 2.0).round() as u8);
        }
    }
    out
}

pub fn render_silhouette(buffers: &ViewBuffers) -> image::GrayImage {
    buffers.silhouette().to_gray8()
}

/// Texture lookup per covered pixel; white elsewhere.
pub fn shade_textured(buffers: &ViewBuffers, texture: &TextureMap) -> ColorImage {
    let mut out = ColorImage::new(buffers.width, buffers.height, WHITE);
    for idx in 0..buffers.pixel_count() {
        if buffers.covered(idx) {
            out.pixels[idx] = texture.sample(buffers.uv[idx]);
        }
    }
    out
}

pub fn render_textured(mesh: &TriangleMesh, texture: &TextureMap, camera: &Camera) -> ColorImage {
    shade_textured(&rasterize(mesh, camera), texture)
}

pub fn visible_face_set(buffers: &ViewBuffers) -> BTreeSet<usize> {
    buffers
        .face_id
        .iter()
        .filter(|&&f| f != SENTINEL_EMPTY)
        .map(|&f| f as usize)
        .collect()
}

/// Membership table over face indices for per-pixel lookups.
pub fn face_membership(faces: &BTreeSet<usize>, face_count: usize) -> Vec<bool> {
    let mut table = vec![false; face_count];
    for &f in faces {
        if f < face_count {
            table[f] = true;
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{make_turntable_camera, RenderSettings};
    use crate::mesh::{generate_test_mesh, MeshKind};

    fn settings(size: usize) -> RenderSettings {
        RenderSettings::square(size)
    }

    #[test]
    fn empty_mesh_gives_sentinel_buffers() {
        let cam = make_turntable_camera(0.0, &settings(32));
        let buf = rasterize(&TriangleMesh::empty(), &cam);
        assert!(buf.face_id.iter().all(|&f| f == SENTINEL_EMPTY));
        assert!(render_silhouette(&buf).pixels().all(|p| p.0[0] == 0));
        assert!(visible_face_set(&buf).is_empty());
    }

    #[test]
    fn nearer_triangle_wins() {
        let verts = vec![
            Vec3::new(-1.0, -1.0, 0.2),
            Vec3::new(1.0, -1.0, 0.2),
            Vec3::new(0.0, 1.0, 0.2),
            Vec3::new(-1.0, -1.0, -0.5),
            Vec3::new(1.0, -1.0, -0.5),
            Vec3::new(0.0, 1.0, -0.5),
        ];
        // Far triangle listed first so index order cannot explain the result.
        let mesh = TriangleMesh::new(verts, vec![[3, 4, 5], [0, 1, 2]], vec![[Vec2::zeros(); 3]; 2]).unwrap();
        let buf = rasterize(&mesh, &make_turntable_camera(0.0, &settings(64)));
        let covered: Vec<u32> = buf.face_id.iter().copied().filter(|&f| f != SENTINEL_EMPTY).collect();
        assert!(!covered.is_empty());
        assert!(covered.iter().all(|&f| f == 1));
    }

    #[test]
    fn cube_front_is_two_triangles_and_uniform_normal() {
        let mesh = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        let cam = make_turntable_camera(0.0, &settings(128));
        let buf = rasterize(&mesh, &cam);
        let visible = visible_face_set(&buf);
        assert_eq!(visible.len(), 2);
        for &f in &visible {
            assert!(mesh.face_normal_weighted(f).normalize().z > 0.999);
        }
        let nm = render_normal_map(&buf, &cam);
        for (idx, p) in nm.pixels().enumerate() {
            if buf.covered(idx) {
                assert_eq!(p.0, [128, 128, 255]);
            } else {
                assert_eq!(p.0, [128, 128, 128]);
            }
        }
    }

    #[test]
    fn buffer_invariants_hold() {
        for kind in [MeshKind::UvSphere, MeshKind::Capsule, MeshKind::Cube] {
            let mesh = generate_test_mesh(kind, 8).unwrap();
            for az in [0.0, 33.0, 135.0] {
                let cam = make_turntable_camera(az, &settings(96));
                let buf = rasterize(&mesh, &cam);
                let rot = cam.rotation();
                for i in 0..buf.pixel_count() {
                    if !buf.covered(i) {
                        continue;
                    }
                    assert!((buf.world_normal[i].norm() - 1.0).abs() < 1e-4);
                    let uv = buf.uv[i];
                    assert!((0.0..=1.0).contains(&uv.x) && (0.0..=1.0).contains(&uv.y));
                    let d = -(rot * buf.world_pos[i]).z;
                    assert!((d - buf.depth[i]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn normal_encoding_of_side_normal() {
        let mesh = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        // At azimuth 45 the +X face has camera-space normal (cos 45°, 0, sin 45°).
        let cam = make_turntable_camera(45.0, &settings(64));
        let buf = rasterize(&mesh, &cam);
        let nm = render_normal_map(&buf, &cam);
        let mut seen = false;
        for (idx, p) in nm.pixels().enumerate() {
            if buf.covered(idx) && mesh.face_normal_weighted(buf.face_id[idx] as usize).normalize().x > 0.99 {
                let e = (255.0 * (std::f64::consts::FRAC_1_SQRT_2 + 1.0) / 2.0).round() as u8;
                assert_eq!(p.0, [e, 128, e]);
                seen = true;
            }
        }
        assert!(seen);
    }

    #[test]
    fn constant_texture_renders_constant() {
        let mesh = generate_test_mesh(MeshKind::UvSphere, 8).unwrap();
        let tex = TextureMap::new(8, 8, [1.0, 0.0, 0.0]);
        let cam = make_turntable_camera(20.0, &settings(64));
        let img = render_textured(&mesh, &tex, &cam);
        let buf = rasterize(&mesh, &cam);
        for i in 0..buf.pixel_count() {
            let expect = if buf.covered(i) { [1.0, 0.0, 0.0] } else { WHITE };
            for k in 0..3 {
                assert!((img.pixels[i][k] - expect[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rasterization_is_deterministic() {
        let mesh = generate_test_mesh(MeshKind::Capsule, 6).unwrap();
        let cam = make_turntable_camera(-60.0, &settings(80));
        assert_eq!(rasterize(&mesh, &cam), rasterize(&mesh, &cam));
    }
}
