use crate::aggregate::{BlendParams, SupportView};
use crate::distance::distance_transform;
use crate::image_buf::ScalarField;
use crate::mesh::{bbox2, edge, TriangleMesh, Vec2, Vec3};
use crate::texture::TextureMap;

/// Gray assigned to texels no view observes.
pub const UNOBSERVED: f64 = 0.5;

/// Surface point behind one texel.
#[derive(Clone, Copy, Debug)]
pub struct TexelSample {
    pub texel: usize,
    pub face: usize,
    pub position: Vec3,
    pub normal: Vec3,
}

/// Surface samples at texel centers covered by a UV triangle. A texel inside
/// several charts belongs to the lowest face index.
pub fn texel_samples(mesh: &TriangleMesh, width: usize, height: usize) -> Vec<TexelSample> {
    let mut owner = vec![false; width * height];
    let mut out = Vec::new();
    for f in 0..mesh.face_count() {
        let p = mesh.corner_uvs[f].map(|uv| Vec2::new(uv.x * width as f64, (1.0 - uv.y) * height as f64));
        let area = edge(p[0], p[1], p[2]);
        if area.abs() < 1e-12 {
            continue;
        }
        let idx = mesh.faces[f];
        let pos = idx.map(|v| mesh.vertices[v]);
        let nrm = mesh.shading_normals(f);
        let (x0, x1, y0, y1) = bbox2(&p, width, height);
        for y in y0..y1 {
            for x in x0..x1 {
                let t = y * width + x;
                if owner[t] {
                    continue;
                }
                let c = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
                let b = [
                    edge(p[1], p[2], c) / area,
                    edge(p[2], p[0], c) / area,
                    edge(p[0], p[1], c) / area,
                ];
                if b.iter().any(|&v| v < 0.0) {
                    continue;
                }
                owner[t] = true;
                let n = nrm[0] * b[0] + nrm[1] * b[1] + nrm[2] * b[2];
                out.push(TexelSample {
                    texel: t,
                    face: f,
                    position: pos[0] * b[0] + pos[1] * b[1] + pos[2] * b[2],
                    normal: if n.norm() > 1e-12 { n.normalize() } else { Vec3::z() },
                });
            }
        }
    }
    out.sort_by_key(|s| s.texel);
    out
}

/// Initial texture: every covered texel blends the reprojected colors of the
/// views that see its surface point. Weights follow the view aggregation:
/// exponential decay in the angle to the view axis, times a power of the
/// distance to the view's silhouette edge.
pub fn bake_initial_texture(
    mesh: &TriangleMesh,
    views: &[SupportView],
    width: usize,
    height: usize,
    params: &BlendParams,
) -> TextureMap {
    let mut tex = TextureMap::new(width, height, [UNOBSERVED; 3]);
    if views.is_empty() {
        return tex;
    }
    let prepared: Vec<(nalgebra::Matrix3<f64>, ScalarField)> = views
        .iter()
        .map(|v| (v.camera.rotation(), distance_transform(&v.buffers.silhouette())))
        .collect();
    for s in texel_samples(mesh, width, height) {
        let mut acc = [0.0; 3];
        let mut total = 0.0;
        for (view, (rot, dist)) in views.iter().zip(&prepared) {
            let (px, py, depth) = view.camera.project_with(rot, &s.position);
            if !view.camera.in_bounds(px, py) {
                continue;
            }
            let (ix, iy) = (px.floor() as usize, py.floor() as usize);
            let pixel = iy * view.buffers.width + ix;
            if !view.buffers.covered(pixel) {
                continue;
            }
            let same_face = view.buffers.face_id[pixel] as usize == s.face;
            let depth_tol = 2.0 / view.camera.scale;
            if !same_face && (depth - view.buffers.depth[pixel]).abs() > depth_tol {
                continue;
            }
            let facing = (rot * s.normal).z;
            if facing <= 0.0 {
                continue;
            }
            let phi = facing.clamp(-1.0, 1.0).acos();
            let w = (-params.alpha * phi).exp() * dist.data[pixel].powf(params.beta);
            if w <= 0.0 {
                continue;
            }
            let c = view.sample_surface(px, py);
            for k in 0..3 {
                acc[k] += w * c[k];
            }
            total += w;
        }
        if total > 0.0 {
            tex.texels[s.texel] = acc.map(|a| (a / total).clamp(0.0, 1.0));
        }
    }
    tex
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{make_turntable_camera, RenderSettings};
    use crate::image_buf::ColorImage;
    use crate::mesh::{generate_test_mesh, MeshKind};
    use crate::raster::render_textured;

    #[test]
    fn no_views_gives_gray() {
        let mesh = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        let tex = bake_initial_texture(&mesh, &[], 8, 8, &BlendParams::default());
        assert!(tex.texels.iter().all(|t| *t == [0.5; 3]));
    }

    #[test]
    fn duplicate_views_change_nothing() {
        let mesh = generate_test_mesh(MeshKind::UvSphere, 12).unwrap();
        let gt = TextureMap::from_image(ColorImage::from_fn(32, 32, |x, y| {
            [x as f64 / 31.0, y as f64 / 31.0, 0.3]
        }));
        let cam = make_turntable_camera(20.0, &RenderSettings::square(64));
        let view = SupportView::new(&mesh, cam, render_textured(&mesh, &gt, &cam)).unwrap();
        let one = bake_initial_texture(&mesh, std::slice::from_ref(&view), 32, 32, &BlendParams::default());
        let two = bake_initial_texture(&mesh, &[view.clone(), view], 32, 32, &BlendParams::default());
        for (a, b) in one.texels.iter().zip(&two.texels) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn front_face_texels_recover_the_view() {
        // Cube front face seen head-on: each baked texel equals the view
        // sampled at the texel's projection.
        let mesh = generate_test_mesh(MeshKind::Cube, 1).unwrap();
        let gt = TextureMap::new(16, 16, [0.9, 0.1, 0.2]);
        let cam = make_turntable_camera(0.0, &RenderSettings::square(64));
        let view = SupportView::new(&mesh, cam, render_textured(&mesh, &gt, &cam)).unwrap();
        let tex = bake_initial_texture(&mesh, std::slice::from_ref(&view), 16, 16, &BlendParams::default());
        let front: Vec<_> = texel_samples(&mesh, 16, 16)
            .into_iter()
            .filter(|s| mesh.face_normal_weighted(s.face).z > 0.0)
            .collect();
        assert!(!front.is_empty());
        for s in front {
            let (px, py, _) = cam.project(&s.position);
            let expected = view.sample_surface(px, py);
            let got = tex.texels[s.texel];
            for k in 0..3 {
                assert!((got[k] - expected[k]).abs() < 1e-12);
            }
        }
    }
}
