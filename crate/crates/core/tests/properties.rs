use proptest::prelude::*;

use texfuse::aggregate::{pixel_weights, PixelTerm};
use texfuse::camera::{make_turntable_camera, RenderSettings};
use texfuse::distance::distance_transform;
use texfuse::fuse::{Adam, AdamParams, Footprint};
use texfuse::image_buf::{ColorImage, Mask};
use texfuse::inpaint::prompt::{normalize_azimuth, view_label};
use texfuse::mesh::{generate_test_mesh, load_mesh, write_obj, MeshKind, Vec3};
use texfuse::metrics::{psnr, ssim, PSNR_CAP};
use texfuse::raster::rasterize;
use texfuse::texture::TextureMap;

fn term() -> impl Strategy<Value = PixelTerm> {
    (any::<bool>(), any::<bool>(), 0.0..std::f64::consts::PI, 1usize..=2048).prop_map(|(visible, kept, angle, k)| {
        PixelTerm {
            visible,
            kept,
            angle,
            distance: (k as f64).sqrt(),
        }
    })
}

fn mask(max: usize) -> impl Strategy<Value = Mask> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h).prop_map(move |data| Mask {
            width: w,
            height: h,
            data,
        })
    })
}

fn image(w: usize, h: usize) -> impl Strategy<Value = ColorImage> {
    prop::collection::vec(prop::array::uniform3(0.0..=1.0f64), w * h).prop_map(move |pixels| ColorImage {
        width: w,
        height: h,
        pixels,
    })
}

proptest! {
    #[test]
    fn weights_form_a_partition(terms in prop::collection::vec(term(), 1..8), alpha in 0.0..5.0f64, beta in 0.0..3.0f64) {
        let mut out = vec![0.0; terms.len()];
        let known = pixel_weights(&terms, alpha, beta, &mut out);
        let any_usable = terms.iter().any(|t| t.visible && t.kept);
        prop_assert_eq!(known, any_usable);
        for (t, w) in terms.iter().zip(&out) {
            prop_assert!((0.0..=1.0).contains(w));
            if !(t.visible && t.kept) {
                prop_assert_eq!(*w, 0.0);
            }
        }
        let sum: f64 = out.iter().sum();
        if known {
            prop_assert!((sum - 1.0).abs() <= 1e-3, "sum {}", sum);
        } else {
            prop_assert_eq!(sum, 0.0);
        }
    }

    #[test]
    fn weights_follow_their_views(terms in prop::collection::vec(term(), 2..6), shift in 1usize..5) {
        let mut rotated = terms.clone();
        rotated.rotate_left(shift % terms.len());
        let mut a = vec![0.0; terms.len()];
        let mut b = vec![0.0; terms.len()];
        pixel_weights(&terms, 3.0, 2.0, &mut a);
        pixel_weights(&rotated, 3.0, 2.0, &mut b);
        a.rotate_left(shift % terms.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn distance_transform_matches_brute_force(m in mask(14)) {
        let field = distance_transform(&m);
        let unset: Vec<(i64, i64)> = (0..m.height)
            .flat_map(|y| (0..m.width).map(move |x| (x, y)))
            .filter(|&(x, y)| !m.get(x, y))
            .map(|(x, y)| (x as i64, y as i64))
            .collect();
        for y in 0..m.height {
            for x in 0..m.width {
                let got = field.get(x, y);
                let expected = if !m.get(x, y) {
                    0.0
                } else if unset.is_empty() {
                    (x + 1).min(y + 1).min(m.width - x).min(m.height - y) as f64
                } else {
                    unset
                        .iter()
                        .map(|&(ux, uy)| (((ux - x as i64).pow(2) + (uy - y as i64).pow(2)) as f64).sqrt())
                        .fold(f64::INFINITY, f64::min)
                };
                prop_assert_eq!(got, expected, "at ({}, {})", x, y);
            }
        }
    }

    #[test]
    fn distance_transform_is_one_lipschitz(m in mask(16)) {
        let field = distance_transform(&m);
        for y in 0..m.height {
            for x in 0..m.width {
                let d = field.get(x, y);
                if x + 1 < m.width {
                    prop_assert!((d - field.get(x + 1, y)).abs() <= 1.0 + 1e-12);
                }
                if y + 1 < m.height {
                    prop_assert!((d - field.get(x, y + 1)).abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn psnr_and_ssim_are_symmetric_and_bounded((a, b) in (image(16, 16), image(16, 16))) {
        let ab = psnr(&a, &b, None).unwrap();
        let ba = psnr(&b, &a, None).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab > 0.0 && ab <= PSNR_CAP);
        prop_assert_eq!(psnr(&a, &a, None).unwrap(), PSNR_CAP);

        let s_ab = ssim(&a, &b).unwrap();
        let s_ba = ssim(&b, &a).unwrap();
        prop_assert!((s_ab - s_ba).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&s_ab));
        prop_assert!((ssim(&a, &a).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn adam_respects_the_clamp(
        x0 in prop::collection::vec(0.0..=1.0f64, 1..32),
        seed_grads in prop::collection::vec(-50.0..50.0f64, 32),
        steps in 1usize..20,
    ) {
        let mut x = x0.clone();
        let mut adam = Adam::new(x.len(), AdamParams::default());
        for s in 0..steps {
            let grad: Vec<f64> = (0..x.len()).map(|i| seed_grads[(i + s) % 32]).collect();
            adam.update(&mut x, &grad, Some((0.0, 1.0)));
            prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        prop_assert_eq!(adam.step, steps as u64);
    }

    #[test]
    fn view_label_is_total_and_periodic(az in -2000.0..2000.0f64) {
        let label = view_label(az);
        prop_assert!(["front", "left", "right", "side", "back"].contains(&label));
        prop_assert_eq!(label, view_label(az + 360.0));
        let n = normalize_azimuth(az);
        prop_assert!(n > -180.0 && n <= 180.0);
        if n.abs() < 45.0 {
            prop_assert_eq!(label, "front");
        }
    }

    #[test]
    fn camera_is_periodic_in_azimuth(az in -360.0..360.0f64, p in prop::array::uniform3(-1.0..1.0f64)) {
        let settings = RenderSettings::square(128);
        let a = make_turntable_camera(az, &settings);
        let b = make_turntable_camera(az + 360.0, &settings);
        let v = Vec3::new(p[0], p[1], p[2]);
        let (x0, y0, z0) = a.project(&v);
        let (x1, y1, z1) = b.project(&v);
        prop_assert!((x0 - x1).abs() < 1e-9 && (y0 - y1).abs() < 1e-9 && (z0 - z1).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn footprint_scatter_is_the_adjoint_of_render(
        az in -180.0..180.0f64,
        texels in prop::collection::vec(prop::array::uniform3(0.0..=1.0f64), 16 * 16),
        upstream in prop::collection::vec(prop::array::uniform3(-1.0..=1.0f64), 40 * 40),
    ) {
        let mesh = generate_test_mesh(MeshKind::UvSphere, 8).unwrap();
        let camera = make_turntable_camera(az, &RenderSettings::square(40));
        let buffers = rasterize(&mesh, &camera);
        let footprint = Footprint::full(&buffers, 16, 16);
        let texture = TextureMap { width: 16, height: 16, texels };

        let rendered = footprint.render(&texture);
        let lhs: f64 = footprint
            .pixels
            .iter()
            .map(|&p| (0..3).map(|k| rendered.pixels[p][k] * upstream[p][k]).sum::<f64>())
            .sum();
        let mut masked = vec![[0.0; 3]; upstream.len()];
        for &p in &footprint.pixels {
            masked[p] = upstream[p];
        }
        let mut grad = vec![[0.0; 3]; 16 * 16];
        footprint.scatter(&masked, &mut grad);
        let rhs: f64 = texture
            .texels
            .iter()
            .zip(&grad)
            .map(|(t, g)| (0..3).map(|k| t[k] * g[k]).sum::<f64>())
            .sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn obj_round_trip_preserves_geometry(kind in prop_oneof![Just(MeshKind::UvSphere), Just(MeshKind::Cube), Just(MeshKind::Capsule)], sub in 3usize..10) {
        let mesh = generate_test_mesh(kind, sub).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        write_obj(&mesh, &path, None).unwrap();
        let back = load_mesh(&path).unwrap();
        prop_assert_eq!(back.faces.clone(), mesh.faces.clone());
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            prop_assert!((a - b).norm() < 1e-5);
        }
        for (a, b) in back.corner_uvs.iter().zip(&mesh.corner_uvs) {
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).norm() < 1e-5);
            }
        }
    }
}
