//! Masked reconstruction losses with analytic gradients.
//!
//! The perceptual term is a stand-in for a learned metric: masked L1 averaged
//! over a Gaussian pyramid (5-tap binomial blur, then keep even pixels).
//! A pixel enters level `k + 1` only if every level-`k` pixel under its
//! kernel is masked, so content outside the mask never reaches the loss.

use crate::image_buf::{ColorImage, Mask, Rgb};

const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Masked mean absolute difference over pixels and channels, and its
/// gradient with respect to `a`.
pub fn l1_loss(a: &ColorImage, b: &ColorImage, mask: &Mask) -> (f64, ColorImage) {
    assert_eq!(a.dims(), b.dims(), "l1_loss operands differ in size");
    assert_eq!(a.dims(), (mask.width, mask.height), "l1_loss mask differs in size");
    let mut grad = ColorImage::new(a.width, a.height, [0.0; 3]);
    let loss = masked_l1(&a.pixels, &b.pixels, &mask.data, 1.0, &mut grad.pixels);
    (loss, grad)
}

/// `scale ·` masked mean L1; adds `scale · ∂/∂a` into `grad`.
fn masked_l1(a: &[Rgb], b: &[Rgb], mask: &[bool], scale: f64, grad: &mut [Rgb]) -> f64 {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return 0.0;
    }
    let norm = scale / (3 * count) as f64;
    let mut sum = 0.0;
    for i in 0..a.len() {
        if !mask[i] {
            continue;
        }
        for k in 0..3 {
            let d = a[i][k] - b[i][k];
            sum += d.abs();
            grad[i][k] += norm * sign(d);
        }
    }
    sum * norm
}

/// Blur with the binomial kernel (replicated borders) and keep even pixels.
/// Output size is `ceil(w / 2) × ceil(h / 2)`.
pub fn blur_downsample<T: Copy + Default + Accumulate>(src: &[T], w: usize, h: usize) -> (Vec<T>, usize, usize) {
    let (w2, h2) = (w.div_ceil(2), h.div_ceil(2));
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    // Horizontal pass at even columns only.
    let mut tmp = vec![T::default(); w2 * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x2 in 0..w2 {
            let cx = 2 * x2 as isize;
            let mut acc = T::default();
            for (j, &kw) in KERNEL.iter().enumerate() {
                acc.add_scaled(row[clamp(cx + j as isize - 2, w)], kw);
            }
            tmp[y * w2 + x2] = acc;
        }
    }
    let mut out = vec![T::default(); w2 * h2];
    for y2 in 0..h2 {
        let cy = 2 * y2 as isize;
        for (j, &kw) in KERNEL.iter().enumerate() {
            let sy = clamp(cy + j as isize - 2, h);
            let src_row = &tmp[sy * w2..(sy + 1) * w2];
            let dst_row = &mut out[y2 * w2..(y2 + 1) * w2];
            for (d, &s) in dst_row.iter_mut().zip(src_row) {
                d.add_scaled(s, kw);
            }
        }
    }
    (out, w2, h2)
}

/// Transpose of [`blur_downsample`]: adds the pulled-back gradient of a
/// `ceil(w/2) × ceil(h/2)` image into `dst` (size `w × h`).
fn blur_downsample_transpose(grad: &[Rgb], w: usize, h: usize, dst: &mut [Rgb]) {
    let (w2, h2) = (w.div_ceil(2), h.div_ceil(2));
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![[0.0; 3]; w2 * h];
    for y2 in 0..h2 {
        let cy = 2 * y2 as isize;
        for (j, &kw) in KERNEL.iter().enumerate() {
            let sy = clamp(cy + j as isize - 2, h);
            for x2 in 0..w2 {
                let g = grad[y2 * w2 + x2];
                tmp[sy * w2 + x2].add_scaled(g, kw);
            }
        }
    }
    for y in 0..h {
        for x2 in 0..w2 {
            let g = tmp[y * w2 + x2];
            if g == [0.0; 3] {
                continue;
            }
            let cx = 2 * x2 as isize;
            for (j, &kw) in KERNEL.iter().enumerate() {
                dst[y * w + clamp(cx + j as isize - 2, w)].add_scaled(g, kw);
            }
        }
    }
}

pub trait Accumulate {
    fn add_scaled(&mut self, v: Self, s: f64);
}

impl Accumulate for f64 {
    #[inline]
    fn add_scaled(&mut self, v: f64, s: f64) {
        *self += s * v;
    }
}

impl Accumulate for Rgb {
    #[inline]
    fn add_scaled(&mut self, v: Rgb, s: f64) {
        for k in 0..3 {
            self[k] += s * v[k];
        }
    }
}

/// Largest usable pyramid depth for an image: levels shrink while the
/// smaller side is below `2^levels`, never below one.
pub fn effective_levels(width: usize, height: usize, levels: usize) -> usize {
    let mut levels = levels.max(1);
    while levels > 1 && width.min(height) < (1usize << levels) {
        levels -= 1;
    }
    levels
}

/// One image's pyramid (level 0 is the image itself).
#[derive(Clone, Debug)]
pub struct Pyramid {
    pub levels: Vec<(Vec<Rgb>, usize, usize)>,
}

impl Pyramid {
    pub fn build(img: &[Rgb], w: usize, h: usize, levels: usize) -> Self {
        let mut out = vec![(img.to_vec(), w, h)];
        for _ in 1..levels {
            let (prev, pw, ph) = out.last().expect("level 0 exists");
            let next = blur_downsample(prev, *pw, *ph);
            out.push(next);
        }
        Self { levels: out }
    }
}

/// Masks of every pyramid level.
pub fn mask_pyramid(mask: &Mask, levels: usize) -> Vec<Vec<bool>> {
    let mut out = vec![mask.data.clone()];
    let (mut w, mut h) = (mask.width, mask.height);
    for _ in 1..levels {
        let as_f: Vec<f64> = out
            .last()
            .expect("level 0 exists")
            .iter()
            .map(|&m| if m { 1.0 } else { 0.0 })
            .collect();
        let (blurred, w2, h2) = blur_downsample(&as_f, w, h);
        // Kernel weights are dyadic, so fully masked support sums to exactly 1.
        out.push(blurred.into_iter().map(|v| v >= 1.0).collect());
        w = w2;
        h = h2;
    }
    out
}

/// Precomputed target side of the pyramid loss.
#[derive(Clone, Debug)]
pub struct PyramidTarget {
    pub width: usize,
    pub height: usize,
    pub target: Pyramid,
    pub masks: Vec<Vec<bool>>,
}

impl PyramidTarget {
    pub fn new(target: &ColorImage, mask: &Mask, levels: usize) -> Self {
        assert_eq!(
            target.dims(),
            (mask.width, mask.height),
            "target and mask differ in size"
        );
        Self {
            width: target.width,
            height: target.height,
            target: Pyramid::build(&target.pixels, target.width, target.height, levels),
            masks: mask_pyramid(mask, levels),
        }
    }

    pub fn levels(&self) -> usize {
        self.target.levels.len()
    }

    /// Weighted objective `proxy + lambda · L1` of `a` against the target and
    /// its gradient. Returns `(proxy, l1, gradient)`.
    pub fn evaluate(&self, a: &[Rgb], lambda: f64) -> (f64, f64, Vec<Rgb>) {
        let n = self.levels();
        let level_weight = 1.0 / n as f64;
        let src = Pyramid::build(a, self.width, self.height, n);
        let mut grads: Vec<Vec<Rgb>> = src.levels.iter().map(|(p, _, _)| vec![[0.0; 3]; p.len()]).collect();
        let mut proxy = 0.0;
        for k in 0..n {
            proxy += masked_l1(
                &src.levels[k].0,
                &self.target.levels[k].0,
                &self.masks[k],
                level_weight,
                &mut grads[k],
            );
        }
        let l1 = masked_l1(
            &src.levels[0].0,
            &self.target.levels[0].0,
            &self.masks[0],
            lambda,
            &mut grads[0],
        );
        for k in (1..n).rev() {
            let (_, w, h) = src.levels[k - 1];
            let (upper, lower) = grads.split_at_mut(k);
            blur_downsample_transpose(&lower[0], w, h, &mut upper[k - 1]);
        }
        let l1 = if lambda != 0.0 { l1 / lambda } else { 0.0 };
        (proxy, l1, grads.swap_remove(0))
    }
}

/// Pyramid L1 with `levels` levels (reduced for small images), each level
/// weighted `1 / levels`, and its gradient with respect to `a`.
pub fn perceptual_proxy_loss(a: &ColorImage, b: &ColorImage, mask: &Mask, levels: usize) -> (f64, ColorImage) {
    assert_eq!(a.dims(), b.dims(), "proxy operands differ in size");
    let levels = effective_levels(a.width, a.height, levels);
    let target = PyramidTarget::new(b, mask, levels);
    let (proxy, _, grad) = target.evaluate(&a.pixels, 0.0);
    (
        proxy,
        ColorImage {
            width: a.width,
            height: a.height,
            pixels: grad,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    fn random_image(rng: &mut StdRng, w: usize, h: usize) -> ColorImage {
        ColorImage::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn l1_basics() {
        let a = ColorImage::new(4, 3, [0.5, 0.5, 0.5]);
        let mask = Mask::from_fn(4, 3, |x, _| x < 2);
        let (loss, grad) = l1_loss(&a, &a, &mask);
        assert_eq!(loss, 0.0);
        assert!(grad.pixels.iter().all(|g| *g == [0.0; 3]));
        let b = ColorImage::new(4, 3, [0.0; 3]);
        let (loss, grad) = l1_loss(&a, &b, &mask);
        assert_eq!(loss, 0.5);
        assert_eq!(grad.get(0, 0), [1.0 / 18.0; 3]);
        assert_eq!(grad.get(3, 0), [0.0; 3]);
    }

    #[test]
    fn l1_matches_direct_sum() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_image(&mut rng, 9, 7);
        let b = random_image(&mut rng, 9, 7);
        let mask = Mask::from_fn(9, 7, |x, y| (x * 3 + y) % 4 != 0);
        let mut sum = 0.0;
        let mut n = 0;
        for i in 0..63 {
            if mask.data[i] {
                for k in 0..3 {
                    sum += (a.pixels[i][k] - b.pixels[i][k]).abs();
                    n += 1;
                }
            }
        }
        assert!((l1_loss(&a, &b, &mask).0 - sum / n as f64).abs() < 1e-7);
    }

    #[test]
    fn proxy_zero_on_equal_images() {
        let mut rng = StdRng::seed_from_u64(4);
        let a = random_image(&mut rng, 16, 16);
        let (loss, grad) = perceptual_proxy_loss(&a, &a, &Mask::new(16, 16, true), 4);
        assert_eq!(loss, 0.0);
        assert!(grad.pixels.iter().all(|g| *g == [0.0; 3]));
    }

    #[test]
    fn proxy_attenuates_checkerboard() {
        let b = ColorImage::new(8, 8, [0.5; 3]);
        let delta = 0.1;
        let a = ColorImage::from_fn(8, 8, |x, y| [0.5 + if (x + y) % 2 == 0 { delta } else { -delta }; 3]);
        let mask = Mask::new(8, 8, true);
        let (proxy, _) = perceptual_proxy_loss(&a, &b, &mask, 4);
        let (l1, _) = l1_loss(&a, &b, &mask);
        assert!(proxy < l1, "{proxy} vs {l1}");
    }

    #[test]
    fn single_level_is_plain_l1() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_image(&mut rng, 6, 6);
        let b = random_image(&mut rng, 6, 6);
        let mask = Mask::from_fn(6, 6, |x, _| x > 0);
        let (p, pg) = perceptual_proxy_loss(&a, &b, &mask, 1);
        let (l, lg) = l1_loss(&a, &b, &mask);
        assert_eq!(p, l);
        assert_eq!(pg, lg);
    }

    #[test]
    fn levels_shrink_for_small_images() {
        assert_eq!(effective_levels(16, 16, 4), 4);
        assert_eq!(effective_levels(15, 64, 4), 3);
        assert_eq!(effective_levels(1, 1, 4), 1);
    }

    #[test]
    fn transpose_is_adjoint() {
        // <D x, y> == <x, D^T y> for the blur-downsample operator.
        let mut rng = StdRng::seed_from_u64(6);
        let (w, h) = (7, 5);
        let x: Vec<Rgb> = (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        let (dx, w2, h2) = blur_downsample(&x, w, h);
        let y: Vec<Rgb> = (0..w2 * h2)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let mut dty = vec![[0.0; 3]; w * h];
        blur_downsample_transpose(&y, w, h, &mut dty);
        let dot = |a: &[Rgb], b: &[Rgb]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(p, q)| p[0] * q[0] + p[1] * q[1] + p[2] * q[2])
                .sum()
        };
        assert!((dot(&dx, &y) - dot(&x, &dty)).abs() < 1e-12);
    }

    #[test]
    fn proxy_gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(7);
        let b = random_image(&mut rng, 16, 16);
        // Keep every residual at least 0.05 away from zero so the loss is
        // linear inside the finite-difference stencil.
        let a = ColorImage::from_fn(16, 16, |x, y| {
            let t = b.get(x, y);
            let s = 0.05 + 0.15 * ((x * 7 + y * 3) % 5) as f64 / 4.0;
            [t[0] + s, t[1] - s, t[2] + s]
        });
        let mask = Mask::from_fn(16, 16, |x, y| x + y > 3);
        let (_, grad) = perceptual_proxy_loss(&a, &b, &mask, 4);
        let h = 1e-3;
        let mut worst = 0.0f64;
        for i in (0..256).step_by(7) {
            for k in 0..3 {
                let mut ap = a.clone();
                ap.pixels[i][k] += h;
                let mut am = a.clone();
                am.pixels[i][k] -= h;
                let fd = (perceptual_proxy_loss(&ap, &b, &mask, 4).0 - perceptual_proxy_loss(&am, &b, &mask, 4).0)
                    / (2.0 * h);
                let an = grad.pixels[i][k];
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
                worst = worst.max(if an.abs().max(fd.abs()) < 1e-10 { 0.0 } else { rel });
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
