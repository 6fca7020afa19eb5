//! Exact Euclidean distance transform (Meijster et al. separable scheme, all
//! integer arithmetic so results equal a brute-force search bit for bit).

use crate::image_buf::{Mask, ScalarField};

/// For set pixels, the Euclidean distance in pixels to the nearest unset
/// pixel; unset pixels map to 0. When the mask has no unset pixel at all, set
/// pixels get the distance to the nearest image border pixel plus one.
pub fn distance_transform(mask: &Mask) -> ScalarField {
    let (w, h) = (mask.width, mask.height);
    let mut out = ScalarField::new(w, h, 0.0);
    if w == 0 || h == 0 {
        return out;
    }
    if mask.data.iter().all(|&b| b) {
        for y in 0..h {
            for x in 0..w {
                let d = (x + 1).min(y + 1).min(w - x).min(h - y);
                out.data[y * w + x] = d as f64;
            }
        }
        return out;
    }
    let sq = squared_distance_transform(mask);
    for (o, &s) in out.data.iter_mut().zip(&sq) {
        *o = (s as f64).sqrt();
    }
    out
}

/// Squared distances to the nearest unset pixel. The mask must contain at
/// least one unset pixel.
pub fn squared_distance_transform(mask: &Mask) -> Vec<i64> {
    let (w, h) = (mask.width, mask.height);
    let inf = (w + h) as i64;

    // Column pass: vertical distance to the nearest unset pixel.
    let mut g = vec![0i64; w * h];
    for x in 0..w {
        g[x] = if mask.data[x] { inf } else { 0 };
        for y in 1..h {
            let i = y * w + x;
            g[i] = if mask.data[i] { (g[i - w] + 1).min(inf) } else { 0 };
        }
        for y in (0..h - 1).rev() {
            let i = y * w + x;
            if g[i + w] < g[i] {
                g[i] = g[i + w] + 1;
            }
        }
    }

    // Row pass: lower envelope of parabolas.
    let mut out = vec![0i64; w * h];
    let mut s = vec![0usize; w];
    let mut t = vec![0i64; w];
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + row[i].pow(2);
        let sep = |i: usize, u: usize| {
            let (ii, uu) = (i as i64, u as i64);
            (uu * uu - ii * ii + row[u].pow(2) - row[i].pow(2)).div_euclid(2 * (uu - ii))
        };
        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wv = 1 + sep(s[q as usize], u);
                if wv < w as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wv;
                }
            }
        }
        for u in (0..w).rev() {
            out[y * w + u] = if mask.data[y * w + u] {
                f(u as i64, s[q as usize])
            } else {
                0
            };
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel() {
        let mut m = Mask::new(11, 11, false);
        m.set(5, 5, true);
        let d = distance_transform(&m);
        assert_eq!(d.get(5, 5), 1.0);
        assert_eq!(d.get(4, 5), 0.0);
    }

    #[test]
    fn block_center() {
        let m = Mask::from_fn(15, 15, |x, y| (4..11).contains(&x) && (4..11).contains(&y));
        let d = distance_transform(&m);
        assert_eq!(d.get(7, 7), 4.0);
        assert_eq!(d.get(4, 4), 1.0);
    }

    #[test]
    fn all_zero_and_all_one() {
        let d = distance_transform(&Mask::new(6, 4, false));
        assert!(d.data.iter().all(|&v| v == 0.0));
        let d = distance_transform(&Mask::new(6, 4, true));
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(2, 1), 2.0);
        assert_eq!(d.get(5, 3), 1.0);
    }

    #[test]
    fn diagonal_distance() {
        let mut m = Mask::new(8, 8, true);
        m.set(0, 0, false);
        let d = distance_transform(&m);
        assert_eq!(d.get(3, 4), 5.0);
        assert_eq!(d.get(7, 7), (98f64).sqrt());
    }
}
