//! Grayscale image buffer shared by the environments, the vision memory and
//! the analysis tooling. Values live in `[0, 1]`, row-major `f32` storage.

/// A dense `h x w` grayscale image. Row index first: `get(i, j)` reads row
/// `i`, column `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0.0; h * w] }
    }

    pub fn constant(h: usize, w: usize, v: f32) -> Self {
        Self { h, w, data: vec![v; h * w] }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), h * w, "image data length mismatch");
        Self { h, w, data }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                data.push(f(i, j));
            }
        }
        Self { h, w, data }
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.w + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.w + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.w..(i + 1) * self.w]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }

    /// Exact pixel copy of the `rh x rw` rectangle whose top-left corner is
    /// `(x, y)`. Panics if the rectangle leaves the image.
    pub fn crop(&self, x: usize, y: usize, rh: usize, rw: usize) -> Image {
        assert!(x + rh <= self.h && y + rw <= self.w, "crop out of bounds");
        let mut out = Vec::with_capacity(rh * rw);
        for i in 0..rh {
            out.extend_from_slice(&self.data[(x + i) * self.w + y..(x + i) * self.w + y + rw]);
        }
        Image { h: rh, w: rw, data: out }
    }

    /// Sets the `rh x rw` rectangle at `(x, y)` to zero.
    pub fn zero_rect(&mut self, x: usize, y: usize, rh: usize, rw: usize) {
        assert!(x + rh <= self.h && y + rw <= self.w, "rect out of bounds");
        for i in 0..rh {
            self.data[(x + i) * self.w + y..(x + i) * self.w + y + rw].fill(0.0);
        }
    }

    /// Paints `src` into this image with its top-left corner at `(x, y)`,
    /// overwriting whatever was there.
    pub fn paint(&mut self, x: usize, y: usize, src: &Image) {
        assert!(x + src.h <= self.h && y + src.w <= self.w, "paint out of bounds");
        for i in 0..src.h {
            let dst = &mut self.data[(x + i) * self.w + y..(x + i) * self.w + y + src.w];
            dst.copy_from_slice(src.row(i));
        }
    }

    /// Corner-aligned bilinear resampling to `th x tw`. Output values are
    /// convex combinations of inputs, so a `[0, 1]` image stays in `[0, 1]`
    /// and resizing to the source resolution is an exact copy.
    pub fn resize_bilinear(&self, th: usize, tw: usize) -> Image {
        assert!(th >= 1 && tw >= 1, "target resolution must be at least 1x1");
        if th == self.h && tw == self.w {
            return self.clone();
        }
        let scale = |t: usize, target: usize, source: usize| -> f32 {
            if target <= 1 || source <= 1 {
                0.0
            } else {
                t as f32 * ((source - 1) as f32 / (target - 1) as f32)
            }
        };
        let mut out = Vec::with_capacity(th * tw);
        for ti in 0..th {
            let sy = scale(ti, th, self.h);
            let i0 = sy.floor() as usize;
            let i1 = (i0 + 1).min(self.h - 1);
            let fy = sy - i0 as f32;
            for tj in 0..tw {
                let sx = scale(tj, tw, self.w);
                let j0 = sx.floor() as usize;
                let j1 = (j0 + 1).min(self.w - 1);
                let fx = sx - j0 as f32;
                let v00 = self.get(i0, j0);
                let v01 = self.get(i0, j1);
                let v10 = self.get(i1, j0);
                let v11 = self.get(i1, j1);
                let top = v00 + (v01 - v00) * fx;
                let bot = v10 + (v11 - v10) * fx;
                out.push(top + (bot - top) * fy);
            }
        }
        Image { h: th, w: tw, data: out }
    }

    /// Encodes as a binary PGM (P5), mapping `[0, 1]` to `0..=255`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.w, self.h).into_bytes();
        out.extend(self.data.iter().map(|&v| quantize_unit(v)));
        out
    }
}

/// Rounds a `[0, 1]` intensity to the nearest 8-bit level.
#[inline]
pub fn quantize_unit(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn dequantize_unit(q: u8) -> f32 {
    q as f32 / 255.0
}

/// Renders a count map (e.g. an observation-frequency heatmap) as a PGM,
/// scaling so the maximum count maps to 255.
pub fn counts_to_pgm(counts: &[u32], h: usize, w: usize) -> Vec<u8> {
    assert_eq!(counts.len(), h * w);
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f32;
    let mut out = format!("P5\n{} {}\n255\n", w, h).into_bytes();
    out.extend(counts.iter().map(|&c| ((c as f32 / max) * 255.0).round() as u8));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar bilinear oracle: evaluates one output pixel directly from the
    /// corner-aligned sampling formula.
    fn bilinear_oracle(img: &Image, ti: usize, tj: usize, th: usize, tw: usize) -> f64 {
        let map = |t: usize, target: usize, source: usize| -> f64 {
            if target <= 1 || source <= 1 {
                0.0
            } else {
                t as f64 * (source as f64 - 1.0) / (target as f64 - 1.0)
            }
        };
        let sy = map(ti, th, img.h());
        let sx = map(tj, tw, img.w());
        let (i0, j0) = (sy.floor() as usize, sx.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(img.h() - 1), (j0 + 1).min(img.w() - 1));
        let (fy, fx) = (sy - i0 as f64, sx - j0 as f64);
        let v = |i: usize, j: usize| img.get(i, j) as f64;
        (1.0 - fy) * ((1.0 - fx) * v(i0, j0) + fx * v(i0, j1))
            + fy * ((1.0 - fx) * v(i1, j0) + fx * v(i1, j1))
    }

    #[test]
    fn crop_matches_index_arithmetic() {
        let (h, w) = (84, 84);
        let frame = Image::from_fn(h, w, |i, j| (i * w + j) as f32 / (h * w) as f32);
        let crop = frame.crop(0, 0, 20, 20);
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(crop.get(i, j), (i * w + j) as f32 / (h * w) as f32);
            }
        }
        let crop = frame.crop(13, 31, 20, 17);
        for i in 0..20 {
            for j in 0..17 {
                assert_eq!(crop.get(i, j), frame.get(13 + i, 31 + j));
            }
        }
    }

    #[test]
    fn crop_identity_and_constant() {
        let frame = Image::from_fn(10, 12, |i, j| (i + j) as f32 / 22.0);
        assert_eq!(frame.crop(0, 0, 10, 12), frame);
        let c = Image::constant(8, 8, 0.375);
        assert!(c.crop(2, 3, 4, 4).as_slice().iter().all(|&v| v == 0.375));
    }

    #[test]
    fn resize_identity_is_exact() {
        let img = Image::from_fn(9, 7, |i, j| ((i * 31 + j * 17) % 64) as f32 / 64.0);
        assert_eq!(img.resize_bilinear(9, 7), img);
    }

    #[test]
    fn resize_preserves_constants() {
        let img = Image::constant(5, 5, 0.6171875);
        for &(th, tw) in &[(1, 1), (3, 9), (10, 2), (17, 17)] {
            let out = img.resize_bilinear(th, tw);
            assert!(out.as_slice().iter().all(|&v| (v - 0.6171875).abs() < 1e-6));
        }
    }

    #[test]
    fn resize_two_by_two_gradient() {
        // [[0,1],[0,1]] widened to 2x4: each row interpolates 0 -> 1 linearly.
        let img = Image::from_vec(2, 2, vec![0.0, 1.0, 0.0, 1.0]);
        let out = img.resize_bilinear(2, 4);
        for i in 0..2 {
            for (j, want) in [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0].iter().enumerate() {
                assert!((out.get(i, j) - want).abs() < 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn resize_matches_scalar_oracle() {
        let img = Image::from_fn(11, 13, |i, j| ((i * 13 + j) % 29) as f32 / 29.0);
        for &(th, tw) in &[(5, 5), (21, 9), (11, 26), (1, 4)] {
            let out = img.resize_bilinear(th, tw);
            for ti in 0..th {
                for tj in 0..tw {
                    let want = bilinear_oracle(&img, ti, tj, th, tw);
                    assert!(
                        (out.get(ti, tj) as f64 - want).abs() < 1e-5,
                        "{th}x{tw} at ({ti},{tj})"
                    );
                }
            }
        }
    }

    #[test]
    fn resize_stays_in_unit_interval() {
        let img = Image::from_fn(8, 8, |i, j| if (i + j) % 2 == 0 { 0.0 } else { 1.0 });
        let out = img.resize_bilinear(19, 5);
        assert!(out.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn pgm_header_and_quantization() {
        let img = Image::from_vec(1, 3, vec![0.0, 0.5, 1.0]);
        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n3 1\n255\n"));
        assert_eq!(&pgm[pgm.len() - 3..], &[0u8, 128, 255]);
        assert_eq!(dequantize_unit(quantize_unit(128.0 / 255.0)), 128.0 / 255.0);
    }

    #[test]
    fn paint_and_zero_rect() {
        let mut base = Image::constant(6, 6, 0.25);
        let patch = Image::constant(2, 3, 0.75);
        base.paint(1, 2, &patch);
        assert_eq!(base.get(1, 2), 0.75);
        assert_eq!(base.get(2, 4), 0.75);
        assert_eq!(base.get(0, 0), 0.25);
        base.zero_rect(1, 2, 2, 3);
        assert_eq!(base.get(1, 2), 0.0);
        assert_eq!(base.get(3, 3), 0.25);
    }
}
