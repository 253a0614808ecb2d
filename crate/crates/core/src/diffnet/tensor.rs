//! Minimal NCHW tensor used for network inputs and outputs.

use super::Scalar;

/// Dense 4-D array (batch, channel, height, width), row-major within each
/// plane. Shape is fixed at construction. Vectors and matrices use unit
/// trailing dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Tensor<T> {
        Tensor { n, c, h, w, data: vec![T::zero(); n * c * h * w] }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Tensor<T> {
        assert_eq!(data.len(), n * c * h * w, "tensor data length mismatch");
        Tensor { n, c, h, w, data }
    }

    /// A `(n, features)` matrix, stored as shape `(n, features, 1, 1)`.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Tensor<T> {
        let n = rows.len();
        let f = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * f);
        for row in rows {
            assert_eq!(row.len(), f, "ragged rows");
            data.extend_from_slice(&row);
        }
        Tensor { n, c: f, h: 1, w: 1, data }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    /// Elements per sample.
    pub fn feature_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let f = self.feature_len();
        &self.data[i * f..(i + 1) * f]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [T] {
        let f = self.feature_len();
        &mut self.data[i * f..(i + 1) * f]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_sample_views() {
        let t = Tensor::from_vec(2, 3, 2, 2, (0..24).map(|v| v as f32).collect());
        assert_eq!(t.shape(), (2, 3, 2, 2));
        assert_eq!(t.feature_len(), 12);
        assert_eq!(t.sample(1)[0], 12.0);
    }

    #[test]
    fn from_rows_builds_matrix() {
        let t = Tensor::from_rows(vec![vec![1.0f32, 2.0], vec![3.0, 4.0]]);
        assert_eq!(t.shape(), (2, 2, 1, 1));
        assert_eq!(t.sample(1), &[3.0, 4.0]);
    }
}
