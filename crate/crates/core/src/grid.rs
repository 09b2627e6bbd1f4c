use crate::error::{Error, Result};

/// A rectangular grid of real pixel values stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain("image dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::Format(format!(
                "{} values supplied for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite pixel value at index {i}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        let mut g = Self::zeros(width, height);
        g.values.fill(value);
        g
    }

    /// Builds a grid by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = Self::zeros(width, height);
        for r in 0..height {
            for c in 0..width {
                g.values[r * width + c] = f(r, c);
            }
        }
        g
    }

    /// Wraps values produced internally; the caller guarantees the length.
    pub(crate) fn from_vec_unchecked(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(height, width)`, i.e. `(rows, cols)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        crate::sum::dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        crate::sum::norm(&self.values)
    }

    pub(crate) fn expect_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Dimension {
                expected: shape,
                found: self.shape(),
            });
        }
        Ok(())
    }

    /// Root-mean-square difference between two grids of equal shape.
    pub fn rms_diff(&self, other: &ImageGrid) -> Result<f64> {
        other.expect_shape(self.shape())?;
        let ss: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((ss / self.len() as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(ImageGrid::new(2, 2, vec![0.0; 3]).is_err());
        assert!(ImageGrid::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(ImageGrid::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn row_major_layout() {
        let g = ImageGrid::from_fn(3, 2, |r, c| (10 * r + c) as f64);
        assert_eq!(g.values(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(g.get(1, 2), 12.0);
        assert_eq!(g.shape(), (2, 3));
    }
}
