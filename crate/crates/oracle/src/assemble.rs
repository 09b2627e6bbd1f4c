use crate::Matrix;

/// A convolution kernel stored row-major with its origin at `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub anchor: (usize, usize),
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, anchor: (usize, usize)) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self {
            rows,
            cols,
            values,
            anchor,
        }
    }
}

/// `y(r, c) = sum_{u,v} k(u, v) x(r - u + a_r, c - v + a_c)` on a torus.
pub fn convolution_periodic(k: &Kernel, rows: usize, cols: usize) -> Matrix {
    let n = rows * cols;
    let mut a = Matrix::zeros(n, n);
    for r in 0..rows {
        for c in 0..cols {
            for u in 0..k.rows {
                for v in 0..k.cols {
                    let xr = (r as isize - u as isize + k.anchor.0 as isize).rem_euclid(rows as isize) as usize;
                    let xc = (c as isize - v as isize + k.anchor.1 as isize).rem_euclid(cols as isize) as usize;
                    a[(r * cols + c, xr * cols + xc)] += k.values[u * k.cols + v];
                }
            }
        }
    }
    a
}

/// Same convolution on a latent grid of side `p + 2 border`, observed on the
/// central `p x p` window, with zero latent values outside the latent grid.
pub fn convolution_zero_padded(k: &Kernel, p: usize, border: usize) -> Matrix {
    let q = p + 2 * border;
    let mut a = Matrix::zeros(p * p, q * q);
    for r in 0..p {
        for c in 0..p {
            for u in 0..k.rows {
                for v in 0..k.cols {
                    let xr = (r + border) as isize - u as isize + k.anchor.0 as isize;
                    let xc = (c + border) as isize - v as isize + k.anchor.1 as isize;
                    if xr < 0 || xc < 0 || xr >= q as isize || xc >= q as isize {
                        continue;
                    }
                    a[(r * p + c, xr as usize * q + xc as usize)] += k.values[u * k.cols + v];
                }
            }
        }
    }
    a
}

fn laplacian(rows: usize, cols: usize, periodic: bool) -> Matrix {
    let n = rows * cols;
    let mut l = Matrix::zeros(n, n);
    let offsets = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            l[(i, i)] += 4.0;
            for (dr, dc) in offsets {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                let j = if periodic {
                    Some(nr.rem_euclid(rows as isize) as usize * cols + nc.rem_euclid(cols as isize) as usize)
                } else if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    None
                } else {
                    Some(nr as usize * cols + nc as usize)
                };
                if let Some(j) = j {
                    l[(i, j)] -= 1.0;
                }
            }
        }
    }
    l
}

/// Graph Laplacian of the 4-neighbor torus.
pub fn laplacian_periodic(rows: usize, cols: usize) -> Matrix {
    laplacian(rows, cols, true)
}

/// 5-point stencil with zero values beyond the grid: diagonal 4 everywhere.
pub fn laplacian_dirichlet(rows: usize, cols: usize) -> Matrix {
    laplacian(rows, cols, false)
}
