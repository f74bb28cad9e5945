//! Deterministic direction sets for sampling lower bounds and grid upper bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linops::Matrix;

pub(crate) const SAMPLE_COUNT: usize = 4096;

/// Unit directions as the columns of a `d x n` matrix: uniform half-circle
/// angles for `d = 2` (norms are even), a Fibonacci sphere for `d = 3`,
/// seeded normalised cube samples otherwise.
pub(crate) fn unit_directions(d: usize, n: usize) -> Matrix {
    match d {
        1 => Matrix::from_element(1, 1, 1.0),
        2 => Matrix::from_fn(2, n, |i, k| {
            let t = std::f64::consts::PI * k as f64 / n as f64;
            if i == 0 {
                t.cos()
            } else {
                t.sin()
            }
        }),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let mut m = Matrix::zeros(3, n);
            for k in 0..n {
                let z = 1.0 - (2 * k + 1) as f64 / n as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let (s, c) = (golden * k as f64).sin_cos();
                m[(0, k)] = r * c;
                m[(1, k)] = r * s;
                m[(2, k)] = z;
            }
            m
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + d as u64);
            let mut m = Matrix::zeros(d, n);
            for k in 0..n {
                loop {
                    let col: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let len = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if len > 1e-3 && len <= 1.0 {
                        for (i, v) in col.iter().enumerate() {
                            m[(i, k)] = v / len;
                        }
                        break;
                    }
                }
            }
            m
        }
    }
}

/// Grid points on the surface of the cube `[-1,1]^3`, `cells` cells per
/// face edge, as columns. Every point of the cube surface lies within
/// [`cube_covering_radius`] of a grid point on the same face, and radial
/// projection to the unit sphere does not increase distances.
pub(crate) fn cube_grid(cells: usize) -> Matrix {
    let side = cells + 1;
    let mut cols = Vec::with_capacity(6 * side * side * 3);
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            for i in 0..side {
                for j in 0..side {
                    let u = -1.0 + 2.0 * i as f64 / cells as f64;
                    let v = -1.0 + 2.0 * j as f64 / cells as f64;
                    let mut p = [0.0; 3];
                    p[axis] = sign;
                    p[(axis + 1) % 3] = u;
                    p[(axis + 2) % 3] = v;
                    cols.extend_from_slice(&p);
                }
            }
        }
    }
    Matrix::from_column_slice(3, cols.len() / 3, &cols)
}

pub(crate) fn cube_covering_radius(cells: usize) -> f64 {
    std::f64::consts::SQRT_2 / cells as f64
}
