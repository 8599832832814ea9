use ndarray::Array2;

use super::tape::Matrix;
use crate::rng::SeededRng;

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, filled row-major.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    assert!(rows > 0 && cols > 0, "glorot_uniform needs positive dims");
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.uniform(-bound, bound))
}
