//! Small dense-vector helpers. Dimensions here are tiny (d <= 8 in practice),
//! so plain slices beat any matrix library.

use crate::real::Real;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// `a + s * b`, elementwise.
pub fn add_scaled<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Cross product, 3-vectors only.
pub fn cross3<T: Real>(a: &[T], b: &[T]) -> [T; 3] {
    debug_assert_eq!(a.len(), 3);
    debug_assert_eq!(b.len(), 3);
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross3_right_handed() {
        let c = cross3(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(c, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn add_scaled_basic() {
        assert_eq!(add_scaled(&[1.0, 2.0], -2.0, &[0.5, 1.0]), vec![0.0, 0.0]);
    }
}
