//! Small dense matrix kernels used by the layers.
//!
//! Three orientations cover every forward/backward product without ever
//! materialising a transpose. Loop orders are chosen so the innermost loop
//! always runs over contiguous memory and autovectorizes.

use crate::nn::Real;

/// c[m×n] += a[m×k] · b[k×n]. Callers zero `c` first when accumulation is
/// not wanted.
pub fn gemm_acc<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
}

/// c[m×n] += a[m×k] · b[n×k]ᵀ (rows of `b` are dotted against rows of `a`).
pub fn gemm_a_bt_acc<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            // Four independent accumulators break the additive dependency
            // chain so the dot product pipelines.
            let mut acc = [T::zero(); 4];
            let mut chunks_a = arow.chunks_exact(4);
            let mut chunks_b = brow.chunks_exact(4);
            for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
                for l in 0..4 {
                    acc[l] += ca[l] * cb[l];
                }
            }
            let mut dot = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for (&av, &bv) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
                dot += av * bv;
            }
            c[i * n + j] += dot;
        }
    }
}

/// c[m×n] += a[k×m]ᵀ · b[k×n].
pub fn gemm_at_b_acc<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let aip = arow[i];
            if aip == T::zero() {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    fn transpose(rows: usize, cols: usize, a: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; a.len()];
        for r in 0..rows {
            for c in 0..cols {
                t[c * rows + r] = a[r * cols + c];
            }
        }
        t
    }

    #[test]
    fn all_orientations_match_the_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(m, k, n) in &[(1, 1, 1), (3, 4, 5), (7, 13, 2), (16, 16, 16), (5, 1, 9)] {
            let a: Vec<f64> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..k * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let expected = naive(m, k, n, &a, &b);

            let mut c = vec![0.0; m * n];
            gemm_acc(m, k, n, &a, &b, &mut c);
            for (x, y) in c.iter().zip(&expected) {
                assert!((x - y).abs() < 1e-12);
            }

            let mut c = vec![0.0; m * n];
            gemm_a_bt_acc(m, k, n, &a, &transpose(k, n, &b), &mut c);
            for (x, y) in c.iter().zip(&expected) {
                assert!((x - y).abs() < 1e-12);
            }

            let mut c = vec![0.0; m * n];
            gemm_at_b_acc(m, k, n, &transpose(m, k, &a), &b, &mut c);
            for (x, y) in c.iter().zip(&expected) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn accumulation_adds_to_existing_values() {
        let a = [1.0f64, 2.0];
        let b = [3.0f64, 4.0];
        let mut c = [10.0f64];
        gemm_acc(1, 2, 1, &a, &b, &mut c);
        assert_eq!(c[0], 10.0 + 11.0);
    }
}
