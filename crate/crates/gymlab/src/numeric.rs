//! Small numeric kernels shared across the crate: order-stable summation,
//! vector helpers, a Jacobi eigensolver for the tiny symmetric matrices that
//! show up in convex splitting, and the seeded RNG everything uses.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pairwise (tree) summation. Deterministic for a fixed slice order and much
/// better conditioned than a left fold when many terms are summed.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Euclidean norm of the joint vector `(xi, eta)`.
pub fn joint_norm(xi: &[f64], eta: f64) -> f64 {
    (dot(xi, xi) + eta * eta).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The seeded generator used for every sampled diagnostic in the crate.
/// ChaCha8 is platform-stable, so reports are reproducible everywhere.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest eigenvalue of a small dense symmetric matrix (row-major, n x n)
/// by cyclic Jacobi rotations. Sizes here are at most dim(Xi), so the cubic
/// cost is irrelevant.
pub fn max_symmetric_eigenvalue(matrix: &[f64], n: usize) -> f64 {
    assert_eq!(matrix.len(), n * n);
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return matrix[0];
    }
    let mut a = matrix.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).fold(f64::NEG_INFINITY, f64::max)
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An orthonormal basis of the hyperplane orthogonal to the unit vector `e`,
/// completed by Gram-Schmidt from the coordinate axes.
pub fn tangent_basis(e: &[f64]) -> Vec<Vec<f64>> {
    let n = e.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for axis in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        let d = dot(&v, e);
        for (vi, ei) in v.iter_mut().zip(e) {
            *vi -= d * ei;
        }
        for b in &basis {
            let d = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= d * bi;
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            basis.push(scale(&v, 1.0 / nv));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_benign_data() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn jacobi_finds_top_eigenvalue() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let m = [2.0, 1.0, 1.0, 2.0];
        assert!((max_symmetric_eigenvalue(&m, 2) - 3.0).abs() < 1e-12);
        // 3x3 diagonal plus coupling.
        let m3 = [4.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, -2.0];
        let top = max_symmetric_eigenvalue(&m3, 3);
        // Analytic: (5 + sqrt(9 + 1))/2 for the 2x2 block.
        let expected = 0.5 * (5.0 + 10.0f64.sqrt());
        assert!((top - expected).abs() < 1e-12);
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let e = {
            let v = [1.0, 2.0, -0.5];
            let n = norm(&v);
            scale(&v, 1.0 / n)
        };
        let basis = tangent_basis(&e);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!((norm(b) - 1.0).abs() < 1e-12);
            assert!(dot(b, &e).abs() < 1e-12);
        }
        assert!(dot(&basis[0], &basis[1]).abs() < 1e-12);
    }
}
