//! Dense symmetric eigendecomposition and small vector statistics.
//!
//! The matrices here are tiny by linear-algebra standards (tens to a few
//! hundred rows), so a cyclic Jacobi sweep is plenty: it is deterministic,
//! needs no external backend, and delivers full accuracy on symmetric input.

use ndarray::Array2;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted in descending order and the matching
/// eigenvectors as the columns of the second element. Ties keep the lower
/// original index first, so the output is deterministic.
pub fn jacobi_eigh(matrix: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "eigendecomposition needs a square matrix");
    let mut a = matrix.clone();
    let mut v: Array2<f64> = Array2::eye(n);

    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-14 * (1.0 + frob);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = off_diagonal_sq(&a);
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Two-sided rotation on rows/columns p and q.
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eigenvalues[j]
            .partial_cmp(&eigenvalues[i])
            .expect("eigenvalues of a symmetric matrix are finite")
            .then(i.cmp(&j))
    });

    let sorted_values: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let mut sorted_vectors = Array2::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            sorted_vectors[[k, new_col]] = v[[k, old_col]];
        }
    }
    (sorted_values, sorted_vectors)
}

fn off_diagonal_sq(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[[i, j]] * a[[i, j]];
            }
        }
    }
    sum
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 in the denominator).
pub fn sample_stdev(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Standardize to mean 0 and sample standard deviation 1.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: values.len(),
            what: "values to standardize".into(),
        });
    }
    let m = mean(values);
    let s = sample_stdev(values);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::ZeroVariance("values to standardize".into()));
    }
    Ok(values.iter().map(|v| (v - m) / s).collect())
}

/// Sum of products of centered values; its sign is the sign of the Pearson
/// correlation between `xs` and `ys`.
pub fn centered_dot(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let a = array![[3.0, 0.0], [0.0, -1.0]];
        let (vals, vecs) = jacobi_eigh(&a);
        assert_eq!(vals, vec![3.0, -1.0]);
        assert_close(vecs[[0, 0]].abs(), 1.0, 1e-15);
        assert_close(vecs[[1, 1]].abs(), 1.0, 1e-15);
    }

    #[test]
    fn two_by_two_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = jacobi_eigh(&a);
        assert_close(vals[0], 3.0, 1e-13);
        assert_close(vals[1], 1.0, 1e-13);
        // eigenvector for 3 is (1,1)/sqrt(2) up to sign
        let ratio = vecs[[0, 0]] / vecs[[1, 0]];
        assert_close(ratio, 1.0, 1e-12);
    }

    #[test]
    fn reconstructs_random_symmetric_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        let (vals, vecs) = jacobi_eigh(&a);
        // A v_k = lambda_k v_k for every k
        for k in 0..n {
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[[i, j]] * vecs[[j, k]]).sum();
                assert_close(av, vals[k] * vecs[[i, k]], 1e-10);
            }
        }
        // eigenvalues descending
        for k in 1..n {
            assert!(vals[k - 1] >= vals[k]);
        }
    }

    #[test]
    fn decomposition_is_deterministic() {
        let a = array![
            [0.9, 0.2, 0.1],
            [0.2, 0.7, 0.3],
            [0.1, 0.3, 0.5]
        ];
        let (v1, e1) = jacobi_eigh(&a);
        let (v2, e2) = jacobi_eigh(&a);
        assert_eq!(v1, v2);
        assert_eq!(e1, e2);
    }

    #[test]
    fn standardize_matches_definition() {
        let z = standardize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_close(mean(&z), 0.0, 1e-15);
        assert_close(sample_stdev(&z), 1.0, 1e-15);
    }

    #[test]
    fn standardize_rejects_constant_input() {
        assert!(standardize(&[2.0, 2.0, 2.0]).is_err());
    }
}
