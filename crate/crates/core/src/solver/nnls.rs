//! Lawson-Hanson active-set method for `min ||A v - b|| s.t. v >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::ScnError;

fn solve_passive(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    passive: &[usize],
) -> Result<DVector<f64>, ScnError> {
    let sub = a.select_columns(passive);
    sub.svd(true, true)
        .solve(b, 1e-12)
        .map_err(|e| ScnError::Infeasible(format!("least-squares solve failed: {e}")))
}

pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, ScnError> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(ScnError::Dimension {
            expected: m,
            got: b.len(),
        });
    }
    let mut v = DVector::zeros(n);
    if n == 0 || m == 0 {
        return Ok(v);
    }
    let tol = 10.0 * f64::EPSILON * a.abs().column_sum().max() * m.max(n) as f64;
    let mut passive = vec![false; n];
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &v);
        let pick = (0..n)
            .filter(|j| !passive[*j] && w[*j] > tol)
            .max_by(|i, j| w[*i].total_cmp(&w[*j]));
        let Some(j) = pick else {
            break;
        };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|i| passive[*i]).collect();
            let sp = solve_passive(a, b, &idx)?;
            let mut s = DVector::zeros(n);
            for (k, i) in idx.iter().enumerate() {
                s[*i] = sp[k];
            }
            if idx.iter().all(|i| s[*i] > tol) {
                v = s;
                break;
            }
            let alpha = idx
                .iter()
                .filter(|i| s[**i] <= tol)
                .map(|i| v[*i] / (v[*i] - s[*i]))
                .fold(f64::INFINITY, f64::min);
            v += (s - &v) * alpha;
            for i in &idx {
                if v[*i] <= tol {
                    v[*i] = 0.0;
                    passive[*i] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive oracle: unconstrained least squares on every support,
    /// keeping feasible candidates.
    fn brute(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
        let n = a.ncols();
        let mut best = b.norm();
        for mask in 1u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let s = solve_passive(a, b, &idx).unwrap();
            if s.iter().all(|v| *v >= 0.0) {
                let mut full = DVector::zeros(n);
                for (k, i) in idx.iter().enumerate() {
                    full[*i] = s[k];
                }
                best = best.min((a * full - b).norm());
            }
        }
        best
    }

    #[test]
    fn matches_subset_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (m, n) = (rng.random_range(1..5), rng.random_range(1..5));
            let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
            let b = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
            let v = nnls(&a, &b).unwrap();
            assert!(v.iter().all(|x| *x >= 0.0));
            let r = (&a * &v - &b).norm();
            assert!(r <= brute(&a, &b) + 1e-9, "{a} {b} {v}");
        }
    }

    #[test]
    fn exact_nonnegative_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0]);
        let v = nnls(&a, &b).unwrap();
        assert_eq!(v.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn empty_system() {
        let a = DMatrix::<f64>::zeros(3, 0);
        assert_eq!(nnls(&a, &DVector::zeros(3)).unwrap().len(), 0);
    }
}
