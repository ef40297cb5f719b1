//! Small dense symmetric positive-definite solves (row-major storage).

/// Relative pivot threshold below which a matrix is treated as singular.
const PIVOT_TOL: f64 = 1e-13;

/// Solves `A x = b` for symmetric positive-definite `A` (`n × n`, row-major)
/// by Cholesky factorization. Returns `None` if a pivot collapses relative to
/// the largest diagonal entry.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    cholesky_into(a, n, &mut l)?;
    let mut x = b.to_vec();
    cholesky_solve_in_place(&l, n, &mut x);
    Some(x)
}

/// Lower-triangular Cholesky factor of `a`, written into `l`.
pub fn cholesky_into(a: &[f64], n: usize, l: &mut [f64]) -> Option<()> {
    debug_assert!(a.len() >= n * n && l.len() >= n * n);
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return None;
    }
    let tol = PIVOT_TOL * max_diag;
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > tol) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
        for j in i + 1..n {
            l[i * n + j] = 0.0;
        }
    }
    Some(())
}

/// Solves `L Lᵀ x = b` in place given the factor from [`cholesky_into`].
pub fn cholesky_solve_in_place(l: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}

/// `xᵀ A x` for symmetric row-major `A`.
pub fn quad_form(a: &[f64], x: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let row = &a[i * n..i * n + n];
        let mut s = 0.0;
        for j in 0..n {
            s += row[j] * x[j];
        }
        total += x[i] * s;
    }
    total
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let b = [1.0, 2.0, 3.0];
        let x = solve_spd(&a, &b, 3).unwrap();
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_singular() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(solve_spd(&a, &[1.0, 2.0], 2).is_none());
        assert!(solve_spd(&[0.0], &[1.0], 1).is_none());
    }

    #[test]
    fn quadratic_form() {
        let a = [2.0, 1.0, 1.0, 3.0];
        assert_eq!(quad_form(&a, &[1.0, 2.0], 2), 2.0 + 2.0 * 2.0 + 12.0);
    }
}
