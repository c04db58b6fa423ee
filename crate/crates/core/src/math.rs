//! Log-space arithmetic and small dense symmetric-positive-definite helpers.

/// log(exp(a) + exp(b)) without leaving log space.
#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log Σ exp(x) over a slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// In-place lower Cholesky factor of a dense row-major `n x n` SPD matrix.
/// Returns false if the matrix is not positive definite.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    // zero strict upper triangle so the factor is clean
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    true
}

/// log-determinant of an SPD matrix given as a scratch copy (destroyed).
pub fn spd_logdet(a: &mut [f64], n: usize) -> Option<f64> {
    if !cholesky_in_place(a, n) {
        return None;
    }
    let mut ld = 0.0;
    for i in 0..n {
        ld += a[i * n + i].ln();
    }
    Some(2.0 * ld)
}

/// Inverse of an SPD matrix (row-major, in place via Cholesky).
pub fn spd_inverse(a: &mut [f64], n: usize) -> bool {
    if !cholesky_in_place(a, n) {
        return false;
    }
    // invert the lower factor
    for j in 0..n {
        a[j * n + j] = 1.0 / a[j * n + j];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= a[i * n + k] * a[k * n + j];
            }
            a[i * n + j] = s / a[i * n + i];
        }
    }
    // inv(A) = inv(L)' inv(L)
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += a[k * n + i] * a[k * n + j];
            }
            a[i * n + j] = s;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = a[j * n + i];
        }
    }
    true
}

/// FNV-1a, used for stable keys in the lattice cache and iteration traces.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logaddexp_matches_direct() {
        let a = 1.3;
        let b = -0.7;
        assert!((logaddexp(a, b) - (a.exp() + b.exp()).ln()).abs() < 1e-14);
    }

    #[test]
    fn logaddexp_handles_neg_inf() {
        assert_eq!(logaddexp(f64::NEG_INFINITY, 2.0), 2.0);
        assert_eq!(
            logaddexp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn logsumexp_large_magnitudes() {
        let v = [1000.0, 1000.0];
        assert!((logsumexp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn cholesky_logdet_2x2() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let ld = spd_logdet(&mut a, 2).unwrap();
        assert!((ld - (8.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let a = [5.0, 1.0, 0.5, 1.0, 4.0, 0.2, 0.5, 0.2, 3.0];
        let mut inv = a.to_vec();
        assert!(spd_inverse(&mut inv, 3));
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i * 3 + k] * inv[k * 3 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-10, "entry ({i},{j}) = {s}");
            }
        }
    }
}
