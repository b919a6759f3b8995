//! Eigenvalues of small complex Hermitian matrices.
//!
//! A Hermitian `A = B + iC` is mapped to the real symmetric
//! `[[B, −C], [C, B]]`, whose spectrum is that of `A` with every eigenvalue
//! doubled. The real matrix is diagonalised by cyclic Jacobi rotations.

use crate::linalg::CMatrix;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues<T: Real>(a: &CMatrix<T>) -> Vec<T> {
    let n = a.dim();
    let h = a.hermitian_part();
    let m = 2 * n;
    let mut s = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            s[i * m + j] = z.re;
            s[(i + n) * m + (j + n)] = z.re;
            s[i * m + (j + n)] = -z.im;
            s[(i + n) * m + j] = z.im;
        }
    }
    let mut evals = symmetric_eigenvalues(&mut s, m);
    evals.sort_by(|x, y| x.partial_cmp(y).expect("NaN eigenvalue"));
    evals.into_iter().step_by(2).collect()
}

/// Cyclic Jacobi on a dense symmetric `m × m` matrix; destroys `a`.
pub fn symmetric_eigenvalues<T: Real>(a: &mut [T], m: usize) -> Vec<T> {
    assert_eq!(a.len(), m * m);
    let scale = a.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if scale == T::zero() {
        return vec![T::zero(); m];
    }
    let tiny = T::epsilon() * T::epsilon() * scale * scale;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..m {
            for q in (p + 1)..m {
                off += a[p * m + q] * a[p * m + q];
            }
        }
        if off <= tiny {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}
