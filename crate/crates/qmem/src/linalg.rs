//! Dense complex linear algebra used by the operator layer.
//!
//! Everything here operates on `ndarray::Array2<Complex64>`. Sizes in this
//! crate stay small (operators up to ~60x60, superoperator blocks up to
//! ~3600x3600 only in sectored form), so the implementations favor
//! predictable accuracy over raw speed.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

pub type C64 = Complex64;

pub fn identity(n: usize) -> Array2<C64> {
    Array2::eye(n)
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Kronecker product, row-major convention: (A ⊗ B)[(i*p+k),(j*q+l)] = A[i,j]·B[k,l].
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (m, n) = a.dim();
    let (p, q) = b.dim();
    let mut out = Array2::zeros((m * p, n * q));
    for i in 0..m {
        for j in 0..n {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..p {
                for l in 0..q {
                    out[[i * p + k, j * q + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Max-column-sum (1-) norm.
pub fn one_norm(a: &Array2<C64>) -> f64 {
    let (_, n) = a.dim();
    (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry magnitude.
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solve A·X = B by LU with partial pivoting. Panics if A is not square or
/// dimensions mismatch; returns None on (numerically) singular A.
pub fn lu_solve(a: &Array2<C64>, b: &Array2<C64>) -> Option<Array2<C64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "lu_solve: A must be square");
    assert_eq!(n, b.nrows(), "lu_solve: dimension mismatch");
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = x.ncols();
    for k in 0..n {
        // pivot
        let mut p = k;
        let mut best = lu[[k, k]].norm();
        for i in (k + 1)..n {
            let v = lu[[i, k]].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < 1e-300 {
            return None;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[p, j]];
                lu[[p, j]] = tmp;
            }
            for j in 0..m {
                let tmp = x[[k, j]];
                x[[k, j]] = x[[p, j]];
                x[[p, j]] = tmp;
            }
        }
        let piv = lu[[k, k]];
        for i in (k + 1)..n {
            let f = lu[[i, k]] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            lu[[i, k]] = f;
            for j in (k + 1)..n {
                let v = lu[[k, j]];
                lu[[i, j]] -= f * v;
            }
            for j in 0..m {
                let v = x[[k, j]];
                x[[i, j]] -= f * v;
            }
        }
    }
    // back substitution
    for j in 0..m {
        for i in (0..n).rev() {
            let mut s = x[[i, j]];
            for k in (i + 1)..n {
                s -= lu[[i, k]] * x[[k, j]];
            }
            x[[i, j]] = s / lu[[i, i]];
        }
    }
    Some(x)
}

// Padé coefficients for expm, Higham (2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential via scaling-and-squaring with the [13/13] Padé
/// approximant; relative accuracy near machine precision for the norms
/// encountered here (target 1e-10).
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm: matrix must be square");
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    let theta13 = 5.371920351148152;
    let norm = one_norm(a);
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as u32
    } else {
        0
    };
    let a1 = a.mapv(|z| z / C64::new(2f64.powi(s as i32), 0.0));

    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let eye = identity(n);

    let b = &PADE13;
    let u_inner = a6.mapv(|z| z * b[13])
        + a4.mapv(|z| z * b[11])
        + a2.mapv(|z| z * b[9]);
    let u = a1.dot(
        &(a6.dot(&u_inner)
            + a6.mapv(|z| z * b[7])
            + a4.mapv(|z| z * b[5])
            + a2.mapv(|z| z * b[3])
            + eye.mapv(|z| z * b[1])),
    );
    let v_inner = a6.mapv(|z| z * b[12])
        + a4.mapv(|z| z * b[10])
        + a2.mapv(|z| z * b[8]);
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * b[6])
        + a4.mapv(|z| z * b[4])
        + a2.mapv(|z| z * b[2])
        + eye.mapv(|z| z * b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = lu_solve(&q, &p).expect("expm: Padé denominator singular");
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues in ascending order and the matching
/// eigenvectors as columns.
pub fn eigh(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh: matrix must be square");
    let mut m = a.clone();
    let mut v = identity(n);
    let scale = max_abs(a).max(1e-300);
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[[p, q]].norm());
            }
        }
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.norm() < tol * 1e-2 {
                    continue;
                }
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let phase = apq / apq.norm(); // e^{i φ}
                let theta = 0.5 * (2.0 * apq.norm()).atan2(app - aqq);
                let (c, s) = (theta.cos(), theta.sin());
                let sp = phase * s;
                // columns p,q of M and V: right-multiply by rotation
                for i in 0..n {
                    let mip = m[[i, p]];
                    let miq = m[[i, q]];
                    m[[i, p]] = mip * c + miq * sp.conj();
                    m[[i, q]] = -mip * sp + miq * c;
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = vip * c + viq * sp.conj();
                    v[[i, q]] = -vip * sp + viq * c;
                }
                // rows p,q of M: left-multiply by rotation†
                for j in 0..n {
                    let mpj = m[[p, j]];
                    let mqj = m[[q, j]];
                    m[[p, j]] = mpj * c + mqj * sp;
                    m[[q, j]] = -mpj * sp.conj() + mqj * c;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[[i, i]].re).collect();
    idx.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
    let mut w = Array1::zeros(n);
    let mut u = Array2::zeros((n, n));
    for (k, &i) in idx.iter().enumerate() {
        w[k] = evals[i];
        for r in 0..n {
            u[[r, k]] = v[[r, i]];
        }
    }
    (w, u)
}

/// Square root of a positive semidefinite Hermitian matrix. Eigenvalues
/// below 1e-12 of the largest are treated as roundoff and clipped to zero
/// (sqrt amplifies eigenvalue noise as sqrt(eps)).
pub fn sqrtm_psd(a: &Array2<C64>) -> Array2<C64> {
    let (w, u) = eigh(a);
    let n = a.nrows();
    let cutoff = w.iter().fold(0.0f64, |m, &x| m.max(x)) * 1e-12;
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let s = if w[k] > cutoff { w[k].sqrt() } else { 0.0 };
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += u[[i, k]] * u[[j, k]].conj() * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_diagonal() {
        let mut a = Array2::zeros((2, 2));
        a[[0, 0]] = c(1.0, 0.0);
        a[[1, 1]] = c(0.0, 2.0);
        let e = expm(&a);
        assert_abs_diff_eq!(e[[0, 0]].re, 1f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[[1, 1]].re, 2f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[[1, 1]].im, 2f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[[0, 1]].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_pauli_x_rotation() {
        // exp(-i θ σx / 2) has cos(θ/2) on the diagonal
        let theta = 1.3;
        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = c(0.0, -theta / 2.0);
        a[[1, 0]] = c(0.0, -theta / 2.0);
        let e = expm(&a);
        assert_abs_diff_eq!(e[[0, 0]].re, (theta / 2.0).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[[0, 1]].im, -(theta / 2.0).sin(), epsilon = 1e-12);
    }

    #[test]
    fn expm_large_norm_scaling() {
        // exp of i*z on a 1x1 embedded in 3x3 with a big real part
        let mut a = Array2::<C64>::zeros((3, 3));
        a[[0, 0]] = c(0.0, 200.0);
        a[[1, 1]] = c(-30.0, 0.0);
        a[[2, 2]] = c(0.0, -200.0);
        let e = expm(&a);
        assert_abs_diff_eq!(e[[0, 0]].re, 200f64.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(e[[1, 1]].re, (-30f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn lu_solves_random_system() {
        let n = 6;
        let mut a = Array2::zeros((n, n));
        let mut x_true = Array2::zeros((n, 1));
        // deterministic pseudo-random fill
        let mut s = 1u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = c(next(), next());
            }
            x_true[[i, 0]] = c(next(), next());
        }
        let b = a.dot(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!((x[[i, 0]] - x_true[[i, 0]]).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn eigh_known_spectrum() {
        // Pauli y: eigenvalues ±1
        let mut a = Array2::zeros((2, 2));
        a[[0, 1]] = c(0.0, -1.0);
        a[[1, 0]] = c(0.0, 1.0);
        let (w, u) = eigh(&a);
        assert_abs_diff_eq!(w[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-12);
        // A u = w u
        let au = a.dot(&u);
        for k in 0..2 {
            for i in 0..2 {
                assert_abs_diff_eq!((au[[i, k]] - u[[i, k]] * w[k]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigh_reconstructs_matrix() {
        let n = 8;
        let mut a = Array2::zeros((n, n));
        let mut s = 7u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for i in 0..n {
            for j in i..n {
                if i == j {
                    a[[i, j]] = c(next(), 0.0);
                } else {
                    let z = c(next(), next());
                    a[[i, j]] = z;
                    a[[j, i]] = z.conj();
                }
            }
        }
        let (w, u) = eigh(&a);
        let mut rec = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    rec[[i, j]] += u[[i, k]] * u[[j, k]].conj() * w[k];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!((rec[[i, j]] - a[[i, j]]).norm(), 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sqrtm_squares_back() {
        let mut a = Array2::zeros((3, 3));
        a[[0, 0]] = c(2.0, 0.0);
        a[[1, 1]] = c(0.5, 0.0);
        a[[0, 1]] = c(0.3, 0.1);
        a[[1, 0]] = c(0.3, -0.1);
        a[[2, 2]] = c(1.0, 0.0);
        let r = sqrtm_psd(&a);
        let rr = r.dot(&r);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!((rr[[i, j]] - a[[i, j]]).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }
}
