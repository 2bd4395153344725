//! Thin safe wrappers over the handful of LAPACK/BLAS routines the rest of
//! the crate needs: symmetric eigendecomposition, general eigenvalues,
//! complex SVD, and real/complex GEMM.
//!
//! All wrappers take and return row-major `ndarray` types; the Fortran
//! column-major convention is handled internally.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        wr: *mut f64,
        wi: *mut f64,
        vl: *mut f64,
        ldvl: *const i32,
        vr: *mut f64,
        ldvr: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn zgesvd_(
        jobu: *const u8,
        jobvt: *const u8,
        m: *const i32,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        s: *mut f64,
        u: *mut Complex64,
        ldu: *const i32,
        vt: *mut Complex64,
        ldvt: *const i32,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );
    fn dgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const f64,
        a: *const f64,
        lda: *const i32,
        b: *const f64,
        ldb: *const i32,
        beta: *const f64,
        c: *mut f64,
        ldc: *const i32,
    );
    fn zgemm_(
        transa: *const u8,
        transb: *const u8,
        m: *const i32,
        n: *const i32,
        k: *const i32,
        alpha: *const Complex64,
        a: *const Complex64,
        lda: *const i32,
        b: *const Complex64,
        ldb: *const i32,
        beta: *const Complex64,
        c: *mut Complex64,
        ldc: *const i32,
    );
}

fn square_dim(a: &Array2<f64>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(LinalgError::Shape(format!("expected square matrix, got {}x{}", r, c)));
    }
    Ok(r)
}

/// Eigendecomposition of a real symmetric matrix. Returns ascending
/// eigenvalues and the matrix whose column `k` is the k-th eigenvector.
pub fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = square_dim(a)?;
    // Row-major buffer read column-major is the transpose; a symmetric
    // input makes the two identical.
    let mut buf: Vec<f64> = a.iter().cloned().collect();
    let w = dsyevd_run(b'V', n, &mut buf)?;
    // Fortran columns are rows of `buf` viewed row-major; transpose so the
    // caller sees eigenvectors as columns.
    let vt = Array2::from_shape_vec((n, n), buf).expect("shape");
    Ok((Array1::from_vec(w), vt.reversed_axes().to_owned()))
}

/// Eigenvalues only of a real symmetric matrix, ascending.
pub fn eigh_vals(a: &Array2<f64>) -> Result<Array1<f64>> {
    let n = square_dim(a)?;
    let mut buf: Vec<f64> = a.iter().cloned().collect();
    let w = dsyevd_run(b'N', n, &mut buf)?;
    Ok(Array1::from_vec(w))
}

fn dsyevd_run(jobz: u8, n: usize, buf: &mut [f64]) -> Result<Vec<f64>> {
    let ni = n as i32;
    let uplo = b'L';
    let mut w = vec![0.0f64; n];
    let mut info: i32 = 0;
    // Workspace query.
    let mut work_q = [0.0f64];
    let mut iwork_q = [0i32];
    let lwork_q: i32 = -1;
    unsafe {
        dsyevd_(
            &jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(),
            work_q.as_mut_ptr(), &lwork_q, iwork_q.as_mut_ptr(), &lwork_q, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dsyevd", info });
    }
    let lwork = work_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dsyevd", info });
    }
    Ok(w)
}

/// Complex eigenvalues of a general real square matrix.
///
/// The spectrum of A and Aᵀ coincide, so the row-major buffer can be handed
/// to LAPACK unchanged.
pub fn eig_vals(a: &Array2<f64>) -> Result<Vec<Complex64>> {
    let n = square_dim(a)?;
    let ni = n as i32;
    let mut buf: Vec<f64> = a.iter().cloned().collect();
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut info: i32 = 0;
    let jobn = b'N';
    let one: i32 = 1;
    let mut work_q = [0.0f64];
    let lwork_q: i32 = -1;
    unsafe {
        dgeev_(
            &jobn, &jobn, &ni, buf.as_mut_ptr(), &ni, wr.as_mut_ptr(), wi.as_mut_ptr(),
            std::ptr::null_mut(), &one, std::ptr::null_mut(), &one,
            work_q.as_mut_ptr(), &lwork_q, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dgeev", info });
    }
    let lwork = work_q[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dgeev_(
            &jobn, &jobn, &ni, buf.as_mut_ptr(), &ni, wr.as_mut_ptr(), wi.as_mut_ptr(),
            std::ptr::null_mut(), &one, std::ptr::null_mut(), &one,
            work.as_mut_ptr(), &lwork, &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "dgeev", info });
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

/// Economy SVD of a complex matrix: A = U diag(s) Vh.
pub fn svd_c64(a: &Array2<Complex64>) -> Result<(Array2<Complex64>, Array1<f64>, Array2<Complex64>)> {
    let (m, n) = a.dim();
    let k = m.min(n);
    // Feed Aᵀ (row-major buffer as column-major): Aᵀ = V* s Uᵀ, so LAPACK's
    // "U" is conj(V) and its "Vt" is Uᵀ.
    let (mf, nf) = (n as i32, m as i32);
    let mut buf: Vec<Complex64> = a.iter().cloned().collect();
    let mut s = vec![0.0f64; k];
    let mut u = vec![Complex64::new(0.0, 0.0); n * k]; // n x k col-major
    let mut vt = vec![Complex64::new(0.0, 0.0); k * m]; // k x m col-major
    let ldu = mf;
    let ldvt = k as i32;
    let jobs = b'S';
    let mut rwork = vec![0.0f64; 5 * k.max(1)];
    let mut info: i32 = 0;
    let mut work_q = [Complex64::new(0.0, 0.0)];
    let lwork_q: i32 = -1;
    unsafe {
        zgesvd_(
            &jobs, &jobs, &mf, &nf, buf.as_mut_ptr(), &mf, s.as_mut_ptr(),
            u.as_mut_ptr(), &ldu, vt.as_mut_ptr(), &ldvt,
            work_q.as_mut_ptr(), &lwork_q, rwork.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "zgesvd", info });
    }
    let lwork = work_q[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        zgesvd_(
            &jobs, &jobs, &mf, &nf, buf.as_mut_ptr(), &mf, s.as_mut_ptr(),
            u.as_mut_ptr(), &ldu, vt.as_mut_ptr(), &ldvt,
            work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::Lapack { routine: "zgesvd", info });
    }
    // u: col-major n x k left vectors of Aᵀ; our V_h is their transpose.
    let mut vh = Array2::zeros((k, n));
    for j in 0..k {
        for i in 0..n {
            vh[[j, i]] = u[j * n + i];
        }
    }
    // vt: col-major k x m, holds Uᵀ => U[i, j] = vt[j + i*k].
    let mut uu = Array2::zeros((m, k));
    for i in 0..m {
        for j in 0..k {
            uu[[i, j]] = vt[i * k + j];
        }
    }
    Ok((uu, Array1::from_vec(s), vh))
}

/// C = op(A)·op(B) for real matrices, row-major in and out.
pub fn dgemm(a: &Array2<f64>, ta: bool, b: &Array2<f64>, tb: bool) -> Array2<f64> {
    let (am, ak) = if ta { (a.dim().1, a.dim().0) } else { a.dim() };
    let (bk, bn) = if tb { (b.dim().1, b.dim().0) } else { b.dim() };
    assert_eq!(ak, bk, "dgemm inner dimension mismatch");
    // Row-major C = op(A) op(B)  <=>  col-major Cᵀ = op(B)ᵀ op(A)ᵀ.
    let av: Vec<f64> = a.iter().cloned().collect();
    let bv: Vec<f64> = b.iter().cloned().collect();
    let mut cv = vec![0.0f64; am * bn];
    let (m, n, k) = (bn as i32, am as i32, ak as i32);
    let transa = if tb { b'T' } else { b'N' };
    let transb = if ta { b'T' } else { b'N' };
    let lda = if tb { bk } else { bn } as i32;
    let ldb = if ta { am } else { ak } as i32;
    let (alpha, beta) = (1.0f64, 0.0f64);
    unsafe {
        dgemm_(
            &transa, &transb, &m, &n, &k, &alpha,
            bv.as_ptr(), &lda, av.as_ptr(), &ldb, &beta, cv.as_mut_ptr(), &m,
        );
    }
    Array2::from_shape_vec((am, bn), cv).expect("shape")
}

/// C = op(A)·op(B) for complex matrices, row-major in and out.
/// `ta`/`tb` select plain transpose (no conjugation).
pub fn zgemm(a: &Array2<Complex64>, ta: bool, b: &Array2<Complex64>, tb: bool) -> Array2<Complex64> {
    let (am, ak) = if ta { (a.dim().1, a.dim().0) } else { a.dim() };
    let (bk, bn) = if tb { (b.dim().1, b.dim().0) } else { b.dim() };
    assert_eq!(ak, bk, "zgemm inner dimension mismatch");
    let av: Vec<Complex64> = a.iter().cloned().collect();
    let bv: Vec<Complex64> = b.iter().cloned().collect();
    let mut cv = vec![Complex64::new(0.0, 0.0); am * bn];
    let (m, n, k) = (bn as i32, am as i32, ak as i32);
    let transa = if tb { b'T' } else { b'N' };
    let transb = if ta { b'T' } else { b'N' };
    let lda = if tb { bk } else { bn } as i32;
    let ldb = if ta { am } else { ak } as i32;
    let alpha = Complex64::new(1.0, 0.0);
    let beta = Complex64::new(0.0, 0.0);
    unsafe {
        zgemm_(
            &transa, &transb, &m, &n, &k, &alpha,
            bv.as_ptr(), &lda, av.as_ptr(), &ldb, &beta, cv.as_mut_ptr(), &m,
        );
    }
    Array2::from_shape_vec((am, bn), cv).expect("shape")
}
