//! Dense and sparse factorizations, generalized symmetric eigenproblems,
//! the matrix exponential and weighted operator norms.

use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::sparse::linalg::solvers::{Llt as SparseLlt, Lu as SparseLuFactor};
use faer::{get_global_parallelism, set_global_parallelism, Mat, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Caps the worker threads used by dense kernels and parallel loops.
/// `deterministic` runs dense kernels sequentially so that summation order
/// does not depend on scheduling.
pub fn configure_parallelism(threads: Option<usize>, deterministic: bool) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))?;
    }
    let par = if deterministic {
        Par::Seq
    } else {
        Par::rayon(threads.unwrap_or(0))
    };
    set_global_parallelism(par);
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `sqrt(aᵀ M a)` for a symmetric positive definite `M`.
pub fn m_norm(m: &CsrMatrix, a: &[f64]) -> f64 {
    dot(a, &m.matvec(a)).max(0.0).sqrt()
}

pub fn col_to_vec(m: &Mat<f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn vec_to_col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn scaled(a: &Mat<f64>, s: f64) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| s * a[(i, j)])
}

pub fn max_abs(a: &Mat<f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Largest absolute column sum.
pub fn norm1(a: &Mat<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Sparse LU factorization with optional iterative refinement against the
/// original matrix.
pub struct SparseLu {
    matrix: CsrMatrix,
    lu: SparseLuFactor<usize, f64>,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Numerical(format!(
                "LU of a non-square {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("sparse LU failed: {e:?}")))?;
        Ok(Self {
            matrix: a.clone(),
            lu,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.lu.solve(b)
    }

    /// Solves with two steps of iterative refinement and checks the result is finite.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = col_to_vec(&self.lu.solve(&vec_to_col(b)), 0);
        for _ in 0..2 {
            let ax = self.matrix.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = col_to_vec(&self.lu.solve(&vec_to_col(&r)), 0);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "sparse solve produced non-finite values".into(),
            ));
        }
        Ok(x)
    }

    /// Solves for every column of `b`, refining each once.
    pub fn solve_many(&self, b: &Mat<f64>) -> Result<Mat<f64>> {
        let mut x = self.lu.solve(b);
        let ax = csr_times_dense(&self.matrix, &x);
        let r = Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] - ax[(i, j)]);
        let dx = self.lu.solve(&r);
        x = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] + dx[(i, j)]);
        if !x.is_all_finite() {
            return Err(Error::Numerical(
                "sparse solve produced non-finite values".into(),
            ));
        }
        Ok(x)
    }

    /// Relative residual `‖b − A x‖ / ‖b‖` (zero when `b` is zero and `x` solves it).
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let r: f64 = b
            .iter()
            .zip(&ax)
            .map(|(bi, ai)| (bi - ai).powi(2))
            .sum::<f64>()
            .sqrt();
        let nb = norm2(b);
        if nb == 0.0 {
            r
        } else {
            r / nb
        }
    }
}

/// Attempts a sparse Cholesky factorization; `None` means the matrix is not
/// numerically positive definite.
pub fn sparse_cholesky_succeeds(a: &CsrMatrix) -> Result<bool> {
    let f = a.to_faer()?;
    let res: std::result::Result<SparseLlt<usize, f64>, _> = f.sp_cholesky(Side::Lower);
    Ok(res.is_ok())
}

pub fn csr_times_dense(a: &CsrMatrix, x: &Mat<f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.nrows(), x.ncols());
    for j in 0..x.ncols() {
        for i in 0..a.nrows() {
            out[(i, j)] = a.row(i).map(|(k, v)| v * x[(k, j)]).sum();
        }
    }
    out
}

/// Lower Cholesky factor of a dense symmetric positive definite matrix.
pub fn cholesky_lower(m: &Mat<f64>) -> Result<Mat<f64>> {
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| Error::Numerical(format!("matrix is not positive definite: {e:?}")))?;
    Ok(llt.L().to_owned())
}

/// `L⁻¹ B`
pub fn lower_solve(l: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut x = b.clone();
    solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), get_global_parallelism());
    x
}

/// `L⁻ᵀ B`
pub fn lower_transpose_solve(l: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut x = b.clone();
    solve_upper_triangular_in_place(l.transpose(), x.as_mut(), get_global_parallelism());
    x
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(s: &Mat<f64>) -> Result<Vec<f64>> {
    let mut ev = symmetrize(s)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigenvalue solver failed: {e:?}")))?;
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Reduces the pencil `(S, M)` to the standard symmetric matrix `L⁻¹ S L⁻ᵀ`.
pub fn reduce_pencil(s: &Mat<f64>, l: &Mat<f64>) -> Mat<f64> {
    let x = lower_solve(l, &symmetrize(s));
    let y = lower_solve(l, &x.transpose().to_owned());
    symmetrize(&y)
}

/// Eigenvalues of `S v = λ M v` for symmetric `S` and SPD `M`, ascending.
pub fn generalized_eigenvalues(s: &Mat<f64>, m: &Mat<f64>) -> Result<Vec<f64>> {
    let l = cholesky_lower(m)?;
    sym_eigenvalues(&reduce_pencil(s, &l))
}

/// Eigenpairs of `S v = λ M v`; vectors are `M`-orthonormal columns.
pub fn generalized_eigen(s: &Mat<f64>, m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let l = cholesky_lower(m)?;
    let c = reduce_pencil(s, &l);
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigen solver failed: {e:?}")))?;
    let vals: Vec<f64> = (0..c.nrows()).map(|i| evd.S().column_vector()[i]).collect();
    let vecs = lower_transpose_solve(&l, &evd.U().to_owned());
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&k| vals[k]).collect();
    let sorted_vecs = Mat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, order[j])]);
    Ok((sorted_vals, sorted_vecs))
}

pub fn identity(n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &Mat<f64>) -> Result<Mat<f64>> {
    const B: [f64; 14] = [
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
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = norm1(a);
    if !norm.is_finite() {
        return Err(Error::Numerical(
            "matrix exponential of a non-finite matrix".into(),
        ));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = scaled(a, 0.5f64.powi(s));
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c: [f64; 4], m: [&Mat<f64>; 4]| {
        Mat::from_fn(n, n, |i, j| {
            c[0] * m[0][(i, j)] + c[1] * m[1][(i, j)] + c[2] * m[2][(i, j)] + c[3] * m[3][(i, j)]
        })
    };
    let zero = Mat::<f64>::zeros(n, n);
    let u_inner = lin([B[13], B[11], B[9], 0.0], [&a6, &a4, &a2, &zero]);
    let u_poly = &a6 * &u_inner + lin([B[7], B[5], B[3], B[1]], [&a6, &a4, &a2, &id]);
    let u = &a * &u_poly;
    let v_inner = lin([B[12], B[10], B[8], 0.0], [&a6, &a4, &a2, &zero]);
    let v = &a6 * &v_inner + lin([B[6], B[4], B[2], B[0]], [&a6, &a4, &a2, &id]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    if !r.is_all_finite() {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok(r)
}

/// Largest singular value.
pub fn spectral_norm(a: &Mat<f64>) -> Result<f64> {
    let sv = a
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular value solver failed: {e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

/// Operator norm of `E` induced by `‖y‖_M = sqrt(yᵀ M y)` where `M = L Lᵀ`:
/// `‖Lᵀ E L⁻ᵀ‖₂`.
pub fn m_operator_norm(e: &Mat<f64>, l: &Mat<f64>) -> Result<f64> {
    let right = lower_solve(l, &e.transpose().to_owned())
        .transpose()
        .to_owned();
    let c = l.transpose() * &right;
    spectral_norm(&c)
}
