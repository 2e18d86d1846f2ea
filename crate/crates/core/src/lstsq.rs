//! Minimal-norm linear least squares through LAPACK's divide-and-conquer
//! SVD driver (`dgelsd`).

use std::os::raw::c_int;

use nalgebra::DMatrix;

use crate::error::{Result, RrnnError};

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqResult {
    pub weights: Vec<f64>,
    /// `||A w - b||_2`.
    pub residual_norm: f64,
    /// Number of singular values above the `rcond` cut.
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_retained: f64,
}

/// Solution of the factorization step alone; the residual is left to the
/// caller, since the factorization destroys the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolve {
    pub weights: Vec<f64>,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_retained: f64,
}

/// Relative singular value cutoff used when none is given: machine epsilon.
/// Larger cuts such as `eps * max(N, M)` visibly cost accuracy on 2D systems.
pub const DEFAULT_RCOND: f64 = f64::EPSILON;

/// Minimal-norm minimizer of `||A w - b||_2`; singular values below
/// `rcond * sigma_max` are treated as zero.
pub fn solve_min_norm(a: &DMatrix<f64>, b: &[f64], rcond: Option<f64>) -> Result<LstsqResult> {
    let solve = solve_min_norm_in_place(a.clone(), b, rcond)?;
    let residual_norm = residual_norm(a, &solve.weights, b);
    Ok(LstsqResult {
        weights: solve.weights,
        residual_norm,
        rank: solve.rank,
        sigma_max: solve.sigma_max,
        sigma_min_retained: solve.sigma_min_retained,
    })
}

pub fn residual_norm(a: &DMatrix<f64>, w: &[f64], b: &[f64]) -> f64 {
    let mut r: Vec<f64> = b.iter().map(|v| -v).collect();
    for (j, wj) in w.iter().enumerate() {
        if *wj == 0.0 {
            continue;
        }
        for (ri, aij) in r.iter_mut().zip(a.column(j).iter()) {
            *ri += aij * wj;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Like [`solve_min_norm`] but consumes `a`, avoiding a copy of large systems.
pub fn solve_min_norm_in_place(
    mut a: DMatrix<f64>,
    b: &[f64],
    rcond: Option<f64>,
) -> Result<MinNormSolve> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(RrnnError::InvalidInput(format!(
            "least-squares matrix must be non-empty, got {m}x{n}"
        )));
    }
    if b.len() != m {
        return Err(RrnnError::Dimension(format!(
            "right-hand side has {} entries for {m} rows",
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(RrnnError::InvalidInput(
            "matrix or right-hand side contains non-finite entries".into(),
        ));
    }
    let rcond = rcond.unwrap_or(DEFAULT_RCOND);
    let as_int = |v: usize| {
        c_int::try_from(v).map_err(|_| RrnnError::InvalidInput(format!("dimension {v} too large")))
    };
    let (mi, ni) = (as_int(m)?, as_int(n)?);
    let ldb = m.max(n);
    let ldbi = as_int(ldb)?;
    let mut rhs = vec![0.0; ldb];
    rhs[..m].copy_from_slice(b);
    let mut sv = vec![0.0; m.min(n)];
    let nrhs: c_int = 1;
    let mut rank: c_int = 0;
    let mut info: c_int = 0;

    // workspace query
    let mut work_query = [0.0f64];
    let mut iwork_query: [c_int; 1] = [0];
    let lwork_query: c_int = -1;
    unsafe {
        lapack_sys::dgelsd_(
            &mi,
            &ni,
            &nrhs,
            a.as_mut_ptr(),
            &mi,
            rhs.as_mut_ptr(),
            &ldbi,
            sv.as_mut_ptr(),
            &rcond,
            &mut rank,
            work_query.as_mut_ptr(),
            &lwork_query,
            iwork_query.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(RrnnError::Solver(format!(
            "dgelsd workspace query failed (info = {info})"
        )));
    }
    let lwork = work_query[0] as usize + 1;
    let mut work = vec![0.0; lwork];
    let mut iwork: Vec<c_int> = vec![0; (iwork_query[0].max(1)) as usize];
    let lworki = as_int(lwork)?;
    unsafe {
        lapack_sys::dgelsd_(
            &mi,
            &ni,
            &nrhs,
            a.as_mut_ptr(),
            &mi,
            rhs.as_mut_ptr(),
            &ldbi,
            sv.as_mut_ptr(),
            &rcond,
            &mut rank,
            work.as_mut_ptr(),
            &lworki,
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    match info {
        0 => {}
        i if i > 0 => {
            return Err(RrnnError::Solver(format!(
                "SVD failed to converge ({i} off-diagonal elements)"
            )))
        }
        i => {
            return Err(RrnnError::Solver(format!(
                "illegal argument {} to dgelsd",
                -i
            )))
        }
    }
    let rank = rank as usize;
    rhs.truncate(n);
    Ok(MinNormSolve {
        weights: rhs,
        rank,
        sigma_max: sv.first().copied().unwrap_or(0.0),
        sigma_min_retained: if rank > 0 { sv[rank - 1] } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let a = DMatrix::<f64>::identity(4, 4);
        let b = [1.0, -2.0, 3.5, 0.25];
        let r = solve_min_norm(&a, &b, None).unwrap();
        for (w, e) in r.weights.iter().zip(b) {
            assert!((w - e).abs() < 1e-15);
        }
        assert!(r.residual_norm < 1e-15);
        assert_eq!(r.rank, 4);
    }

    #[test]
    fn two_observations_average() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let r = solve_min_norm(&a, &[0.0, 2.0], None).unwrap();
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
        assert!((r.residual_norm - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_columns_share_weight() {
        // Columns 0 and 1 identical: min-norm splits their weight equally.
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 0.5, 0.5, 3.0]);
        let b = [1.0, 2.0, 3.0];
        let r = solve_min_norm(&a, &b, None).unwrap();
        assert_eq!(r.rank, 2);
        assert!((r.weights[0] - r.weights[1]).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        let mut a = DMatrix::<f64>::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(
            solve_min_norm(&a, &[1.0, 1.0], None),
            Err(RrnnError::InvalidInput(_))
        ));
        let e = DMatrix::<f64>::zeros(0, 3);
        assert!(solve_min_norm(&e, &[], None).is_err());
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            solve_min_norm(&a, &[1.0], None),
            Err(RrnnError::Dimension(_))
        ));
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let a = DMatrix::<f64>::zeros(3, 2);
        let r = solve_min_norm(&a, &[1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(r.rank, 0);
        assert!(r.weights.iter().all(|w| *w == 0.0));
    }
}
