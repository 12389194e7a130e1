use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::{Mat, Par};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Leading eigenpairs of a symmetric matrix, ordered by decreasing `|lambda|`.
///
/// Each vector is oriented so that its entries sum to a positive number; when
/// the sum vanishes, its largest-magnitude entry is made positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigPairs {
    pub values: Vec<f64>,
    /// `n x m`, orthonormal columns.
    pub vectors: DMatrix<f64>,
}

impl EigPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `m` pairs.
    pub fn truncated(&self, m: usize) -> EigPairs {
        let m = m.min(self.len());
        EigPairs {
            values: self.values[..m].to_vec(),
            vectors: self.vectors.columns(0, m).into_owned(),
        }
    }
}

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a nonempty square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("matrix has non-finite entries".into()));
    }
    Ok(n)
}

/// Full decomposition, ascending eigenvalues as returned by the solver.
/// Runs single-threaded so results are bitwise reproducible.
fn decompose(a: &DMatrix<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Mat<f64>>)> {
    let n = check_square(a)?;
    let fa = to_faer(a);
    let compute = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut s = faer::diag::Diag::<f64>::zeros(n);
    let mut u = vectors.then(|| Mat::<f64>::zeros(n, n));
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        compute,
        Par::Seq,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        fa.as_ref(),
        s.as_mut(),
        u.as_mut().map(|u| u.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::EigenNotConverged)?;
    let values: Vec<f64> = s.column_vector().iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNotConverged);
    }
    Ok((values, u))
}

/// Indices of `values` sorted by decreasing magnitude; equal magnitudes put
/// the positive value first, then keep solver order.
fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (values[i], values[j]);
        b.abs()
            .total_cmp(&a.abs())
            .then_with(|| b.total_cmp(&a))
            .then_with(|| i.cmp(&j))
    });
    order
}

/// All eigenvalues of a symmetric matrix, largest magnitude first.
pub fn eigenvalues_by_magnitude(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (values, _) = decompose(a, false)?;
    Ok(magnitude_order(&values).into_iter().map(|i| values[i]).collect())
}

/// The `m` eigenpairs of largest `|lambda|` of a symmetric matrix.
pub fn leading_eigpairs(a: &DMatrix<f64>, m: usize) -> Result<EigPairs> {
    let n = check_square(a)?;
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "requested {m} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let (values, u) = decompose(a, true)?;
    let u = u.expect("eigenvectors requested");
    let order = magnitude_order(&values);
    let mut vectors = DMatrix::zeros(n, m);
    let mut picked = Vec::with_capacity(m);
    for (col, &idx) in order.iter().take(m).enumerate() {
        picked.push(values[idx]);
        let v: Vec<f64> = (0..n).map(|i| u[(i, idx)]).collect();
        let sign = orientation(&v);
        for (i, x) in v.into_iter().enumerate() {
            vectors[(i, col)] = sign * x;
        }
    }
    Ok(EigPairs {
        values: picked,
        vectors,
    })
}

fn orientation(v: &[f64]) -> f64 {
    let sum: f64 = v.iter().sum();
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if sum.abs() > 1e-10 * l1 {
        return sum.signum();
    }
    let (_, largest) =
        v.iter().enumerate().fold(
            (f64::MIN, 0.0),
            |(best, val), (_, &x)| {
                if x.abs() > best {
                    (x.abs(), x)
                } else {
                    (best, val)
                }
            },
        );
    if largest < 0.0 {
        -1.0
    } else {
        1.0
    }
}
