use nalgebra::DMatrix;

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub(crate) fn sigma_max(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value; `+inf` for an empty matrix so that empty blocks
/// never count as singular.
pub(crate) fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(f64::INFINITY)
}

pub(crate) fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub(crate) fn solve(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    if a.nrows() == 0 {
        return Some(Vec::new());
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    a.clone().lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}
