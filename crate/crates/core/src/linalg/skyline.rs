use super::CsrMatrix;
use crate::error::{Error, Result};

/// Profile (envelope) Cholesky factor `A = L L^T`.
///
/// Row `i` of `L` is stored densely from its first nonzero column up to the
/// diagonal. The disk meshes are numbered ring by ring, so the envelope stays
/// close to the ring size and no reordering is needed.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    vals: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors a symmetric positive definite matrix. Only the lower triangle
    /// is read.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let mut first = vec![0usize; n];
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            let (cols, _) = a.row(i);
            first[i] = cols.first().copied().filter(|&c| c <= i).unwrap_or(i);
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0; offset[n]];
        for i in 0..n {
            let (cols, vs) = a.row(i);
            for (&j, &v) in cols.iter().zip(vs) {
                if j <= i {
                    vals[offset[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let oi = offset[i];
            for j in fi..i {
                let fj = first[j];
                let oj = offset[j];
                let k0 = fi.max(fj);
                let mut s = vals[oi + j - fi];
                let ri = &vals[oi + k0 - fi..oi + j - fi];
                let rj = &vals[oj + k0 - fj..oj + j - fj];
                for (x, y) in ri.iter().zip(rj) {
                    s -= x * y;
                }
                vals[oi + j - fi] = s / vals[oj + j - fj];
            }
            let row = &vals[oi..oi + i - fi];
            let d = vals[oi + i - fi] - row.iter().map(|x| x * x).sum::<f64>();
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Solver(format!("matrix is not positive definite (pivot {d:.3e} at row {i})")));
            }
            vals[oi + i - fi] = d.sqrt();
        }
        Ok(SkylineCholesky { n, first, offset, vals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L`.
    pub fn envelope(&self) -> usize {
        self.vals.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let oi = self.offset[i];
            let row = &self.vals[oi..oi + i - fi];
            let mut s = x[i];
            for (l, y) in row.iter().zip(&x[fi..i]) {
                s -= l * y;
            }
            x[i] = s / self.vals[oi + i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let oi = self.offset[i];
            x[i] /= self.vals[oi + i - fi];
            let xi = x[i];
            let row = &self.vals[oi..oi + i - fi];
            for (y, l) in x[fi..i].iter_mut().zip(row) {
                *y -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn solves_tridiagonal() {
        let a = laplacian_1d(50);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x);
        let c = SkylineCholesky::factor(&a).unwrap();
        assert_eq!(c.envelope(), 50 + 49);
        for (u, v) in c.solve(&b).iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(SkylineCholesky::factor(&a).is_err());
    }
}
