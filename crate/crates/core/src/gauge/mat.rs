//! Row-major `n x n` matrix helpers on plain slices.

pub fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n * n]
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = zeros(n);
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// `a * b`
pub fn mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// `a^T * b`
pub fn tmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = zeros(n);
    for k in 0..n {
        for i in 0..n {
            let aki = a[k * n + i];
            if aki == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aki * b[k * n + j];
            }
        }
    }
    c
}

/// `a * b^T`
pub fn mult(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = zeros(n);
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = (0..n).map(|k| a[i * n + k] * b[j * n + k]).sum();
        }
    }
    c
}

pub fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = zeros(n);
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

pub fn add_scaled(out: &mut [f64], s: f64, a: &[f64]) {
    for (o, x) in out.iter_mut().zip(a) {
        *o += s * x;
    }
}

pub fn frob_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(a - a^T) / 2`
pub fn skew(n: usize, a: &[f64]) -> Vec<f64> {
    let mut s = zeros(n);
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = 0.5 * (a[i * n + j] - a[j * n + i]);
        }
    }
    s
}

fn to_na(n: usize, a: &[f64]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(n, n, a)
}

fn from_na(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    out
}

/// Orthogonal polar factor `U V^T` of `a`.
pub fn polar(n: usize, a: &[f64]) -> Vec<f64> {
    let svd = to_na(n, a).svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    from_na(&(u * vt))
}

pub fn inverse(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    to_na(n, a).try_inverse().map(|m| from_na(&m))
}

pub fn det(n: usize, a: &[f64]) -> f64 {
    to_na(n, a).determinant()
}

pub fn min_singular_value(n: usize, a: &[f64]) -> f64 {
    to_na(n, a).singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn expm(n: usize, a: &[f64]) -> Vec<f64> {
    from_na(&to_na(n, a).exp())
}

/// `max |a^T a - I|` entrywise.
pub fn orthogonality_defect(n: usize, a: &[f64]) -> f64 {
    let g = tmul(n, a, a);
    let id = identity(n);
    g.iter().zip(&id).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
