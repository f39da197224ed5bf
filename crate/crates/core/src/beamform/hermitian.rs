//! Small dense complex matrices and the Hermitian-definite generalized
//! eigenproblem `A v = λ B v` via Cholesky reduction.

use num_complex::Complex64;


const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// `v · v^H`.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_diagonal(&mut self, d: f64) {
        for i in 0..self.n {
            self[(i, i)] += d;
        }
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `v^H A v`, real part (the quadratic form of a Hermitian matrix).
    pub fn quad_form(&self, v: &[Complex64]) -> f64 {
        let av = self.mul_vec(v);
        v.iter().zip(&av).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A - A^H‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular `L` with `B = L L^H`; `None` if `B` is not numerically
/// positive definite.
pub fn cholesky(b: &CMatrix) -> Option<CMatrix> {
    let n = b.n;
    let mut l = CMatrix::zeros(n);
    let scale = (0..n).map(|i| b[(i, i)].re.abs()).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = b[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 1e-14 * scale) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves `L x = y` for lower-triangular `L`.
fn forward_sub(l: &CMatrix, y: &[Complex64]) -> Vec<Complex64> {
    let mut x = vec![ZERO; l.n];
    for i in 0..l.n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `L^H x = y` for lower-triangular `L`.
fn backward_sub_adjoint(l: &CMatrix, y: &[Complex64]) -> Vec<Complex64> {
    let n = l.n;
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)].conj();
    }
    x
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric matrix (row-major,
/// `n × n`). Returns eigenvalues and eigenvectors as columns of `v`.
fn jacobi_symmetric(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i * n + i]).collect();
    (eig, v)
}

/// Eigenpair of a Hermitian matrix with the largest eigenvalue.
///
/// The matrix is embedded as the real symmetric `[[Re, -Im], [Im, Re]]`,
/// whose eigenvector `(u; v)` maps to the complex eigenvector `u + jv`.
pub fn hermitian_top_eigen(c: &CMatrix) -> (f64, Vec<Complex64>) {
    let n = c.n;
    let m = 2 * n;
    let mut a = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            // Symmetrise to remove rounding asymmetry.
            let z = (c[(i, j)] + c[(j, i)].conj()) * 0.5;
            a[i * m + j] = z.re;
            a[i * m + n + j] = -z.im;
            a[(n + i) * m + j] = z.im;
            a[(n + i) * m + n + j] = z.re;
        }
    }
    let (eig, v) = jacobi_symmetric(a, m);
    let top = (0..m).max_by(|&x, &y| eig[x].total_cmp(&eig[y])).unwrap_or(0);
    let vec = (0..n)
        .map(|i| Complex64::new(v[i * m + top], v[(n + i) * m + top]))
        .collect();
    (eig[top], vec)
}

/// Largest generalized eigenvalue and its eigenvector for Hermitian `A` and
/// Hermitian positive-definite `B`.
///
/// Reduces to the standard problem `C y = λ y` with `C = L^{-1} A L^{-H}`,
/// `B = L L^H`, and maps back with `v = L^{-H} y`. Returns `None` when `B`
/// is not positive definite.
pub fn generalized_top_eigen(a: &CMatrix, b: &CMatrix) -> Option<(f64, Vec<Complex64>)> {
    let n = a.n;
    let l = cholesky(b)?;
    // C = L^{-1} A L^{-H}: first solve L X = A column by column, then
    // C^H = L^{-1} X^H, and C is Hermitian.
    let mut x = CMatrix::zeros(n);
    for j in 0..n {
        let col: Vec<Complex64> = (0..n).map(|i| a[(i, j)]).collect();
        let s = forward_sub(&l, &col);
        for i in 0..n {
            x[(i, j)] = s[i];
        }
    }
    let xh = x.adjoint();
    let mut c = CMatrix::zeros(n);
    for j in 0..n {
        let col: Vec<Complex64> = (0..n).map(|i| xh[(i, j)]).collect();
        let s = forward_sub(&l, &col);
        for i in 0..n {
            // This is (L^{-1} X^H)[i, j] = C^H[i, j] = conj(C[j, i]).
            c[(j, i)] = s[i].conj();
        }
    }
    let (lambda, y) = hermitian_top_eigen(&c);
    Some((lambda, backward_sub_adjoint(&l, &y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> CMatrix {
        let mut m = CMatrix::zeros(n);
        for _ in 0..rank {
            let v: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let o = CMatrix::outer(&v);
            for (a, b) in m.data.iter_mut().zip(&o.data) {
                *a += b;
            }
        }
        m
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_psd(5, 8, &mut rng);
        let l = cholesky(&b).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let s: Complex64 = (0..5).map(|k| l[(i, k)] * l[(j, k)].conj()).sum();
                assert!((s - b[(i, j)]).norm() < 1e-12);
            }
        }
        assert!(cholesky(&CMatrix::zeros(3)).is_none());
    }

    #[test]
    fn hermitian_eigen_satisfies_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1, 2, 4, 6] {
            let c = random_psd(n, n + 1, &mut rng);
            let (lambda, v) = hermitian_top_eigen(&c);
            let cv = c.mul_vec(&v);
            for (a, b) in cv.iter().zip(&v) {
                assert!((a - b * lambda).norm() < 1e-10 * lambda.max(1.0));
            }
        }
    }

    #[test]
    fn generalized_eigen_satisfies_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 4, 6] {
            let a = random_psd(n, 2, &mut rng);
            let b = random_psd(n, n + 3, &mut rng);
            let (lambda, v) = generalized_top_eigen(&a, &b).unwrap();
            let av = a.mul_vec(&v);
            let bv = b.mul_vec(&v);
            for (x, y) in av.iter().zip(&bv) {
                assert!((x - y * lambda).norm() < 1e-9 * (1.0 + lambda));
            }
        }
    }
}
