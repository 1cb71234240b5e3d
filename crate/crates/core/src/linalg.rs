//! Small dense matrices and eigenvalue routines.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math::{abs, sqrt};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T x`.
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self[(i, j)] * x[i];
            }
        }
        out
    }

    /// `self * self^T`.
    pub fn gram_rows(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| abs(a - b)).fold(0.0, f64::max)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| abs(*x)).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Spectral norm via the symmetric eigenvalues of `self self^T`.
    pub fn spectral_norm(&self) -> f64 {
        sqrt(sym_lambda_max(&self.gram_rows()).max(0.0))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    sym_eigen(m).0
}

/// Eigenvalues (ascending) and matching unit eigenvectors stored as columns.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.rows();
    assert_eq!(n, m.cols(), "matrix must be square");
    let mut a = m.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += a[(i, i)] * a[(i, i)];
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 { 1.0 } else { -1.0 } / (abs(theta) + sqrt(theta * theta + 1.0));
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = idx.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, i)];
        }
    }
    (values, vectors)
}

pub fn sym_lambda_max(m: &Mat) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Dominant eigenvalue estimate of a symmetric PSD matrix by power iteration.
///
/// The Rayleigh quotient never exceeds the true value; used as a cross-check.
pub fn power_iteration_sym(m: &Mat, tol: f64, max_iter: usize) -> f64 {
    let n = m.rows();
    if n == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = m.mul_vec(&x);
        let next = dot(&x, &y);
        x = y;
        if abs(next - lambda) <= tol * abs(next).max(1.0) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Complex eigenvalue as (real, imaginary).
pub type Eigen = (f64, f64);

/// All eigenvalues of a general real square matrix: elimination to upper
/// Hessenberg form followed by Francis double-shift QR.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Eigen>> {
    let n = m.rows();
    assert_eq!(n, m.cols(), "matrix must be square");
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy keeps the classic index arithmetic readable.
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = m[(i, j)];
        }
    }
    hessenberg(&mut a, n);
    for i in 1..=n {
        for j in 1..i.saturating_sub(1) {
            a[i][j] = 0.0;
        }
    }
    let (wr, wi) = hqr(&mut a, n)?;
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    for m in 2..n {
        let mut x = 0.0;
        let mut i = m;
        for j in m..=n {
            if abs(a[j][m - 1]) > abs(x) {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut().skip(1) {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        a[i][j] -= y * a[m][j];
                    }
                    for j in 1..=n {
                        a[j][m] += y * a[j][i];
                    }
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        abs(a)
    } else {
        -abs(a)
    }
}

#[allow(clippy::many_single_char_names, unused_assignments)]
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += abs(a[i][j]);
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = abs(a[l - 1][l - 1]) + abs(a[l][l]);
                if s == 0.0 {
                    s = anorm;
                }
                if abs(a[l][l - 1]) + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = sqrt(abs(q));
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(Error::SearchExhausted("QR eigenvalue iteration did not converge".into()));
            }
            if its == 10 || its == 20 || its == 40 {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2]);
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            loop {
                let z = a[m][m];
                r = x - z;
                let s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                let s = abs(p) + abs(q) + abs(r);
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = abs(a[m][m - 1]) * (abs(q) + abs(r));
                let v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]));
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = abs(p) + abs(q) + abs(r);
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign(sqrt(p * p + q * q + r * r), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn.saturating_sub(1) {
                break;
            }
        }
    }
    Ok((wr, wi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use std::vec::Vec;

    fn random_mat(r: &mut crate::rng::Rng, n: usize) -> Mat {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        Mat::from_rows(&rows)
    }

    /// Characteristic polynomial coefficients by Faddeev-LeVerrier:
    /// det(zI - A) = z^n + c[1] z^{n-1} + ... + c[n].
    fn char_poly(a: &Mat) -> Vec<f64> {
        let n = a.rows();
        let mut c = vec![1.0];
        let mut m = Mat::zeros(n, n);
        for k in 1..=n {
            let mut next = a.mul(&m);
            for i in 0..n {
                next[(i, i)] += c[k - 1];
            }
            m = next;
            let am = a.mul(&m);
            let tr: f64 = (0..n).map(|i| am[(i, i)]).sum();
            c.push(-tr / k as f64);
        }
        c
    }

    fn poly_at(c: &[f64], z: (f64, f64)) -> (f64, f64) {
        let mut acc = (0.0, 0.0);
        for &k in c {
            acc = (acc.0 * z.0 - acc.1 * z.1 + k, acc.0 * z.1 + acc.1 * z.0);
        }
        acc
    }

    #[test]
    fn eigenvalues_are_roots_of_the_characteristic_polynomial() {
        let mut r = rng::stream(17, 0);
        for n in 1..=6 {
            for _ in 0..20 {
                let a = random_mat(&mut r, n);
                let ev = eigenvalues(&a).unwrap();
                assert_eq!(ev.len(), n);
                let c = char_poly(&a);
                for &z in &ev {
                    let (re, im) = poly_at(&c, z);
                    assert!(hypot(re, im) < 1e-9, "n={n} z={z:?}");
                }
                let tr: f64 = (0..n).map(|i| a[(i, i)]).sum();
                let s: f64 = ev.iter().map(|e| e.0).sum();
                assert!((tr - s).abs() < 1e-10);
            }
        }
    }

    fn hypot(a: f64, b: f64) -> f64 {
        (a * a + b * b).sqrt()
    }

    #[test]
    fn known_spectra() {
        let rot = Mat::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let ev = eigenvalues(&rot).unwrap();
        assert!(ev.iter().all(|e| e.0.abs() < 1e-14 && (e.1.abs() - 1.0).abs() < 1e-14));
        let tri = Mat::from_rows(&[vec![2.0, 1.0, 5.0], vec![0.0, -3.0, 4.0], vec![0.0, 0.0, 0.5]]);
        let mut re: Vec<f64> = eigenvalues(&tri).unwrap().iter().map(|e| e.0).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 3.0).abs() < 1e-12 && (re[1] - 0.5).abs() < 1e-12 && (re[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_agrees_with_power_iteration_and_trace() {
        let mut r = rng::stream(18, 0);
        for n in 1..=8 {
            let b = random_mat(&mut r, n);
            let s = b.gram_rows();
            let ev = sym_eigenvalues(&s);
            let tr: f64 = (0..n).map(|i| s[(i, i)]).sum();
            assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-10);
            let pi = power_iteration_sym(&s, 1e-14, 100_000);
            assert!(pi <= ev[n - 1] + 1e-10);
            assert!((pi - ev[n - 1]).abs() < 1e-6 * ev[n - 1].max(1.0));
            let general = eigenvalues(&s).unwrap();
            let gmax = general.iter().map(|e| e.0).fold(f64::MIN, f64::max);
            assert!((gmax - ev[n - 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobi_eigenvectors_reconstruct() {
        let mut r = rng::stream(19, 0);
        let b = random_mat(&mut r, 5);
        let s = b.gram_rows();
        let (vals, vecs) = sym_eigen(&s);
        let recon = vecs.mul(&Mat::diag(&vals)).mul(&vecs.transpose());
        assert!(recon.max_abs_diff(&s) < 1e-12);
        assert!(vecs.transpose().mul(&vecs).max_abs_diff(&Mat::identity(5)) < 1e-12);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = Mat::diag(&[0.5, -3.0, 2.0]);
        assert!((d.spectral_norm() - 3.0).abs() < 1e-14);
    }
}
