//! Eigenpairs of real symmetric tridiagonal matrices.
//!
//! Eigenvalues are located by bisection on Sturm sequence counts, which gives
//! every eigenvalue to a few ulps of the matrix norm independently of the
//! others. Eigenvectors come from inverse iteration with a tridiagonal LU
//! factorization (partial pivoting), reorthogonalized against neighbours
//! whose eigenvalues are close.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 256;
const MAX_INVERSE_ITERATIONS: usize = 8;

/// A symmetric tridiagonal matrix stored as its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::argument("diag", "matrix must be at least 1x1"));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::argument(
                "off",
                format!(
                    "expected {} off-diagonal entries, got {}",
                    diag.len() - 1,
                    off.len()
                ),
            ));
        }
        if diag.iter().chain(off.iter()).any(|v| !v.is_finite()) {
            return Err(Error::argument("diag", "entries must be finite"));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// Entry (i, j) of the full matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    /// Gershgorin interval enclosing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    fn norm_inf(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
    }

    fn pivmin(&self) -> f64 {
        let emax = self.off.iter().fold(1.0f64, |m, e| m.max(e * e));
        f64::MIN_POSITIVE * emax
    }

    /// Number of eigenvalues strictly less than `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, index: usize) -> Result<f64> {
        let n = self.dim();
        if index >= n {
            return Err(Error::argument(
                "index",
                format!("matrix has {n} eigenvalues, asked for #{index}"),
            ));
        }
        let (g_lo, g_hi) = self.gershgorin();
        let slack = 2.0 * f64::EPSILON * self.norm_inf() * n as f64 + self.pivmin();
        let mut lo = g_lo - slack;
        let mut hi = g_hi + slack;
        let tol = 2.0 * f64::EPSILON;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= tol * lo.abs().max(hi.abs()) + self.pivmin() {
                return Ok(mid);
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::Numeric {
            message: format!(
                "bisection for eigenvalue #{index} did not converge in {MAX_BISECTIONS} steps, \
                 bracket [{lo:e}, {hi:e}]"
            ),
        })
    }

    /// The `count` smallest eigenpairs, eigenvalues ascending, eigenvectors
    /// unit 2-norm with their first nonzero component positive.
    pub fn smallest_eigenpairs(&self, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.dim();
        if count == 0 || count > n {
            return Err(Error::argument(
                "count",
                format!("must be in 1..={n}, got {count}"),
            ));
        }
        let values = (0..count)
            .map(|j| self.eigenvalue(j))
            .collect::<Result<Vec<_>>>()?;
        let norm = self.norm_inf();
        let cluster = 1e-3 * norm;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for (j, &lambda) in values.iter().enumerate() {
            let neighbours: Vec<usize> = (0..j)
                .filter(|&i| (values[i] - lambda).abs() <= cluster)
                .collect();
            let v = self.inverse_iteration(lambda, j, &vectors, &neighbours, norm)?;
            vectors.push(v);
        }
        Ok((values, vectors))
    }

    fn inverse_iteration(
        &self,
        lambda: f64,
        index: usize,
        previous: &[Vec<f64>],
        neighbours: &[usize],
        norm: f64,
    ) -> Result<Vec<f64>> {
        let n = self.dim();
        let lu = ShiftedLu::factor(self, lambda, norm);
        let mut x = start_vector(n, index);
        let tol = 64.0 * f64::EPSILON * norm * (n as f64).sqrt();
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_INVERSE_ITERATIONS {
            let mut y = lu.solve(&x);
            for &i in neighbours {
                let p = &previous[i];
                let dot: f64 = y.iter().zip(p).map(|(a, b)| a * b).sum();
                y.iter_mut().zip(p).for_each(|(a, b)| *a -= dot * b);
            }
            let len = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Numeric {
                    message: format!(
                        "inverse iteration for eigenvalue #{index} ({lambda:e}) produced a degenerate vector"
                    ),
                });
            }
            y.iter_mut().for_each(|v| *v /= len);
            x = y;
            residual = self.residual(&x, lambda);
            if residual <= tol {
                break;
            }
        }
        if residual > tol {
            return Err(Error::Numeric {
                message: format!(
                    "inverse iteration for eigenvalue #{index} ({lambda:e}) stalled after \
                     {MAX_INVERSE_ITERATIONS} steps: residual {residual:e} > {tol:e}"
                ),
            });
        }
        if let Some(first) = x.iter().find(|v| **v != 0.0) {
            if *first < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
        }
        Ok(x)
    }

    /// ‖(A − λI)x‖₂.
    fn residual(&self, x: &[f64], lambda: f64) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut r = (self.diag[i] - lambda) * x[i];
            if i > 0 {
                r += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                r += self.off[i] * x[i + 1];
            }
            acc += r * r;
        }
        acc.sqrt()
    }
}

/// Deterministic, non-symmetric start vector so no eigenvector is missed by
/// symmetry.
fn start_vector(n: usize, salt: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (salt as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            0.5 + (z >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// LU factors of A − μI with row interchanges, as in LAPACK's `dgttrf`.
struct ShiftedLu {
    // U has up to two superdiagonals after pivoting.
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(a: &SymTridiagonal, shift: f64, norm: f64) -> Self {
        let n = a.dim();
        let tiny = f64::EPSILON * norm;
        let mut d: Vec<f64> = a.diag.iter().map(|v| v - shift).collect();
        let mut du: Vec<f64> = a.off.clone();
        let mut dl: Vec<f64> = a.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        for v in d.iter_mut() {
            if v.abs() < f64::MIN_POSITIVE {
                *v = tiny.copysign(*v);
            }
        }
        Self {
            u0: d,
            u1: du,
            u2: du2,
            l: dl,
            swapped,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.u0.len();
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.l[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * b[i + 2];
            }
            b[i] = s / self.u0[i];
        }
        b
    }
}
