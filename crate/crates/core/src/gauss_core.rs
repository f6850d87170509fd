//! Dense linear algebra and Gaussian conditioning for small dimensions.
//!
//! Matrices here are tiny (at most 64x64), so everything is a row-major
//! `Vec<f64>` and the symmetric eigensolver is plain cyclic Jacobi.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension accepted by [`eigh`].
pub const MAX_DIM: usize = 64;

/// Default cap on the condition number of `Qy` when conditioning.
pub const DEFAULT_COND_CAP: f64 = 1e12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch { expected: c, got: bad.len() });
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok(self
            .data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Symmetric positive semidefinite matrix (a covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix(Mat);

impl SymMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::InvalidMatrix(format!("{}x{} is not square", m.rows, m.cols)));
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..m.rows {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        // symmetrize exactly
        let mut s = m;
        for i in 0..s.rows {
            for j in 0..i {
                let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = avg;
                s[(j, i)] = avg;
            }
        }
        let out = SymMatrix(s);
        let eig = eigh(&out)?;
        let floor = -1e-10 * out.0.trace().abs().max(f64::MIN_POSITIVE);
        if let Some(&neg) = eig.lambdas_raw.iter().find(|&&l| l < floor) {
            return Err(Error::InvalidMatrix(format!("not positive semidefinite (eigenvalue {neg:e})")));
        }
        Ok(out)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Mat::from_rows(rows)?)
    }

    pub fn scalar(var: f64) -> Result<Self> {
        Self::new(Mat::from_diag(&[var]))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(s: SymMatrix) -> Self {
        s.0.to_rows()
    }
}

/// Zero-mean jointly Gaussian pair `(X, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint", into = "RawJoint")]
pub struct JointGaussianSpec {
    qx: SymMatrix,
    qy: SymMatrix,
    cxy: Mat,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    qx: Vec<Vec<f64>>,
    qy: Vec<Vec<f64>>,
    cxy: Vec<Vec<f64>>,
}

impl TryFrom<RawJoint> for JointGaussianSpec {
    type Error = Error;
    fn try_from(r: RawJoint) -> Result<Self> {
        JointGaussianSpec::new(
            SymMatrix::from_rows(&r.qx)?,
            SymMatrix::from_rows(&r.qy)?,
            Mat::from_rows(&r.cxy)?,
        )
    }
}

impl From<JointGaussianSpec> for RawJoint {
    fn from(s: JointGaussianSpec) -> Self {
        RawJoint { qx: s.qx.into(), qy: s.qy.into(), cxy: s.cxy.to_rows() }
    }
}

impl JointGaussianSpec {
    pub fn new(qx: SymMatrix, qy: SymMatrix, cxy: Mat) -> Result<Self> {
        if cxy.rows != qx.dim() {
            return Err(Error::DimensionMismatch { expected: qx.dim(), got: cxy.rows });
        }
        if cxy.cols != qy.dim() {
            return Err(Error::DimensionMismatch { expected: qy.dim(), got: cxy.cols });
        }
        let spec = Self { qx, qy, cxy };
        // joint PSD check
        SymMatrix::new(spec.joint_covariance())?;
        Ok(spec)
    }

    /// Scalar `X = Y + Z` with independent `Y ~ N(0, sigma2_y)`, `Z ~ N(0, sigma2_z)`.
    ///
    /// With `sigma2_y == 0` the side information is degenerate; `Qy` is then
    /// singular and only sampling (not conditioning) is meaningful.
    pub fn scalar_additive(sigma2_y: f64, sigma2_z: f64) -> Result<Self> {
        Self::new(
            SymMatrix::scalar(sigma2_y + sigma2_z)?,
            SymMatrix::scalar(sigma2_y)?,
            Mat::from_diag(&[sigma2_y]),
        )
    }

    pub fn dim_x(&self) -> usize {
        self.qx.dim()
    }

    pub fn dim_y(&self) -> usize {
        self.qy.dim()
    }

    pub fn qx(&self) -> &SymMatrix {
        &self.qx
    }

    pub fn qy(&self) -> &SymMatrix {
        &self.qy
    }

    pub fn cxy(&self) -> &Mat {
        &self.cxy
    }

    /// The block matrix `[[Qx, Cxy], [Cxy^T, Qy]]`.
    pub fn joint_covariance(&self) -> Mat {
        let (dx, dy) = (self.dim_x(), self.dim_y());
        let mut m = Mat::zeros(dx + dy, dx + dy);
        for i in 0..dx {
            for j in 0..dx {
                m[(i, j)] = self.qx.0[(i, j)];
            }
            for j in 0..dy {
                m[(i, dx + j)] = self.cxy[(i, j)];
                m[(dx + j, i)] = self.cxy[(i, j)];
            }
        }
        for i in 0..dy {
            for j in 0..dy {
                m[(dx + i, dx + j)] = self.qy.0[(i, j)];
            }
        }
        m
    }
}

/// Eigendecomposition `Q = V diag(lambdas) V^T` with nonincreasing eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    /// Columns are eigenvectors.
    pub v: Mat,
    /// Eigenvalues, nonincreasing, clipped at zero.
    pub lambdas: Vec<f64>,
    lambdas_raw: Vec<f64>,
}

impl EigenDecomp {
    pub fn reconstruct(&self) -> Mat {
        let d = Mat::from_diag(&self.lambdas_raw);
        self.v
            .matmul(&d)
            .and_then(|vd| vd.matmul(&self.v.transpose()))
            .expect("square factors")
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted nonincreasing and each eigenvector is signed so its
/// first entry above `1e-12` in magnitude is positive.
pub fn eigh(q: &SymMatrix) -> Result<EigenDecomp> {
    let n = q.dim();
    if n > MAX_DIM {
        return Err(Error::InvalidMatrix(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    const MAX_SWEEPS: usize = 100;
    let mut a = q.0.clone();
    let mut v = Mat::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkr = v[(k, r)];
                    v[(k, p)] = c * vkp - s * vkr;
                    v[(k, r)] = s * vkp + c * vkr;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NotConverged(MAX_SWEEPS));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let mut vs = Mat::zeros(n, n);
    let mut raw = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        raw.push(a[(src, src)]);
        let flip = (0..n)
            .map(|k| v[(k, src)])
            .find(|x| x.abs() > 1e-12)
            .is_some_and(|x| x < 0.0);
        for k in 0..n {
            vs[(k, col)] = if flip { -v[(k, src)] } else { v[(k, src)] };
        }
    }
    let lambdas = raw.iter().map(|&l| l.max(0.0)).collect();
    Ok(EigenDecomp { v: vs, lambdas, lambdas_raw: raw })
}

/// `E[X|Y] = gain * Y` and the conditional covariance `Q_{X|Y}`.
pub fn conditional_moments(spec: &JointGaussianSpec) -> Result<(Mat, SymMatrix)> {
    conditional_moments_capped(spec, DEFAULT_COND_CAP)
}

pub fn conditional_moments_capped(spec: &JointGaussianSpec, cond_cap: f64) -> Result<(Mat, SymMatrix)> {
    let eig = eigh(&spec.qy)?;
    let lmax = eig.lambdas_raw[0];
    let lmin = *eig.lambdas_raw.last().expect("dim >= 1");
    if lmin <= 0.0 || lmax / lmin > cond_cap {
        let cond = if lmin <= 0.0 { f64::INFINITY } else { lmax / lmin };
        return Err(Error::SingularCovariance(cond));
    }
    let inv_diag: Vec<f64> = eig.lambdas_raw.iter().map(|l| 1.0 / l).collect();
    let qy_inv = eig.v.matmul(&Mat::from_diag(&inv_diag))?.matmul(&eig.v.transpose())?;
    let gain = spec.cxy.matmul(&qy_inv)?;
    let explained = gain.matmul(&spec.cxy.transpose())?;
    let qcond = spec.qx.0.sub(&explained)?;
    Ok((gain, SymMatrix::new(qcond)?))
}

/// Row blocks `(x[n][dx], y[n][dy])`.
pub type JointSamples = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// `n` i.i.d. draws of `(X, Y)`; returns row blocks `x[n][dx]`, `y[n][dy]`.
///
/// The joint covariance is factored as `V sqrt(L)`, which tolerates singular
/// blocks (for instance degenerate side information).
pub fn sample_joint(spec: &JointGaussianSpec, n: usize, seed: u64) -> Result<JointSamples> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    sample_joint_with(spec, n, &mut rng)
}

pub fn sample_joint_with<R: rand::Rng + ?Sized>(
    spec: &JointGaussianSpec,
    n: usize,
    rng: &mut R,
) -> Result<JointSamples> {
    let joint = SymMatrix::new(spec.joint_covariance())?;
    let eig = eigh(&joint)?;
    let dim = joint.dim();
    let mut factor = eig.v.clone();
    for j in 0..dim {
        let s = eig.lambdas[j].sqrt();
        for i in 0..dim {
            factor[(i, j)] *= s;
        }
    }
    let dx = spec.dim_x();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut w = vec![0.0; dim];
    for _ in 0..n {
        for wi in w.iter_mut() {
            *wi = StandardNormal.sample(rng);
        }
        let s = factor.apply(&w)?;
        xs.push(s[..dx].to_vec());
        ys.push(s[dx..].to_vec());
    }
    Ok((xs, ys))
}
