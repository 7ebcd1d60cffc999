use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported operator dimension.
pub const MAX_DIM: usize = 64;

const HERMITIAN_TOL: f64 = 1e-10;
const DENSITY_TOL: f64 = 1e-10;
const PROJECTOR_TOL: f64 = 1e-9;
const PSD_CLAMP: f64 = 1e-8;

/// Small dense complex Hermitian matrix.
///
/// Construction checks Hermiticity within `1e-10` and then stores the exactly
/// symmetrized matrix `(A + A†) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "operator dimension must be positive".into(),
            });
        }
        if rows > MAX_DIM {
            return Err(Error::DimensionTooLarge(rows));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "entries",
                reason: "non-finite matrix entry".into(),
            });
        }
        let adj = m.adjoint();
        let dev = (&m - &adj).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(HermitianOperator {
            m: (m + adj).scale(0.5),
        })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// `|ψ⟩⟨ψ|` for the normalized vector `ψ`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter {
                name: "state",
                reason: "zero vector".into(),
            });
        }
        let n = psi.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            psi[i] * psi[j].conj() / (norm * norm)
        }))
    }

    /// Convex combination `Σ w_i A_i` of operators of equal dimension.
    pub fn mixture(terms: &[(f64, &HermitianOperator)]) -> Result<Self> {
        let dim = terms.first().map(|(_, a)| a.dim()).ok_or(Error::InvalidParameter {
            name: "mixture",
            reason: "no terms".into(),
        })?;
        let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
        for (w, a) in terms {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch(dim, a.dim()));
            }
            acc += a.m.scale(*w);
        }
        Self::new(acc)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(HermitianOperator {
            m: &self.m - &other.m,
        })
    }

    /// Unit trace (within `1e-10`) and no eigenvalue below `-1e-10`.
    pub fn check_density(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NotDensity(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigensystem(self).values[0];
        if min < -DENSITY_TOL {
            return Err(Error::NotDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `P² = P` within `1e-9`.
    pub fn check_projector(&self) -> Result<()> {
        let sq = &self.m * &self.m;
        let dev = (&sq - &self.m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > PROJECTOR_TOL {
            return Err(Error::NotProjector(dev));
        }
        Ok(())
    }

    /// Rows of `[re, im]` pairs, the on-disk matrix format.
    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| [self.m[(i, j)].re, self.m[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
            .collect();
        Self::from_rows(&rows)
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(s)
    }
}

/// A matrix entry on disk: a bare real number or an `[re, im]` pair.
#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<Entry>>::deserialize(d)?;
        let rows: Vec<Vec<[f64; 2]>> = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|e| match e {
                        Entry::Real(re) => [re, 0.0],
                        Entry::Complex(p) => p,
                    })
                    .collect()
            })
            .collect();
        HermitianOperator::from_pairs(&rows).map_err(serde::de::Error::custom)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Eigensystem {
    /// `V · diag(f(λ)) · V†`.
    pub fn recompose<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<Complex64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Eigen-decomposition of a Hermitian operator.
///
/// Each eigenvector is rephased so that its largest-magnitude component (the
/// first one on ties) is real and positive.
pub fn hermitian_eigensystem(a: &HermitianOperator) -> Eigensystem {
    let eig = SymmetricEigen::new(a.m.clone());
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].norm() > v[pivot].norm() * (1.0 + 1e-12) {
                pivot = i;
            }
        }
        let phase = if v[pivot].norm() > 0.0 {
            v[pivot].conj() / v[pivot].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            vectors[(i, col)] = v[i] * phase;
        }
    }
    Eigensystem { values, vectors }
}

/// Positive square root of a positive semidefinite operator.
///
/// Eigenvalues in `[-1e-8, 0)` are treated as zero.
pub fn psd_sqrt(a: &HermitianOperator) -> Result<HermitianOperator> {
    let eig = hermitian_eigensystem(a);
    let min = eig.values[0];
    if min < -PSD_CLAMP {
        return Err(Error::NotPsd(min));
    }
    HermitianOperator::new(eig.recompose(|l| l.max(0.0).sqrt()))
}
