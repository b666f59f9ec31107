//! Generalized symmetric eigenproblems `A a = lambda G a` on moment
//! matrices, and the state-level quantities built on them.
//!
//! `G` is factored once as `W W^T = G^+` on its numerically non-null
//! subspace ([`GramFactor`]); every operator sharing that Gram matrix is
//! then diagonalized as an ordinary symmetric problem `W^T A W`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::PolyBasis;
use crate::error::{Error, Result};
use crate::moments::MomentSet;

/// Relative Gram eigenvalue below which a direction is dropped.
pub const DEFAULT_DEFLATION: f64 = 1e-10;

/// Whitening of a positive semi-definite Gram matrix.
#[derive(Debug, Clone)]
pub struct GramFactor {
    gram: DMatrix<f64>,
    whiten: DMatrix<f64>,
}

/// Eigenpairs sorted by ascending eigenvalue; columns of `vectors` are
/// states in basis coefficients, normalized so that `a^T G a = 1`.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    // the same states in whitened coordinates, an orthonormal matrix
    reduced: DMatrix<f64>,
}

/// The normalized state concentrated at the present, `psi_0`.
#[derive(Debug, Clone)]
pub struct LocalizedState {
    coeffs: DVector<f64>,
    whitened: DVector<f64>,
    kernel_norm2: f64,
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetric_part(&m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

// sign that makes the largest component positive
fn sign_of_largest<'a>(v: impl Iterator<Item = &'a f64>) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for x in v {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    sign
}

impl GramFactor {
    /// Factors `g`, equilibrating its diagonal first and dropping
    /// directions whose eigenvalue is below `deflation` times the largest.
    pub fn new(g: &DMatrix<f64>, deflation: f64) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(Error::SingularGram);
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularGram);
        }
        let scale = DVector::from_iterator(
            n,
            (0..n).map(|i| if g[(i, i)] > 0.0 { g[(i, i)].sqrt().recip() } else { 1.0 }),
        );
        let mut balanced = symmetric_part(g);
        for i in 0..n {
            for j in 0..n {
                balanced[(i, j)] *= scale[i] * scale[j];
            }
        }
        let (values, vectors) = sorted_eigen(balanced);
        let top = values.last().copied().unwrap_or(0.0);
        if !(top > 0.0) {
            return Err(Error::SingularGram);
        }
        let kept: Vec<usize> = (0..n).filter(|&i| values[i] > deflation * top).collect();
        let mut whiten = DMatrix::zeros(n, kept.len());
        for (c, &i) in kept.iter().enumerate() {
            let f = values[i].sqrt().recip();
            for r in 0..n {
                whiten[(r, c)] = scale[r] * vectors[(r, i)] * f;
            }
        }
        Ok(GramFactor { gram: g.clone(), whiten })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `W` with `W^T G W = 1`.
    pub fn whiten(&self) -> &DMatrix<f64> {
        &self.whiten
    }

    pub fn dim(&self) -> usize {
        self.whiten.nrows()
    }

    pub fn rank(&self) -> usize {
        self.whiten.ncols()
    }

    /// `G^+ v` on the retained subspace.
    pub fn pinv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.whiten * (self.whiten.transpose() * v)
    }

    pub fn pinv(&self) -> DMatrix<f64> {
        &self.whiten * self.whiten.transpose()
    }

    /// Eigen-decomposition of `(a, G)`.
    pub fn solve(&self, a: &DMatrix<f64>) -> SpectralSolution {
        self.solve_reduced(self.whiten.transpose() * a * &self.whiten)
    }

    /// Eigen-decomposition of an operator already in whitened coordinates,
    /// `W^T A W`.
    pub fn solve_reduced(&self, reduced: DMatrix<f64>) -> SpectralSolution {
        let (eigenvalues, mut reduced) = sorted_eigen(reduced);
        let mut vectors = &self.whiten * &reduced;
        for i in 0..vectors.ncols() {
            if sign_of_largest(vectors.column(i).iter()) < 0.0 {
                vectors.column_mut(i).neg_mut();
                reduced.column_mut(i).neg_mut();
            }
        }
        SpectralSolution { eigenvalues, vectors, reduced }
    }

    /// `W^T v`, coordinates of a covector in the whitened frame.
    pub fn whitened(&self, v: &DVector<f64>) -> DVector<f64> {
        self.whiten.transpose() * v
    }

    /// Normalized reproducing-kernel state for the evaluation row `Q_k(x0)`.
    pub fn localized(&self, row: &DVector<f64>) -> Result<LocalizedState> {
        let u = self.whiten.transpose() * row;
        let norm2 = u.norm_squared();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::SingularGram);
        }
        let whitened = u / norm2.sqrt();
        let coeffs = &self.whiten * &whitened;
        Ok(LocalizedState { coeffs, whitened, kernel_norm2: norm2 })
    }
}

impl SpectralSolution {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    /// Coefficients of state `i`, one column per state.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn state(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    /// States in whitened coordinates (orthonormal columns).
    pub fn reduced(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    pub fn lowest(&self) -> (f64, DVector<f64>) {
        (self.eigenvalues[0], self.state(0))
    }

    pub fn highest(&self) -> (f64, DVector<f64>) {
        let i = self.len() - 1;
        (self.eigenvalues[i], self.state(i))
    }
}

impl LocalizedState {
    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// The state in whitened coordinates, a unit vector.
    pub fn whitened(&self) -> &DVector<f64> {
        &self.whitened
    }

    /// `Q(x0)^T G^+ Q(x0)`, the squared norm before normalization.
    pub fn kernel_norm2(&self) -> f64 {
        self.kernel_norm2
    }

    /// Value of the state at `x0`, equal to `sqrt(kernel_norm2)`.
    pub fn value_at_now(&self) -> f64 {
        self.kernel_norm2.sqrt()
    }
}

/// Solves `A a = lambda G a` with the default deflation threshold.
pub fn solve_gev(a: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<SpectralSolution> {
    Ok(GramFactor::new(g, DEFAULT_DEFLATION)?.solve(a))
}

/// `psi_0(x) = sum_jk Q_j(x0) (G^-1)_jk Q_k(x)`, normalized.
pub fn localized_state(g: &DMatrix<f64>, basis: &PolyBasis, x0: f64) -> Result<LocalizedState> {
    let row = DVector::from_vec(basis.eval_all(x0, g.nrows()));
    GramFactor::new(g, DEFAULT_DEFLATION)?.localized(&row)
}

/// `<psi|phi>` in the metric `g`.
pub fn overlap(g: &DMatrix<f64>, psi: &DVector<f64>, phi: &DVector<f64>) -> f64 {
    (psi.transpose() * g * phi)[(0, 0)]
}

/// Quadratic form `psi^T m phi`.
pub fn bilinear(m: &DMatrix<f64>, psi: &DVector<f64>, phi: &DVector<f64>) -> f64 {
    (psi.transpose() * m * phi)[(0, 0)]
}

/// `w_i = <psi_0|psi_i>^2` for every state of `sol`.
pub fn projections(sol: &SpectralSolution, psi0: &DVector<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let gp = g * psi0;
    sol.vectors.column_iter().map(|c| c.dot(&gp).powi(2)).collect()
}

/// `<psi|f|psi> / <psi|psi>`.
pub fn observable_in_state(f: &DMatrix<f64>, g: &DMatrix<f64>, psi: &DVector<f64>) -> Result<f64> {
    let norm = bilinear(g, psi, psi);
    if !(norm > 0.0) {
        return Err(Error::ZeroState);
    }
    Ok(bilinear(f, psi, psi) / norm)
}

/// Least-squares value at `y` of `f` given its moments `<f Q_k>`.
pub fn least_squares_interp(moments: &[f64], g: &DMatrix<f64>, basis: &PolyBasis, y: f64) -> Result<f64> {
    let n = g.nrows();
    if moments.len() < n {
        return Err(Error::DimensionMismatch { expected: n, got: moments.len() });
    }
    let factor = GramFactor::new(g, DEFAULT_DEFLATION)?;
    let m = DVector::from_row_slice(&moments[..n]);
    let q = DVector::from_vec(basis.eval_all(y, n));
    Ok(q.dot(&factor.pinv_apply(&m)))
}

/// Density-ratio interpolation `Q(y)^T G^-1 F G^-1 Q(y) / Q(y)^T G^-1 Q(y)`,
/// prepared once for evaluation at many abscissae.
#[derive(Debug, Clone)]
pub struct RnInterpolator {
    // columns of whiten * eigenvectors of the reduced operator
    projector: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    basis: PolyBasis,
}

impl RnInterpolator {
    pub fn new(f: &DMatrix<f64>, g: &DMatrix<f64>, basis: &PolyBasis) -> Result<Self> {
        let factor = GramFactor::new(g, DEFAULT_DEFLATION)?;
        let sol = factor.solve(f);
        Ok(RnInterpolator { projector: sol.vectors, eigenvalues: sol.eigenvalues, basis: basis.clone() })
    }

    /// Smallest and largest eigenvalue of `(F, G)`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.eigenvalues[0], *self.eigenvalues.last().unwrap())
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        let n = self.projector.nrows();
        let mut q = DVector::from_vec(self.basis.eval_all(y, n));
        let scale = q.amax();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::SingularGram);
        }
        q /= scale;
        // squared components of G^-1/2 Q(y) along the eigenstates
        let weights = self.projector.transpose() * q;
        let mut num = 0.0;
        let mut den = 0.0;
        for (w, l) in weights.iter().zip(&self.eigenvalues) {
            let w2 = w * w;
            num += w2 * l;
            den += w2;
        }
        if !(den > 0.0) {
            return Err(Error::SingularGram);
        }
        // a convex combination of eigenvalues; clamp away rounding only
        let (lo, hi) = self.bounds();
        Ok((num / den).clamp(lo, hi))
    }
}

/// One-shot [`RnInterpolator`] evaluation.
pub fn rn_interp(f: &DMatrix<f64>, g: &DMatrix<f64>, basis: &PolyBasis, y: f64) -> Result<f64> {
    RnInterpolator::new(f, g, basis)?.eval(y)
}

/// `<Q_j|f g|Q_k>` estimated as the symmetric part of `F G^-1 H`.
pub fn product_moment_approx(f: &DMatrix<f64>, h: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let factor = GramFactor::new(g, DEFAULT_DEFLATION)?;
    Ok(symmetric_part(&(f * factor.pinv() * h)))
}

/// Execution flow as a function of the basis abscissa: the density ratio of
/// the volume measure to the time measure. On a price basis this is `I(P)`.
pub fn flow_profile(ms: &MomentSet, grid: &[f64]) -> Result<Vec<f64>> {
    let interp = RnInterpolator::new(ms.flow(), ms.gram(), ms.basis())?;
    grid.iter().map(|&y| interp.eval(y)).collect()
}
