//! Fixed-X knockoffs: s-vectors, knockoff matrices and the recycled variant.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Column-centered, unit-norm design (or a raw block carried alongside one).
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    pub values: DMatrix<f64>,
    pub standardized: bool,
    /// Column means removed during standardization.
    pub centers: Vec<f64>,
    /// Column norms after centering.
    pub scales: Vec<f64>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.values.tr_mul(&self.values)
    }

    /// Wrap a matrix without touching it.
    pub fn raw(values: DMatrix<f64>) -> Self {
        let p = values.ncols();
        DesignMatrix { values, standardized: false, centers: vec![0.0; p], scales: vec![1.0; p] }
    }
}

pub fn standardize(raw: &DMatrix<f64>) -> Result<DesignMatrix> {
    let (n, p) = raw.shape();
    let mut values = raw.clone();
    let mut centers = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let mut col = values.column_mut(j);
        let mean = if n > 0 { col.sum() / n as f64 } else { 0.0 };
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if !(norm > 1e-12 * (1.0 + mean.abs()) * (n as f64).sqrt()) {
            return Err(Error::ConstantColumn(j));
        }
        col /= norm;
        centers.push(mean);
        scales.push(norm);
    }
    Ok(DesignMatrix { values, standardized: true, centers, scales })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Equi,
    Sdp,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Equi => "equi",
            Strategy::Sdp => "sdp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SVector {
    pub s: DVector<f64>,
    pub strategy: Strategy,
}

impl SVector {
    /// Smallest eigenvalue of 2·gram − diag(s).
    pub fn slack(&self, gram: &DMatrix<f64>) -> f64 {
        let mut m = gram * 2.0;
        for j in 0..m.nrows() {
            m[(j, j)] -= self.s[j];
        }
        min_eigenvalue(&m)
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub fn compute_s_equi(gram: &DMatrix<f64>) -> Result<SVector> {
    let lmin = min_eigenvalue(gram);
    if lmin <= 1e-12 {
        return Err(Error::NotPositiveDefinite(lmin));
    }
    let v = (2.0 * lmin).min(1.0);
    Ok(SVector { s: DVector::from_element(gram.nrows(), v), strategy: Strategy::Equi })
}

fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// Maximize Σ s_j subject to diag(s) ⪯ 2·gram, 0 ≤ s ≤ 1.
///
/// Primal log-barrier path following: for each μ, damped Newton ascent on
/// Σ s_j + μ[log det(2Σ − diag s) + Σ log s_j + Σ log(1 − s_j)], then μ ← μ/10.
/// The duality gap of each centered point is at most 3pμ.
pub fn compute_s_sdp(gram: &DMatrix<f64>, tol: f64) -> Result<SVector> {
    let p = gram.nrows();
    let lmin = min_eigenvalue(gram);
    if lmin <= 1e-12 {
        return Err(Error::NotPositiveDefinite(lmin));
    }
    let barrier = |s: &DVector<f64>, mu: f64| -> Option<f64> {
        if s.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return None;
        }
        let mut m = gram * 2.0;
        for j in 0..p {
            m[(j, j)] -= s[j];
        }
        let chol = m.cholesky()?;
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let box_: f64 = s.iter().map(|&v| v.ln() + (1.0 - v).ln()).sum();
        Some(s.sum() + mu * (logdet + box_))
    };

    let mut s = DVector::from_element(p, lmin.min(0.5));
    let mut mu = 1.0;
    let mut iters = 0;
    while 3.0 * p as f64 * mu > 1e-3 * tol {
        loop {
            iters += 1;
            if iters > 5000 {
                return Err(Error::SolverDiverged);
            }
            let mut m = gram * 2.0;
            for j in 0..p {
                m[(j, j)] -= s[j];
            }
            let minv = spd_inverse(&m).ok_or(Error::SolverDiverged)?;
            let grad = DVector::from_fn(p, |j, _| 1.0 - mu * minv[(j, j)] + mu / s[j] - mu / (1.0 - s[j]));
            let mut h = minv.component_mul(&minv) * mu;
            for j in 0..p {
                h[(j, j)] += mu * (1.0 / (s[j] * s[j]) + 1.0 / ((1.0 - s[j]) * (1.0 - s[j])));
            }
            let step = match h.clone().cholesky() {
                Some(c) => c.solve(&grad),
                None => h.lu().solve(&grad).ok_or(Error::SolverDiverged)?,
            };
            let decrement = grad.dot(&step);
            if !(decrement > 1e-14) {
                break;
            }
            let f0 = barrier(&s, mu).ok_or(Error::SolverDiverged)?;
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let trial = &s + &step * t;
                if let Some(f1) = barrier(&trial, mu) {
                    if f1 >= f0 + 0.25 * t * decrement {
                        s = trial;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved || decrement < 1e-10 {
                break;
            }
        }
        mu *= 0.1;
    }
    let out = SVector { s, strategy: Strategy::Sdp };
    if out.slack(gram) < -tol {
        return Err(Error::SolverDiverged);
    }
    Ok(out)
}

pub fn compute_s(gram: &DMatrix<f64>, strategy: Strategy) -> Result<SVector> {
    match strategy {
        Strategy::Equi => compute_s_equi(gram),
        Strategy::Sdp => compute_s_sdp(gram, 1e-8),
    }
}

/// s-vector for a Gram matrix without unit diagonal: solve on the correlation
/// scale and map back, s_j = Σ_jj · s'_j.
pub fn compute_s_scaled(gram: &DMatrix<f64>, strategy: Strategy) -> Result<SVector> {
    let d: Vec<f64> = (0..gram.nrows()).map(|j| gram[(j, j)]).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotPositiveDefinite(0.0));
    }
    let corr = DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| gram[(i, j)] / (d[i] * d[j]).sqrt());
    let mut sv = compute_s(&corr, strategy)?;
    for (j, dj) in d.iter().enumerate() {
        sv.s[j] *= dj;
    }
    Ok(sv)
}

#[derive(Clone, Debug)]
pub struct KnockoffSet {
    pub original: DMatrix<f64>,
    pub knockoff: DMatrix<f64>,
    pub s: SVector,
}

impl KnockoffSet {
    /// Max-abs deviations of X̃ᵀX̃ from XᵀX and of XᵀX̃ from XᵀX − diag(s).
    pub fn gram_deviation(&self) -> (f64, f64) {
        let g = self.original.tr_mul(&self.original);
        let kk = self.knockoff.tr_mul(&self.knockoff);
        let mut xk = self.original.tr_mul(&self.knockoff);
        for j in 0..xk.nrows() {
            xk[(j, j)] += self.s.s[j];
        }
        ((kk - &g).amax(), (xk - g).amax())
    }

    /// [X X̃] as one n × 2p matrix.
    pub fn augmented(&self) -> DMatrix<f64> {
        let (n, p) = self.original.shape();
        let mut a = DMatrix::zeros(n, 2 * p);
        a.columns_mut(0, p).copy_from(&self.original);
        a.columns_mut(p, p).copy_from(&self.knockoff);
        a
    }
}

/// Orthonormal n × k block orthogonal to the columns of `basis`.
fn random_complement<R: Rng + ?Sized>(basis: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let n = basis.nrows();
    let q = basis.clone().qr().q();
    let mut g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    for _ in 0..2 {
        let proj = &q * q.tr_mul(&g);
        g -= proj;
    }
    g.qr().q()
}

fn knockoffs_for<R: Rng + ?Sized>(x: &DMatrix<f64>, s: &SVector, rng: &mut R) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if n < 2 * p {
        return Err(Error::InsufficientSamples { n, p, required: 2 * p });
    }
    let sigma = x.tr_mul(x);
    let sinv = spd_inverse(&sigma).ok_or_else(|| Error::NotPositiveDefinite(min_eigenvalue(&sigma)))?;

    // A = I − Σ⁻¹D
    let mut a = DMatrix::<f64>::identity(p, p);
    for j in 0..p {
        for i in 0..p {
            a[(i, j)] -= sinv[(i, j)] * s.s[j];
        }
    }
    // 2D − DΣ⁻¹D
    let mut target = DMatrix::from_fn(p, p, |i, j| -s.s[i] * sinv[(i, j)] * s.s[j]);
    for j in 0..p {
        target[(j, j)] += 2.0 * s.s[j];
    }
    target = (&target + target.transpose()) * 0.5;
    let eig = SymmetricEigen::new(target);
    let lmin = eig.eigenvalues.min();
    if lmin < -1e-6 {
        return Err(Error::FactorizationFailed(lmin));
    }
    let mut c = eig.eigenvectors.transpose();
    for (i, lam) in eig.eigenvalues.iter().enumerate() {
        let r = lam.max(0.0).sqrt();
        c.row_mut(i).scale_mut(r);
    }

    // Keep knockoff columns centered too when there is room.
    let basis = if n > 2 * p {
        let mut b = DMatrix::from_element(n, p + 1, 1.0);
        b.columns_mut(1, p).copy_from(x);
        b
    } else {
        x.clone()
    };
    let u = random_complement(&basis, p, rng);
    Ok(x * a + u * c)
}

pub fn construct_knockoffs<R: Rng + ?Sized>(design: &DesignMatrix, s: &SVector, rng: &mut R) -> Result<KnockoffSet> {
    let knockoff = knockoffs_for(&design.values, s, rng)?;
    Ok(KnockoffSet { original: design.values.clone(), knockoff, s: s.clone() })
}

/// Knockoff block [part1; knockoffs(part2)]; `s` must be feasible for the
/// Gram of part2 alone.
pub fn construct_recycled_knockoffs<R: Rng + ?Sized>(
    part1: &DMatrix<f64>,
    part2: &DMatrix<f64>,
    s: &SVector,
    rng: &mut R,
) -> Result<KnockoffSet> {
    let (n1, p) = part1.shape();
    if part2.ncols() != p && n1 > 0 {
        return Err(Error::InvalidArgument("part1 and part2 column counts differ".into()));
    }
    let k2 = knockoffs_for(part2, s, rng)?;
    let n = n1 + part2.nrows();
    let p = part2.ncols();
    let mut original = DMatrix::zeros(n, p);
    let mut knockoff = DMatrix::zeros(n, p);
    original.rows_mut(0, n1).copy_from(part1);
    original.rows_mut(n1, part2.nrows()).copy_from(part2);
    knockoff.rows_mut(0, n1).copy_from(part1);
    knockoff.rows_mut(n1, part2.nrows()).copy_from(&k2);
    Ok(KnockoffSet { original, knockoff, s: s.clone() })
}
