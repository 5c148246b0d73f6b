//! Elastic net by coordinate descent on the Gram form
//!
//!   minimize ½‖y − Xb‖² + λ(α‖b‖₁ + (1−α)‖b‖²/2)
//!
//! All work goes through G = XᵀX and c = Xᵀy. Coordinates are visited in an
//! order fixed by the data (|c_j| descending), so permuting the columns
//! permutes the solution exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const GRID_SIZE: usize = 100;
pub const GRID_RATIO: f64 = 1e-4;
const MAX_UPDATES: usize = 100_000;
const BISECT_STEPS: u32 = 20;
/// Active-set sweeps between exact refinement attempts.
const ACTIVE_SWEEPS: usize = 10;
/// Refinement steps tried straight from a warm start.
const WARM_POLISH: usize = 8;

/// One elastic-net problem stated on the raw design.
#[derive(Clone, Debug)]
pub struct EnetProblem<'a> {
    pub response: &'a DVector<f64>,
    pub design: &'a DMatrix<f64>,
    pub alpha: f64,
    pub lambda: f64,
}

pub fn solve(problem: &EnetProblem, warm_start: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
    check_alpha(problem.alpha)?;
    if !(problem.lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {}", problem.lambda)));
    }
    let sys = GramSystem::from_design(problem.design, problem.response)?;
    sys.solve(problem.alpha, problem.lambda, warm_start, tol)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0,1], got {alpha}")));
    }
    Ok(())
}

/// Sufficient statistics of a regression: G = XᵀX and c = Xᵀy.
#[derive(Clone, Debug)]
pub struct GramSystem {
    pub gram: DMatrix<f64>,
    pub xty: Vec<f64>,
    order: Vec<usize>,
}

/// Column inner products, summed row by row in a fixed order.
pub fn cross_products(x: &DMatrix<f64>, y: &DVector<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (n, m) = x.shape();
    let mut g = DMatrix::zeros(m, m);
    for j in 0..m {
        let cj = x.column(j);
        for k in j..m {
            let ck = x.column(k);
            let mut acc = 0.0;
            for r in 0..n {
                acc += cj[r] * ck[r];
            }
            g[(j, k)] = acc;
            g[(k, j)] = acc;
        }
    }
    let c = (0..m)
        .map(|j| {
            let cj = x.column(j);
            let mut acc = 0.0;
            for r in 0..n {
                acc += cj[r] * y[r];
            }
            acc
        })
        .collect();
    (g, c)
}

impl GramSystem {
    pub fn from_design(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidArgument("design and response lengths differ".into()));
        }
        let (g, c) = cross_products(x, y);
        Self::from_summaries(g, c)
    }

    pub fn from_summaries(gram: DMatrix<f64>, xty: Vec<f64>) -> Result<Self> {
        if gram.nrows() != gram.ncols() || gram.nrows() != xty.len() {
            return Err(Error::InvalidArgument("Gram and Xᵀy dimensions differ".into()));
        }
        let mut order: Vec<usize> = (0..xty.len()).collect();
        order.sort_by(|&a, &b| xty[b].abs().total_cmp(&xty[a].abs()).then(a.cmp(&b)));
        Ok(GramSystem { gram, xty, order })
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    /// Smallest λ at which b = 0 satisfies the KKT conditions, with α floored.
    pub fn lambda_max(&self, alpha: f64) -> f64 {
        let cmax = self.xty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        cmax / alpha.max(1e-3)
    }

    fn gradient(&self, b: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut r = self.xty.clone();
        for &j in &self.order {
            if b[j] != 0.0 {
                let bj = b[j];
                let col = self.gram.column(j);
                for k in 0..m {
                    r[k] -= col[k] * bj;
                }
            }
        }
        r
    }

    /// Active-set refinement from `b`: solve exactly on the support with
    /// signs fixed, step back to the first sign crossing and drop that
    /// coordinate, or add the worst KKT violator. Handles the near-duplicate
    /// columns where coordinate descent crawls. None if it stalls.
    fn polish(&self, b: &[f64], l1: f64, l2: f64, tol: f64, max_iter: usize) -> Option<Vec<f64>> {
        // A knockoff can duplicate its original, making the active block
        // singular. The ridge keeps each subproblem strictly convex and moves
        // the KKT residual by at most eps·|b_j|.
        let l2 = l2.max(1e-9 * self.gram.diagonal().max());
        let mut b = b.to_vec();
        let mut sign: Vec<f64> = b.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        for _ in 0..max_iter {
            let act: Vec<usize> = self.order.iter().copied().filter(|&j| sign[j] != 0.0).collect();
            if !act.is_empty() {
                let k = act.len();
                let h = DMatrix::from_fn(k, k, |a, c| self.gram[(act[a], act[c])] + if a == c { l2 } else { 0.0 });
                let rhs = DVector::from_fn(k, |a, _| self.xty[act[a]] - l1 * sign[act[a]]);
                let x = h.cholesky()?.solve(&rhs);
                let mut t = 1.0f64;
                let mut hit = None;
                for (a, &j) in act.iter().enumerate() {
                    if x[a] * sign[j] <= 0.0 {
                        let tj = if b[j] == x[a] { 0.0 } else { b[j] / (b[j] - x[a]) };
                        if tj < t {
                            t = tj;
                            hit = Some(j);
                        }
                    }
                }
                for (a, &j) in act.iter().enumerate() {
                    b[j] += t * (x[a] - b[j]);
                }
                if let Some(j) = hit {
                    b[j] = 0.0;
                    sign[j] = 0.0;
                    continue;
                }
            }
            let r = self.gradient(&b);
            let worst = self
                .order
                .iter()
                .copied()
                .filter(|&j| sign[j] == 0.0)
                .map(|j| (j, r[j].abs() - l1))
                .fold(None, |acc: Option<(usize, f64)>, (j, v)| match acc {
                    Some((_, w)) if w >= v => acc,
                    _ => Some((j, v)),
                });
            match worst {
                Some((j, v)) if v > tol => sign[j] = r[j].signum(),
                _ => return Some(b),
            }
        }
        None
    }

    fn kkt_ok(&self, b: &[f64], l1: f64, l2: f64, tol: f64) -> bool {
        let r = self.gradient(b);
        (0..self.dim()).all(|j| self.violation(&r, b, l1, l2, j) <= tol)
    }

    fn violation(&self, r: &[f64], b: &[f64], l1: f64, l2: f64, j: usize) -> f64 {
        if b[j] != 0.0 {
            (r[j] - l1 * b[j].signum() - l2 * b[j]).abs()
        } else {
            (r[j].abs() - l1).max(0.0)
        }
    }

    /// Largest KKT residual of `b` at (α, λ).
    pub fn kkt_violation(&self, b: &[f64], alpha: f64, lambda: f64) -> f64 {
        let r = self.gradient(b);
        let (l1, l2) = (lambda * alpha, lambda * (1.0 - alpha));
        (0..self.dim()).fold(0.0, |m, j| m.max(self.violation(&r, b, l1, l2, j)))
    }

    pub fn solve(&self, alpha: f64, lambda: f64, warm: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
        check_alpha(alpha)?;
        let m = self.dim();
        let mut b = match warm {
            Some(w) if w.len() == m => w.to_vec(),
            Some(_) => return Err(Error::InvalidArgument("warm start has wrong length".into())),
            None => vec![0.0; m],
        };
        let (l1, l2) = (lambda * alpha, lambda * (1.0 - alpha));
        // a warm start usually has the right support already
        if let Some(exact) = self.polish(&b, l1, l2, 0.5 * tol, WARM_POLISH) {
            if self.kkt_ok(&exact, l1, l2, tol) {
                return Ok(exact);
            }
        }
        let mut r = self.gradient(&b);
        let mut updates = 0usize;

        let step = |j: usize, b: &mut [f64], r: &mut [f64]| {
            let gjj = self.gram[(j, j)];
            let z = r[j] + gjj * b[j];
            let shrunk = if z > l1 {
                z - l1
            } else if z < -l1 {
                z + l1
            } else {
                0.0
            };
            let denom = gjj + l2;
            let new = if denom > 0.0 { shrunk / denom } else { 0.0 };
            let d = new - b[j];
            if d != 0.0 {
                let col = self.gram.column(j);
                for k in 0..m {
                    r[k] -= col[k] * d;
                }
                b[j] = new;
            }
        };

        loop {
            for &j in &self.order {
                step(j, &mut b, &mut r);
            }
            updates += m;
            // settle the active set before another full pass
            for _ in 0..ACTIVE_SWEEPS {
                let active: Vec<usize> = self.order.iter().copied().filter(|&j| b[j] != 0.0).collect();
                let worst = active.iter().fold(0.0f64, |w, &j| w.max(self.violation(&r, &b, l1, l2, j)));
                if worst <= 0.5 * tol || active.is_empty() {
                    break;
                }
                for &j in &active {
                    step(j, &mut b, &mut r);
                }
                updates += active.len();
                if updates > MAX_UPDATES {
                    break;
                }
            }
            r = self.gradient(&b);
            let worst = (0..m).fold(0.0f64, |w, j| w.max(self.violation(&r, &b, l1, l2, j)));
            if worst <= tol {
                return Ok(b);
            }
            if let Some(exact) = self.polish(&b, l1, l2, 0.5 * tol, 4 * m + 10) {
                if self.kkt_ok(&exact, l1, l2, tol) {
                    return Ok(exact);
                }
            }
            if updates > MAX_UPDATES {
                return Err(Error::NoConvergence(worst));
            }
        }
    }

    /// Warm-started path on the standard log-uniform grid.
    pub fn path(&self, alpha: f64, grid_size: usize, ratio: f64, tol: f64) -> Result<EnetPath> {
        check_alpha(alpha)?;
        if grid_size < 2 || !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument("grid_size ≥ 2 and 0 < ratio < 1 required".into()));
        }
        let lambdas = lambda_grid(self.lambda_max(alpha).max(f64::MIN_POSITIVE), grid_size, ratio);
        let m = self.dim();
        let mut coefficients = DMatrix::zeros(grid_size, m);
        let mut prev = vec![0.0; m];
        for (k, &lam) in lambdas.iter().enumerate() {
            prev = self.solve(alpha, lam, Some(&prev), tol)?;
            coefficients.row_mut(k).copy_from_slice(&prev);
        }

        let mut entry_lambda = vec![0.0; m];
        let mut first: Vec<Option<usize>> = vec![None; m];
        for (j, f) in first.iter_mut().enumerate() {
            *f = (0..grid_size).find(|&k| coefficients[(k, j)] != 0.0);
        }
        for k in 0..grid_size {
            let group: Vec<usize> = self.order.iter().copied().filter(|&j| first[j] == Some(k)).collect();
            if group.is_empty() {
                continue;
            }
            if k == 0 {
                for j in group {
                    entry_lambda[j] = lambdas[0];
                }
                continue;
            }
            let hi_b: Vec<f64> = coefficients.row(k - 1).iter().copied().collect();
            if alpha == 1.0 {
                let lo_b: Vec<f64> = coefficients.row(k).iter().copied().collect();
                if self.homotopy(lambdas[k - 1], &hi_b, lambdas[k], &lo_b, &group, &mut entry_lambda) {
                    continue;
                }
            }
            self.refine(alpha, lambdas[k - 1], &hi_b, lambdas[k], group, BISECT_STEPS, tol, &mut entry_lambda)?;
        }
        Ok(EnetPath { alpha, lambdas, coefficients, entry_lambda })
    }

    /// Bisect (lo, hi) for every variable in `vars`: inactive at hi, active at lo.
    #[allow(clippy::too_many_arguments)]
    /// Lasso only: follow the piecewise-linear path from `hi` down to `lo`
    /// event by event and record where each variable of `group` enters.
    /// Returns false, leaving `out` untouched, if the walk does not end on
    /// the support of `lo_b`.
    fn homotopy(&self, hi: f64, hi_b: &[f64], lo: f64, lo_b: &[f64], group: &[usize], out: &mut [f64]) -> bool {
        let m = self.dim();
        let mut sign: Vec<f64> = hi_b.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        let mut lam = hi;
        let mut found: Vec<(usize, f64)> = Vec::new();
        for _ in 0..2 * m + 10 {
            let act: Vec<usize> = self.order.iter().copied().filter(|&j| sign[j] != 0.0).collect();
            let k = act.len();
            let mut b = vec![0.0; m];
            let mut d = vec![0.0; m];
            if k > 0 {
                let h = DMatrix::from_fn(k, k, |a, c| self.gram[(act[a], act[c])]);
                let Some(ch) = h.cholesky() else { return false };
                let bv = ch.solve(&DVector::from_fn(k, |a, _| self.xty[act[a]] - lam * sign[act[a]]));
                let dv = ch.solve(&DVector::from_fn(k, |a, _| sign[act[a]]));
                // a variable entering at this very λ sits at zero up to rounding
                let slack = 1e-9 * bv.amax().max(1e-300);
                for (a, &j) in act.iter().enumerate() {
                    if bv[a] * sign[j] < -slack || (bv[a] * sign[j] <= slack && dv[a] * sign[j] <= 0.0) {
                        return false;
                    }
                    b[j] = if bv[a] * sign[j] > 0.0 { bv[a] } else { 0.0 };
                    d[j] = dv[a];
                }
            }
            // b(lam − δ) = b + δ·d, r(lam − δ) = r − δ·G d
            let r = self.gradient(&b);
            let mut gd = vec![0.0; m];
            for &j in &act {
                let col = self.gram.column(j);
                for i in 0..m {
                    gd[i] += col[i] * d[j];
                }
            }
            let span = lam - lo;
            let floor = 1e-13 * lam;
            let mut best: Option<(f64, usize, f64)> = None;
            let mut offer = |delta: f64, j: usize, sg: f64| {
                if delta > floor && delta < span && best.is_none_or(|(bd, _, _)| delta < bd) {
                    best = Some((delta, j, sg));
                }
            };
            for &j in &self.order {
                if sign[j] == 0.0 {
                    if 1.0 - gd[j] > 0.0 {
                        offer((lam - r[j]) / (1.0 - gd[j]), j, 1.0);
                    }
                    if 1.0 + gd[j] > 0.0 {
                        offer((lam + r[j]) / (1.0 + gd[j]), j, -1.0);
                    }
                } else if d[j] * sign[j] < 0.0 {
                    offer(-b[j] / d[j], j, 0.0);
                }
            }
            match best {
                None => {
                    let same = (0..m).all(|j| (sign[j] != 0.0) == (lo_b[j] != 0.0));
                    if !same || group.iter().any(|j| !found.iter().any(|f| f.0 == *j)) {
                        return false;
                    }
                    for (j, v) in found {
                        out[j] = v;
                    }
                    return true;
                }
                Some((delta, j, sg)) => {
                    lam -= delta;
                    sign[j] = sg;
                    if sg != 0.0 && !found.iter().any(|f| f.0 == j) {
                        found.push((j, lam));
                    }
                }
            }
        }
        false
    }

    fn refine(
        &self,
        alpha: f64,
        hi: f64,
        hi_b: &[f64],
        lo: f64,
        vars: Vec<usize>,
        depth: u32,
        tol: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if depth == 0 || vars.is_empty() {
            for j in vars {
                out[j] = lo;
            }
            return Ok(());
        }
        let mid = (hi * lo).sqrt();
        let b_mid = self.solve(alpha, mid, Some(hi_b), tol)?;
        let (upper, lower): (Vec<usize>, Vec<usize>) = vars.into_iter().partition(|&j| b_mid[j] != 0.0);
        self.refine(alpha, hi, hi_b, mid, upper, depth - 1, tol, out)?;
        self.refine(alpha, mid, &b_mid, lo, lower, depth - 1, tol, out)
    }

    /// Coefficients at the `q`-quantile of the path's λ values.
    pub fn coef_at_quantile(&self, path: &EnetPath, q: f64, tol: f64) -> Result<Vec<f64>> {
        let lam = path.lambda_quantile(q);
        let k = path.lambdas.iter().rposition(|&l| l >= lam).unwrap_or(0);
        let warm: Vec<f64> = path.coefficients.row(k).iter().copied().collect();
        if path.lambdas[k] == lam {
            return Ok(warm);
        }
        self.solve(path.alpha, lam, Some(&warm), tol)
    }
}

pub fn lambda_grid(lambda_max: f64, grid_size: usize, ratio: f64) -> Vec<f64> {
    let step = ratio.ln() / (grid_size - 1) as f64;
    (0..grid_size).map(|k| lambda_max * (step * k as f64).exp()).collect()
}

#[derive(Clone, Debug)]
pub struct EnetPath {
    pub alpha: f64,
    pub lambdas: Vec<f64>,
    /// Row k holds the solution at `lambdas[k]`.
    pub coefficients: DMatrix<f64>,
    pub entry_lambda: Vec<f64>,
}

impl EnetPath {
    /// Linear-interpolation quantile of the λ values (R's default type).
    pub fn lambda_quantile(&self, q: f64) -> f64 {
        let mut v = self.lambdas.clone();
        v.sort_by(f64::total_cmp);
        let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
        let i = h.floor() as usize;
        if i + 1 >= v.len() {
            return v[v.len() - 1];
        }
        v[i] + (h - i as f64) * (v[i + 1] - v[i])
    }
}

pub fn path(
    response: &DVector<f64>,
    design: &DMatrix<f64>,
    alpha: f64,
    grid_size: usize,
    ratio: f64,
) -> Result<EnetPath> {
    GramSystem::from_design(design, response)?.path(alpha, grid_size, ratio, DEFAULT_TOL)
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng_from(seed);
        DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal))
    }

    fn vec_gauss(n: usize, seed: u64) -> DVector<f64> {
        let mut r = rng_from(seed);
        DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn orthonormal_lasso_is_soft_threshold() {
        let q = gaussian(40, 6, 1).qr().q();
        let y = vec_gauss(40, 2);
        let c: Vec<f64> = (0..6).map(|j| q.column(j).dot(&y)).collect();
        let prob = EnetProblem { response: &y, design: &q, alpha: 1.0, lambda: 0.3 };
        let b = solve(&prob, None, 1e-9).unwrap();
        for j in 0..6 {
            assert!((b[j] - soft_threshold(c[j], 0.3)).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let x = gaussian(50, 5, 3);
        let y = vec_gauss(50, 4);
        let prob = EnetProblem { response: &y, design: &x, alpha: 0.5, lambda: 0.0 };
        let b = solve(&prob, None, 1e-10).unwrap();
        let ls = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &y));
        for j in 0..5 {
            assert!((b[j] - ls[j]).abs() < 1e-6, "{} {}", b[j], ls[j]);
        }
    }

    #[test]
    fn at_lambda_max_solution_is_zero() {
        let x = gaussian(30, 8, 5);
        let y = vec_gauss(30, 6);
        let sys = GramSystem::from_design(&x, &y).unwrap();
        for alpha in [0.2, 0.7, 1.0] {
            let lam = sys.lambda_max(alpha);
            let b = sys.solve(alpha, lam, None, 1e-9).unwrap();
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn path_shape_and_first_point() {
        let x = gaussian(60, 7, 7);
        let y = vec_gauss(60, 8);
        let p = path(&y, &x, 1.0, 100, 1e-4).unwrap();
        assert_eq!(p.lambdas.len(), 100);
        assert!(p.lambdas.windows(2).all(|w| w[1] < w[0]));
        assert!((p.lambdas[99] / p.lambdas[0] - 1e-4).abs() < 1e-12);
        assert!(p.coefficients.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inactive_variable_has_zero_entry() {
        // column 2 is identically zero, so it can never enter
        let mut x = gaussian(30, 3, 9);
        x.column_mut(2).fill(0.0);
        let y = vec_gauss(30, 10);
        let p = path(&y, &x, 1.0, 20, 1e-2).unwrap();
        assert_eq!(p.entry_lambda[2], 0.0);
    }

    #[test]
    fn entry_lambda_brackets_activation() {
        for (seed, alpha) in [(11, 1.0), (13, 1.0), (15, 0.7)] {
            let x = gaussian(80, 10, seed);
            let y = vec_gauss(80, seed + 1);
            let sys = GramSystem::from_design(&x, &y).unwrap();
            let p = sys.path(alpha, 30, 1e-3, 1e-9).unwrap();
            for j in 0..10 {
                let e = p.entry_lambda[j];
                if e == 0.0 || e >= sys.lambda_max(alpha) * (1.0 - 1e-9) {
                    continue;
                }
                let below = sys.solve(alpha, e * (1.0 - 1e-5), None, 1e-11).unwrap();
                let above = sys.solve(alpha, e * (1.0 + 1e-5), None, 1e-11).unwrap();
                assert!(below[j] != 0.0 && above[j] == 0.0, "variable {j}, alpha {alpha}");
            }
            let top = (0..10).max_by(|&a, &b| sys.xty[a].abs().total_cmp(&sys.xty[b].abs())).unwrap();
            assert!((p.entry_lambda[top] - sys.lambda_max(alpha)).abs() / sys.lambda_max(alpha) < 1e-4);
        }
    }

    #[test]
    fn strong_predictor_enters_first() {
        let mut wins = 0;
        for t in 0..100u64 {
            let x = gaussian(100, 10, 1000 + t);
            let noise = vec_gauss(100, 5000 + t);
            let y = x.column(0) * 0.5 + noise;
            let p = path(&y, &x, 1.0, 100, 1e-4).unwrap();
            let best_noise = p.entry_lambda[1..].iter().cloned().fold(0.0, f64::max);
            if p.entry_lambda[0] > best_noise {
                wins += 1;
            }
        }
        assert!(wins >= 95, "{wins}");
    }

    #[test]
    fn quantile_matches_type7() {
        let path = EnetPath {
            alpha: 1.0,
            lambdas: vec![8.0, 4.0, 2.0, 1.0],
            coefficients: DMatrix::zeros(4, 1),
            entry_lambda: vec![0.0],
        };
        assert_eq!(path.lambda_quantile(1.0), 8.0);
        assert_eq!(path.lambda_quantile(0.0), 1.0);
        assert!((path.lambda_quantile(0.5) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn column_permutation_is_exact() {
        let x = gaussian(40, 6, 13);
        let y = vec_gauss(40, 14);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let xp = DMatrix::from_fn(40, 6, |i, j| x[(i, perm[j])]);
        let a = GramSystem::from_design(&x, &y).unwrap().path(0.6, 40, 1e-3, 1e-7).unwrap();
        let b = GramSystem::from_design(&xp, &y).unwrap().path(0.6, 40, 1e-3, 1e-7).unwrap();
        for j in 0..6 {
            assert_eq!(a.entry_lambda[perm[j]].to_bits(), b.entry_lambda[j].to_bits());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kkt_holds(seed in 0u64..100_000, alpha in 0.05f64..=1.0, frac in 0.001f64..1.0) {
            let x = gaussian(30, 8, seed);
            let y = vec_gauss(30, seed + 1);
            let sys = GramSystem::from_design(&x, &y).unwrap();
            let lam = sys.lambda_max(alpha) * frac;
            let b = sys.solve(alpha, lam, None, 1e-7).unwrap();
            prop_assert!(sys.kkt_violation(&b, alpha, lam) <= 1e-7);
        }

        #[test]
        fn warm_and_cold_agree(seed in 0u64..100_000) {
            let x = gaussian(40, 6, seed);
            let y = vec_gauss(40, seed + 7);
            let sys = GramSystem::from_design(&x, &y).unwrap();
            let p = sys.path(0.8, 15, 1e-2, 1e-7).unwrap();
            for k in 0..15 {
                let cold = sys.solve(0.8, p.lambdas[k], None, 1e-7).unwrap();
                for j in 0..6 {
                    prop_assert!((cold[j] - p.coefficients[(k, j)]).abs() <= 1e-6);
                }
            }
        }
    }
}
