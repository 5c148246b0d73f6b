//! Node-wise feature statistics and the p × p matrix W.
//!
//! Column i of W holds the statistics from regressing X_i on the other
//! columns and their knockoffs; entry (i, i) is zero.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::enet::{GramSystem, DEFAULT_TOL, GRID_RATIO, GRID_SIZE};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::knockoff::{
    compute_s, compute_s_scaled, construct_knockoffs, construct_recycled_knockoffs, DesignMatrix, KnockoffSet,
    Strategy,
};
use crate::seeds::{child, tags};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ZKind {
    EntryLambda,
    CoefMagnitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Combiner {
    Difference,
    SignedMax,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatRecipe {
    pub z_kind: ZKind,
    pub combiner: Combiner,
    pub alpha: f64,
    pub lambda_quantile: Option<f64>,
}

impl StatRecipe {
    pub fn entry(combiner: Combiner, alpha: f64) -> Self {
        StatRecipe { z_kind: ZKind::EntryLambda, combiner, alpha, lambda_quantile: None }
    }

    pub fn coef(combiner: Combiner, alpha: f64, quantile: f64) -> Self {
        StatRecipe { z_kind: ZKind::CoefMagnitude, combiner, alpha, lambda_quantile: Some(quantile) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("recipe alpha must lie in (0,1], got {}", self.alpha)));
        }
        match (self.z_kind, self.lambda_quantile) {
            (ZKind::EntryLambda, None) => Ok(()),
            (ZKind::CoefMagnitude, Some(q)) if q > 0.0 && q <= 1.0 => Ok(()),
            _ => Err(Error::InvalidArgument("lambda_quantile must be given exactly for coef_magnitude".into())),
        }
    }

    /// Compact label such as `entry/diff/a0.4` or `coef/smax/a1/q0.3`.
    pub fn label(&self) -> String {
        let c = match self.combiner {
            Combiner::Difference => "diff",
            Combiner::SignedMax => "smax",
        };
        match self.lambda_quantile {
            None => format!("entry/{c}/a{}", self.alpha),
            Some(q) => format!("coef/{c}/a{}/q{}", self.alpha, q),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognized recipe '{s}'"));
        let parts: Vec<&str> = s.split('/').collect();
        let combiner = match parts.get(1) {
            Some(&"diff") => Combiner::Difference,
            Some(&"smax") => Combiner::SignedMax,
            _ => return Err(bad()),
        };
        let num = |p: Option<&&str>, prefix: char| -> Result<f64> {
            p.and_then(|t| t.strip_prefix(prefix)).and_then(|t| t.parse().ok()).ok_or_else(bad)
        };
        let alpha = num(parts.get(2), 'a')?;
        let r = match (parts.first(), parts.len()) {
            (Some(&"entry"), 3) => StatRecipe::entry(combiner, alpha),
            (Some(&"coef"), 4) => StatRecipe::coef(combiner, alpha, num(parts.get(3), 'q')?),
            _ => return Err(bad()),
        };
        r.validate()?;
        Ok(r)
    }
}

pub const DEFAULT_ALPHAS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// The 110 recipes: 10 entry-λ plus 100 coefficient-magnitude variants.
pub fn default_recipes() -> Vec<StatRecipe> {
    let mut out = Vec::with_capacity(110);
    for combiner in [Combiner::Difference, Combiner::SignedMax] {
        for &alpha in &DEFAULT_ALPHAS {
            out.push(StatRecipe::entry(combiner, alpha));
        }
    }
    for combiner in [Combiner::Difference, Combiner::SignedMax] {
        for &alpha in &DEFAULT_ALPHAS {
            for k in 1..=10 {
                out.push(StatRecipe::coef(combiner, alpha, k as f64 / 10.0));
            }
        }
    }
    out
}

pub fn combine(z: &[f64], zt: &[f64], combiner: Combiner) -> Vec<f64> {
    z.iter()
        .zip(zt)
        .map(|(&a, &b)| match combiner {
            Combiner::Difference => a - b,
            Combiner::SignedMax => {
                let d = a - b;
                if d == 0.0 {
                    0.0
                } else {
                    a.max(b) * d.signum()
                }
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStatMatrix {
    /// Entry (j, i) is W⁽ⁱ⁾_j.
    pub w: DMatrix<f64>,
}

impl FeatureStatMatrix {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.w.column(i).iter().copied().collect()
    }
}

/// Statistics for many recipes from one augmented regression, sharing one
/// path per distinct α.
pub fn stats_for_recipes(sys: &GramSystem, recipes: &[StatRecipe]) -> Result<Vec<Vec<f64>>> {
    let m2 = sys.dim();
    if !m2.is_multiple_of(2) {
        return Err(Error::InvalidArgument("augmented design must have an even column count".into()));
    }
    let m = m2 / 2;
    let mut paths = BTreeMap::new();
    let mut out = Vec::with_capacity(recipes.len());
    for r in recipes {
        r.validate()?;
        let key = r.alpha.to_bits();
        if let std::collections::btree_map::Entry::Vacant(e) = paths.entry(key) {
            e.insert(sys.path(r.alpha, GRID_SIZE, GRID_RATIO, DEFAULT_TOL)?);
        }
        let path = &paths[&key];
        let z: Vec<f64> = match r.z_kind {
            ZKind::EntryLambda => path.entry_lambda.clone(),
            ZKind::CoefMagnitude => sys
                .coef_at_quantile(path, r.lambda_quantile.unwrap_or(1.0), DEFAULT_TOL)?
                .iter()
                .map(|b| b.abs())
                .collect(),
        };
        out.push(combine(&z[..m], &z[m..], r.combiner));
    }
    Ok(out)
}

/// W for one recipe computed from the sufficient statistics alone.
pub fn stats_from_system(sys: &GramSystem, recipe: &StatRecipe) -> Result<Vec<f64>> {
    Ok(stats_for_recipes(sys, std::slice::from_ref(recipe))?.remove(0))
}

/// W from an explicit augmented design [X X̃] (n × 2m) and response.
pub fn stats_from_augmented(aug: &DMatrix<f64>, y: &DVector<f64>, recipe: &StatRecipe) -> Result<Vec<f64>> {
    stats_from_system(&GramSystem::from_design(aug, y)?, recipe)
}

fn drop_column(x: &DMatrix<f64>, i: usize) -> DMatrix<f64> {
    x.clone().remove_column(i)
}

/// Scatter m = p − 1 node statistics into a length-p vector with a zero at `node`.
fn expand(node: usize, w: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len() + 1);
    out.extend_from_slice(&w[..node]);
    out.push(0.0);
    out.extend_from_slice(&w[node..]);
    out
}

pub fn node_statistics(node: usize, data: &DesignMatrix, knockoffs: &KnockoffSet, recipe: &StatRecipe) -> Result<Vec<f64>> {
    let p = data.ncols();
    if node >= p || knockoffs.original.ncols() + 1 != p {
        return Err(Error::InvalidArgument("knockoffs must be built for the design without the node".into()));
    }
    let y = data.values.column(node).into_owned();
    let w = stats_from_augmented(&knockoffs.augmented(), &y, recipe)?;
    Ok(expand(node, &w))
}

/// Knockoffs for node `node`: plain when `n1 == 0`, otherwise recycled with
/// the first `n1` rows copied verbatim.
pub fn node_knockoffs<R: Rng + ?Sized>(
    data: &DesignMatrix,
    node: usize,
    n1: usize,
    strategy: Strategy,
    rng: &mut R,
) -> Result<KnockoffSet> {
    let x = drop_column(&data.values, node);
    if n1 == 0 {
        let mut d = DesignMatrix::raw(x);
        d.standardized = data.standardized;
        let s = compute_s(&d.gram(), strategy)?;
        construct_knockoffs(&d, &s, rng)
    } else {
        let n = x.nrows();
        let part1 = x.rows(0, n1).into_owned();
        let part2 = x.rows(n1, n - n1).into_owned();
        let s = compute_s_scaled(&part2.tr_mul(&part2), strategy)?;
        construct_recycled_knockoffs(&part1, &part2, &s, rng)
    }
}

/// W matrices for every recipe under one strategy. Knockoffs for node i use
/// the stream derived from (seed, node, i), so results do not depend on the
/// execution mode.
pub fn build_w_matrices(
    data: &DesignMatrix,
    n1: usize,
    recipes: &[StatRecipe],
    strategy: Strategy,
    seed: u64,
    exec: Exec,
) -> Result<Vec<FeatureStatMatrix>> {
    let (n, p) = (data.nrows(), data.ncols());
    let usable = n - n1.min(n);
    if p < 2 {
        return Err(Error::InvalidArgument("need at least two variables".into()));
    }
    if usable < 2 * (p - 1) {
        return Err(Error::InsufficientSamples { n: usable, p: p - 1, required: 2 * (p - 1) });
    }
    let columns = exec.try_map(p, |i| -> Result<Vec<Vec<f64>>> {
        let mut rng = child(seed, tags::NODE, i as u64);
        let ko = node_knockoffs(data, i, n1, strategy, &mut rng)?;
        let y = data.values.column(i).into_owned();
        let sys = GramSystem::from_design(&ko.augmented(), &y)?;
        Ok(stats_for_recipes(&sys, recipes)?.into_iter().map(|w| expand(i, &w)).collect())
    })?;
    Ok((0..recipes.len())
        .map(|r| FeatureStatMatrix { w: DMatrix::from_fn(p, p, |j, i| columns[i][r][j]) })
        .collect())
}

pub fn build_w_matrix<R: Rng + ?Sized>(
    data: &DesignMatrix,
    recipe: &StatRecipe,
    strategy: Strategy,
    rng: &mut R,
    exec: Exec,
) -> Result<FeatureStatMatrix> {
    let seed: u64 = rng.random();
    Ok(build_w_matrices(data, 0, std::slice::from_ref(recipe), strategy, seed, exec)?.remove(0))
}
