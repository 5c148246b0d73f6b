//! Global thresholding: the linear-model knockoff threshold, the threshold
//! vector for graphs, and AND/OR edge assembly.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::calibration::compute_ca;
use crate::enet::GramSystem;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::knockoff::{compute_s, construct_knockoffs, standardize, Strategy};
use crate::stats::{build_w_matrix, stats_from_system, FeatureStatMatrix, StatRecipe};

const ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    And,
    Or,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::And => "and",
            Rule::Or => "or",
        }
    }
}

/// FDR (δ = 1) or the modified FDR (δ = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Control {
    Fdr,
    Mfdr,
}

impl Control {
    pub fn delta(self) -> f64 {
        match self {
            Control::Fdr => 1.0,
            Control::Mfdr => 0.0,
        }
    }

    pub fn from_delta(d: u8) -> Result<Self> {
        match d {
            1 => Ok(Control::Fdr),
            0 => Ok(Control::Mfdr),
            _ => Err(Error::InvalidArgument(format!("delta must be 0 or 1, got {d}"))),
        }
    }
}

/// The pair (a, c_a) with c_a bounding E[sup |V⁺|/(a + |V⁻|)].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcPair {
    pub a: f64,
    pub c_a: f64,
}

impl AcPair {
    pub const ONE: AcPair = AcPair { a: 1.0, c_a: 1.93 };
    pub const SMALL: AcPair = AcPair { a: 0.01, c_a: 102.0 };

    pub fn standard_pairs() -> [AcPair; 2] {
        [AcPair::ONE, AcPair::SMALL]
    }

    /// A pair whose constant comes from the calibration bound.
    pub fn calibrated(a: f64, k0: u32) -> Result<Self> {
        Ok(AcPair { a, c_a: compute_ca(a, k0)?.value })
    }

    /// Any pair, without checking that c_a is a valid bound. Only for
    /// exercising the threshold solver.
    pub fn custom_unchecked(a: f64, c_a: f64) -> Self {
        AcPair { a, c_a }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    pub q: f64,
    pub control: Control,
    pub ac: AcPair,
    pub rule: Rule,
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidArgument(format!("q must lie in [0,1], got {}", self.q)));
        }
        if !(self.ac.a > 0.0 && self.ac.c_a > 0.0) {
            return Err(Error::InvalidArgument("a and c_a must be positive".into()));
        }
        Ok(())
    }

    /// Right-hand side of every per-node constraint.
    pub fn level(&self, p: usize) -> f64 {
        let base = self.q / (self.ac.c_a * p as f64);
        match self.rule {
            Rule::And => 2.0 * base,
            Rule::Or => base,
        }
    }
}

/// Smallest T among {|W_i|} \ {0} with (δ + #{W ≤ −T}) / (#{W ≥ T} ∨ 1) ≤ q.
pub fn linear_threshold(w: &[f64], q: f64, control: Control) -> f64 {
    let mut cands: Vec<f64> = w.iter().map(|v| v.abs()).filter(|&v| v > ZERO_TOL).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    for t in cands {
        let neg = w.iter().filter(|&&v| v <= -t).count() as f64;
        let pos = w.iter().filter(|&&v| v >= t).count().max(1) as f64;
        if (control.delta() + neg) / pos <= q {
            return t;
        }
    }
    f64::INFINITY
}

pub fn linear_selection(w: &[f64], t: f64) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] >= t).collect()
}

/// The linear-model filter: knockoffs for X, statistics from the augmented
/// regression of y, then the data-dependent threshold. Returns the
/// selected column indices.
pub fn linear_knockoff_filter<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    q: f64,
    control: Control,
    recipe: &StatRecipe,
    strategy: Strategy,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let (n, p) = x.shape();
    if n < 2 * p {
        return Err(Error::InsufficientSamples { n, p, required: 2 * p });
    }
    let d = standardize(x)?;
    let s = compute_s(&d.gram(), strategy)?;
    let ko = construct_knockoffs(&d, &s, rng)?;
    let w = stats_from_system(&GramSystem::from_design(&ko.augmented(), y)?, recipe)?;
    Ok(linear_selection(&w, linear_threshold(&w, q, control)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdVector {
    pub t: Vec<f64>,
    pub config: FilterConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphEstimate {
    /// Unordered pairs stored as (i, j) with i < j.
    pub edges: BTreeSet<(usize, usize)>,
    /// V̂⁺_i for every node.
    pub neighborhoods: Vec<Vec<usize>>,
}

impl GraphEstimate {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn empty(p: usize) -> Self {
        GraphEstimate { edges: BTreeSet::new(), neighborhoods: vec![Vec::new(); p] }
    }
}

/// Largest m checked by the threshold search; negative means nothing can
/// be feasible.
pub fn m_max(p: usize, cfg: &FilterConfig) -> i64 {
    let k = match cfg.rule {
        Rule::And => 1.0,
        Rule::Or => 2.0,
    };
    (cfg.q * (p as f64 - 1.0) / (k * cfg.ac.c_a) - cfg.ac.a * cfg.control.delta()).floor() as i64
}

/// Per-column candidate thresholds (ascending, zeros removed) with the
/// matching |V̂⁻| counts.
struct Column {
    cands: Vec<f64>,
    neg: Vec<usize>,
}

fn column_candidates(w: &FeatureStatMatrix, i: usize) -> Column {
    let col = w.column(i);
    let mut cands: Vec<f64> = col.iter().map(|v| v.abs()).filter(|&v| v > ZERO_TOL).collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let neg = cands.iter().map(|&t| col.iter().filter(|&&v| v <= -t).count()).collect();
    Column { cands, neg }
}

fn count_neg(w: &FeatureStatMatrix, i: usize, t: f64) -> usize {
    if t.is_infinite() {
        return 0;
    }
    w.w.column(i).iter().filter(|&&v| v <= -t).count()
}

pub fn assemble_graph(w: &FeatureStatMatrix, t: &[f64], rule: Rule) -> GraphEstimate {
    let p = w.dim();
    let neighborhoods: Vec<Vec<usize>> = (0..p)
        .map(|i| (0..p).filter(|&j| j != i && t[i].is_finite() && w.w[(j, i)] >= t[i]).collect())
        .collect();
    let mut member = vec![vec![false; p]; p];
    for (i, nb) in neighborhoods.iter().enumerate() {
        for &j in nb {
            member[i][j] = true;
        }
    }
    let mut edges = BTreeSet::new();
    for i in 0..p {
        for j in i + 1..p {
            let keep = match rule {
                Rule::And => member[i][j] && member[j][i],
                Rule::Or => member[i][j] || member[j][i],
            };
            if keep {
                edges.insert((i, j));
            }
        }
    }
    GraphEstimate { edges, neighborhoods }
}

/// Whether `t` satisfies every per-node constraint; returns |Ê| as well.
pub fn check_thresholds(w: &FeatureStatMatrix, t: &[f64], cfg: &FilterConfig) -> (bool, usize) {
    let p = w.dim();
    let e = assemble_graph(w, t, cfg.rule).len();
    let denom = e.max(1) as f64;
    let level = cfg.level(p);
    let extra = cfg.ac.a * cfg.control.delta();
    let ok = (0..p).all(|i| (extra + count_neg(w, i, t[i]) as f64) / denom <= level);
    (ok, e)
}

/// The threshold vector maximizing |Ê| under the per-node constraints.
pub fn solve_thresholds(w: &FeatureStatMatrix, cfg: &FilterConfig) -> ThresholdVector {
    let p = w.dim();
    let none = ThresholdVector { t: vec![f64::INFINITY; p], config: *cfg };
    let mm = m_max(p, cfg);
    if mm < 0 {
        return none;
    }
    let cols: Vec<Column> = (0..p).map(|i| column_candidates(w, i)).collect();
    for m in (0..=mm as usize).rev() {
        let t: Vec<f64> = cols
            .iter()
            .map(|c| c.cands.iter().zip(&c.neg).find(|&(_, &k)| k <= m).map_or(f64::INFINITY, |(&t, _)| t))
            .collect();
        if check_thresholds(w, &t, cfg).0 {
            return ThresholdVector { t, config: *cfg };
        }
    }
    none
}

/// Exhaustive search over every candidate tuple; exponential in p.
pub fn brute_force_thresholds(w: &FeatureStatMatrix, cfg: &FilterConfig) -> (usize, Vec<f64>) {
    let p = w.dim();
    let opts: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let mut c = column_candidates(w, i).cands;
            c.push(f64::INFINITY);
            c
        })
        .collect();
    let mut idx = vec![0usize; p];
    let mut best = (0usize, vec![f64::INFINITY; p]);
    loop {
        let t: Vec<f64> = (0..p).map(|i| opts[i][idx[i]]).collect();
        let (ok, e) = check_thresholds(w, &t, cfg);
        if ok && e > best.0 {
            best = (e, t);
        }
        let mut k = 0;
        loop {
            if k == p {
                return best;
            }
            idx[k] += 1;
            if idx[k] < opts[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// End-to-end filter on raw data for one fixed hyperparameter choice.
pub fn ggm_knockoff_filter<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    cfg: &FilterConfig,
    recipe: &StatRecipe,
    strategy: Strategy,
    rng: &mut R,
    exec: Exec,
) -> Result<GraphEstimate> {
    cfg.validate()?;
    let (n, p) = data.shape();
    if n < 2 * p {
        return Err(Error::InsufficientSamples { n, p, required: 2 * p });
    }
    let d = standardize(data)?;
    let w = build_w_matrix(&d, recipe, strategy, rng, exec)?;
    let t = solve_thresholds(&w, cfg);
    Ok(assemble_graph(&w, &t.t, cfg.rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn cfg(q: f64, control: Control, ac: AcPair, rule: Rule) -> FilterConfig {
        FilterConfig { q, control, ac, rule }
    }

    fn wmat(p: usize, vals: &[f64]) -> FeatureStatMatrix {
        FeatureStatMatrix { w: DMatrix::from_column_slice(p, p, vals) }
    }

    #[test]
    fn linear_threshold_examples() {
        let w = [3.0, -1.0, 2.0, 4.0, 5.0, 6.0, -2.0, 7.0];
        let t = linear_threshold(&w, 0.5, Control::Fdr);
        // at T = 1: (1 + 2)/6 = 0.5 already meets q
        assert_eq!(t, 1.0);
        assert_eq!(linear_selection(&w, t), vec![0, 2, 3, 4, 5, 7]);
        let w = [3.0, -1.0, 2.0, -2.0, 5.0];
        assert_eq!(linear_threshold(&w, 0.4, Control::Fdr), f64::INFINITY);
        let w = [0.5, 2.0, 1.0];
        assert_eq!(linear_threshold(&w, 0.1, Control::Mfdr), 0.5);
    }

    #[test]
    fn linear_threshold_brute_force() {
        let mut r = rng_from(3);
        for _ in 0..500 {
            let w: Vec<f64> = (0..8).map(|_| r.random_range(-4i32..=4) as f64).collect();
            let q = r.random_range(0.05..1.0);
            let got = linear_threshold(&w, q, Control::Fdr);
            let mut best = f64::INFINITY;
            for &c in &w {
                let t = c.abs();
                if t == 0.0 {
                    continue;
                }
                let neg = w.iter().filter(|&&v| v <= -t).count() as f64;
                let pos = w.iter().filter(|&&v| v >= t).count().max(1) as f64;
                if (1.0 + neg) / pos <= q && t < best {
                    best = t;
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn m_max_examples() {
        assert_eq!(m_max(200, &cfg(0.2, Control::Fdr, AcPair::ONE, Rule::And)), 19);
        assert!(m_max(5, &cfg(0.1, Control::Fdr, AcPair::ONE, Rule::And)) < 0);
    }

    #[test]
    fn negative_m_max_gives_empty_graph() {
        let w = wmat(5, &[0.0, 1.0, 2.0, 3.0, 4.0, 1.0, 0.0, 2.0, 3.0, 4.0, 1.0, 2.0, 0.0, 3.0, 4.0, 1.0, 2.0, 3.0, 0.0, 4.0, 1.0, 2.0, 3.0, 4.0, 0.0]);
        let c = cfg(0.1, Control::Fdr, AcPair::ONE, Rule::And);
        let t = solve_thresholds(&w, &c);
        assert!(t.t.iter().all(|v| v.is_infinite()));
        assert!(assemble_graph(&w, &t.t, Rule::And).is_empty());
    }

    #[test]
    fn infinite_thresholds_empty_graph() {
        let w = wmat(3, &[0.0, 5.0, 5.0, 5.0, 0.0, 5.0, 5.0, 5.0, 0.0]);
        assert!(assemble_graph(&w, &[f64::INFINITY; 3], Rule::Or).is_empty());
    }

    #[test]
    fn and_or_rules() {
        // W⁽¹⁾_2 = 2 ≥ t₁ but W⁽²⁾_1 = 0.5 < t₂
        let w = wmat(3, &[0.0, 2.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let t = [1.0, 1.0, 1.0];
        assert!(assemble_graph(&w, &t, Rule::Or).edges.contains(&(0, 1)));
        assert!(!assemble_graph(&w, &t, Rule::And).edges.contains(&(0, 1)));
    }

    #[test]
    fn ggm_filter_needs_rows() {
        let x = DMatrix::from_fn(7, 4, |i, j| (i * j) as f64 + i as f64);
        let c = cfg(0.2, Control::Fdr, AcPair::ONE, Rule::And);
        let r = StatRecipe::entry(crate::stats::Combiner::Difference, 1.0);
        assert!(matches!(
            ggm_knockoff_filter(&x, &c, &r, Strategy::Equi, &mut rng_from(1), Exec::Sequential),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn calibrated_pair() {
        let ac = AcPair::calibrated(1.0, 10).unwrap();
        assert!(ac.c_a <= 1.94 && ac.c_a > 1.0);
    }

    fn random_w(p: usize, seed: u64) -> FeatureStatMatrix {
        let mut r = rng_from(seed);
        let mut w = DMatrix::from_fn(p, p, |_, _| {
            if r.random_bool(0.5) {
                r.random_range(-3i32..=5) as f64
            } else {
                r.random_range(-3.0..6.0)
            }
        });
        for i in 0..p {
            w[(i, i)] = 0.0;
        }
        FeatureStatMatrix { w }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn and_is_subset_of_or(seed in 0u64..1_000_000, p in 2usize..8) {
            let w = random_w(p, seed);
            let t: Vec<f64> = (0..p).map(|i| (seed as usize + i) as f64 % 4.0 + 0.5).collect();
            let a = assemble_graph(&w, &t, Rule::And);
            let o = assemble_graph(&w, &t, Rule::Or);
            prop_assert!(a.edges.is_subset(&o.edges));
        }

        #[test]
        fn solver_output_feasible_and_optimal(seed in 0u64..1_000_000, p in 2usize..6,
                                              q in 0.05f64..1.0, c in 0.3f64..3.0, a in 0.01f64..1.5,
                                              and in any::<bool>(), fdr in any::<bool>()) {
            let w = random_w(p, seed);
            let rule = if and { Rule::And } else { Rule::Or };
            let control = if fdr { Control::Fdr } else { Control::Mfdr };
            let c = cfg(q, control, AcPair::custom_unchecked(a, c), rule);
            let t = solve_thresholds(&w, &c);
            let (ok, e) = check_thresholds(&w, &t.t, &c);
            prop_assert!(ok || e == 0);
            for (i, &ti) in t.t.iter().enumerate() {
                if ti.is_finite() {
                    prop_assert!(ti > 0.0 && w.w.column(i).iter().any(|v| v.abs() == ti));
                }
            }
            prop_assert_eq!(e, brute_force_thresholds(&w, &c).0);
        }

        #[test]
        fn mfdr_discovers_at_least_as_many(seed in 0u64..1_000_000, p in 2usize..9,
                                           q in 0.05f64..1.0, c in 0.3f64..3.0, a in 0.01f64..1.5, and in any::<bool>()) {
            let w = random_w(p, seed);
            let rule = if and { Rule::And } else { Rule::Or };
            let ac = AcPair::custom_unchecked(a, c);
            let e1 = check_thresholds(&w, &solve_thresholds(&w, &cfg(q, Control::Fdr, ac, rule)).t, &cfg(q, Control::Fdr, ac, rule)).1;
            let e0 = check_thresholds(&w, &solve_thresholds(&w, &cfg(q, Control::Mfdr, ac, rule)).t, &cfg(q, Control::Mfdr, ac, rule)).1;
            prop_assert!(e0 >= e1);
        }
    }
}
