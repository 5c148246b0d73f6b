//! Hyperparameter selection by sample splitting, the recycled filter that
//! reuses the selection half inside the knockoffs, and majority aggregation
//! over repeated splits.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::filter::{assemble_graph, solve_thresholds, AcPair, Control, FilterConfig, GraphEstimate, Rule};
use crate::knockoff::{standardize, Strategy};
use crate::seeds::{child, tags};
use crate::stats::{build_w_matrices, default_recipes, Combiner, StatRecipe};

#[derive(Clone, Debug, PartialEq)]
pub struct HyperGrid {
    pub ac_set: Vec<AcPair>,
    pub strategies: Vec<Strategy>,
    pub recipes: Vec<StatRecipe>,
    pub rules: Vec<Rule>,
}

impl Default for HyperGrid {
    /// 2 × 2 × 110 × 2 = 880 combinations.
    fn default() -> Self {
        HyperGrid {
            ac_set: AcPair::standard_pairs().to_vec(),
            strategies: vec![Strategy::Equi, Strategy::Sdp],
            recipes: default_recipes(),
            rules: vec![Rule::And, Rule::Or],
        }
    }
}

impl HyperGrid {
    /// 16 combinations: both (a, c_a) pairs, both strategies, entry-λ
    /// statistics at α = 1 with both combiners, both rules.
    pub fn reduced() -> Self {
        HyperGrid {
            recipes: vec![StatRecipe::entry(Combiner::Difference, 1.0), StatRecipe::entry(Combiner::SignedMax, 1.0)],
            ..HyperGrid::default()
        }
    }

    pub fn single(ac: AcPair, strategy: Strategy, recipe: StatRecipe, rule: Rule) -> Self {
        HyperGrid { ac_set: vec![ac], strategies: vec![strategy], recipes: vec![recipe], rules: vec![rule] }
    }

    pub fn len(&self) -> usize {
        self.ac_set.len() * self.strategies.len() * self.recipes.len() * self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("hyperparameter grid is empty".into()));
        }
        self.recipes.iter().try_for_each(|r| r.validate())
    }

    /// Combinations in lexicographic (ac, strategy, recipe, rule) order, as
    /// index tuples.
    fn combos(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for a in 0..self.ac_set.len() {
            for s in 0..self.strategies.len() {
                for r in 0..self.recipes.len() {
                    for u in 0..self.rules.len() {
                        out.push((a, s, r, u));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub part1: Vec<usize>,
    pub part2: Vec<usize>,
}

impl SplitPlan {
    /// Random split with |part1| = ⌊n/2⌋; both parts sorted.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut part1 = perm[..n / 2].to_vec();
        let mut part2 = perm[n / 2..].to_vec();
        part1.sort_unstable();
        part2.sort_unstable();
        SplitPlan { part1, part2 }
    }

    pub fn n1(&self) -> usize {
        self.part1.len()
    }
}

fn take_rows(data: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), data.ncols(), |i, j| data[(rows[i], j)])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub ac: AcPair,
    pub strategy: Strategy,
    pub recipe: StatRecipe,
    pub rule: Rule,
    /// |Ê| reached on the selection half.
    pub discoveries: usize,
    /// Number of combinations sharing the maximum.
    pub ties: usize,
}

impl Selection {
    pub fn config(&self, q: f64, control: Control) -> FilterConfig {
        FilterConfig { q, control, ac: self.ac, rule: self.rule }
    }
}

/// Index of the maximal score; ties are broken uniformly with one draw.
pub fn argmax_uniform<R: Rng + ?Sized>(scores: &[usize], rng: &mut R) -> (usize, usize) {
    let best = scores.iter().copied().max().unwrap_or(0);
    let ties: Vec<usize> = (0..scores.len()).filter(|&k| scores[k] == best).collect();
    (ties[rng.random_range(0..ties.len())], ties.len())
}

/// Run the fixed filter on `part1` for every grid combination and keep the
/// one with the most discoveries.
pub fn select_hyperparams<R: Rng + ?Sized>(
    part1: &DMatrix<f64>,
    q: f64,
    control: Control,
    grid: &HyperGrid,
    rng: &mut R,
    exec: Exec,
) -> Result<Selection> {
    grid.validate()?;
    let (n, p) = part1.shape();
    if n < 2 * p {
        return Err(Error::InsufficientSamples { n, p, required: 2 * p });
    }
    let d = standardize(part1)?;
    let seed: u64 = rng.random();
    let mut ws = Vec::with_capacity(grid.strategies.len());
    for (k, &strategy) in grid.strategies.iter().enumerate() {
        ws.push(build_w_matrices(&d, 0, &grid.recipes, strategy, child(seed, tags::GRID, k as u64).random(), exec)?);
    }
    let combos = grid.combos();
    let scores = exec.try_map(combos.len(), |k| -> Result<usize> {
        let (a, s, r, u) = combos[k];
        let cfg = FilterConfig { q, control, ac: grid.ac_set[a], rule: grid.rules[u] };
        cfg.validate()?;
        let w = &ws[s][r];
        Ok(assemble_graph(w, &solve_thresholds(w, &cfg).t, cfg.rule).len())
    })?;
    let (k, ties) = argmax_uniform(&scores, rng);
    let (a, s, r, u) = combos[k];
    Ok(Selection {
        ac: grid.ac_set[a],
        strategy: grid.strategies[s],
        recipe: grid.recipes[r],
        rule: grid.rules[u],
        discoveries: scores[k],
        ties,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecycledOutcome {
    pub estimate: GraphEstimate,
    pub selection: Selection,
    pub split: SplitPlan,
}

/// Split at random and run the selection step on the first half.
pub fn split_and_select<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    q: f64,
    control: Control,
    grid: &HyperGrid,
    rng: &mut R,
    exec: Exec,
) -> Result<(SplitPlan, Selection)> {
    let (n, p) = data.shape();
    if n < 4 * p {
        return Err(Error::InsufficientSamples { n, p, required: 4 * p });
    }
    let split = SplitPlan::random(n, rng);
    let selection = select_hyperparams(&take_rows(data, &split.part1), q, control, grid, rng, exec)?;
    Ok((split, selection))
}

/// Final filter for a given split and selection. With `recycle` the W
/// matrices come from the stacked [X₁; X₂] with X₁ copied into the
/// knockoffs; without it only X₂ is used.
pub fn final_estimate(
    data: &DMatrix<f64>,
    split: &SplitPlan,
    selection: &Selection,
    q: f64,
    control: Control,
    recycle: bool,
    seed: u64,
    exec: Exec,
) -> Result<GraphEstimate> {
    let (d, n1) = if recycle {
        let rows: Vec<usize> = split.part1.iter().chain(&split.part2).copied().collect();
        (standardize(&take_rows(data, &rows))?, split.n1())
    } else {
        (standardize(&take_rows(data, &split.part2))?, 0)
    };
    let w = build_w_matrices(&d, n1, &[selection.recipe], selection.strategy, seed, exec)?.remove(0);
    let cfg = selection.config(q, control);
    Ok(assemble_graph(&w, &solve_thresholds(&w, &cfg).t, cfg.rule))
}

/// Split, select on the first half, then filter the stacked matrix
/// [X₁; X₂] with knockoffs that copy X₁ verbatim.
pub fn recycled_filter<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    q: f64,
    control: Control,
    grid: &HyperGrid,
    rng: &mut R,
    exec: Exec,
) -> Result<RecycledOutcome> {
    let (split, selection) = split_and_select(data, q, control, grid, rng, exec)?;
    let estimate = final_estimate(data, &split, &selection, q, control, true, rng.random(), exec)?;
    Ok(RecycledOutcome { estimate, selection, split })
}

/// Same selection step, but the final filter sees only the second half.
pub fn split_filter<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    q: f64,
    control: Control,
    grid: &HyperGrid,
    rng: &mut R,
    exec: Exec,
) -> Result<RecycledOutcome> {
    let (split, selection) = split_and_select(data, q, control, grid, rng, exec)?;
    let estimate = final_estimate(data, &split, &selection, q, control, false, rng.random(), exec)?;
    Ok(RecycledOutcome { estimate, selection, split })
}

/// Edges found in strictly more than half of `results`.
pub fn majority_edges(results: &[GraphEstimate], p: usize) -> GraphEstimate {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in results {
        for &e in &r.edges {
            *counts.entry(e).or_default() += 1;
        }
    }
    let mut out = GraphEstimate::empty(p);
    for (e, c) in counts {
        if 2 * c > results.len() {
            out.edges.insert(e);
            out.neighborhoods[e.0].push(e.1);
            out.neighborhoods[e.1].push(e.0);
        }
    }
    out
}

/// Recycled filter over `num_splits` independent splits, majority vote.
/// Split k draws from child(seed, SPLIT, k) with `seed` taken from `rng`.
pub fn aggregate_splits<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    q: f64,
    control: Control,
    grid: &HyperGrid,
    num_splits: usize,
    rng: &mut R,
    exec: Exec,
) -> Result<GraphEstimate> {
    if num_splits == 0 {
        return Err(Error::InvalidArgument("num_splits must be at least 1".into()));
    }
    let seed: u64 = rng.random();
    let runs = exec.try_map(num_splits, |k| {
        recycled_filter(data, q, control, grid, &mut child(seed, tags::SPLIT, k as u64), exec).map(|o| o.estimate)
    })?;
    Ok(majority_edges(&runs, data.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from;
    use crate::simgen::{generate_precision, sample_gaussian, GraphKind, PrecisionSpec};

    fn band(p: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let (omega, _) = generate_precision(&PrecisionSpec::new(GraphKind::Band, p, -0.6, 1)).unwrap();
        sample_gaussian(&omega, n, &mut rng_from(seed)).unwrap()
    }

    #[test]
    fn default_grid_size() {
        assert_eq!(HyperGrid::default().len(), 880);
        assert_eq!(HyperGrid::reduced().len(), 16);
    }

    #[test]
    fn split_plan_partitions() {
        for n in [0, 1, 7, 40] {
            let s = SplitPlan::random(n, &mut rng_from(n as u64));
            assert_eq!(s.n1(), n / 2);
            assert_eq!(s.part2.len(), n - n / 2);
            let mut all: Vec<usize> = s.part1.iter().chain(&s.part2).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tie_break_is_uniform() {
        let mut rng = rng_from(11);
        let mut hits = [0usize; 4];
        for _ in 0..1000 {
            hits[argmax_uniform(&[0, 0, 0, 0], &mut rng).0] += 1;
        }
        for h in hits {
            assert!((h as f64 / 1000.0 - 0.25).abs() <= 0.05, "{hits:?}");
        }
    }

    #[test]
    fn planted_maximum_wins() {
        let mut rng = rng_from(2);
        for _ in 0..50 {
            assert_eq!(argmax_uniform(&[3, 1, 9, 3, 0], &mut rng), (2, 1));
        }
    }

    #[test]
    fn single_combination_grid() {
        let rec = StatRecipe::entry(Combiner::Difference, 1.0);
        let grid = HyperGrid::single(AcPair::ONE, Strategy::Equi, rec, Rule::Or);
        let x = band(8, 40, 3);
        let sel = select_hyperparams(&x, 0.2, Control::Fdr, &grid, &mut rng_from(4), Exec::Sequential).unwrap();
        assert_eq!((sel.ac, sel.strategy, sel.recipe, sel.rule), (AcPair::ONE, Strategy::Equi, rec, Rule::Or));
    }

    #[test]
    fn empty_selection_is_uniform_over_grid() {
        // p = 6 makes every (a, c_a) pair infeasible, so all scores are 0
        let grid = HyperGrid {
            recipes: vec![StatRecipe::entry(Combiner::Difference, 1.0)],
            strategies: vec![Strategy::Equi],
            ..HyperGrid::default()
        };
        let x = band(6, 24, 1);
        let mut rng = rng_from(9);
        let mut seen = BTreeMap::new();
        for _ in 0..200 {
            let sel = select_hyperparams(&x, 0.2, Control::Fdr, &grid, &mut rng, Exec::Sequential).unwrap();
            assert_eq!((sel.discoveries, sel.ties), (0, 4));
            *seen.entry((sel.ac.a.to_bits(), sel.rule)).or_insert(0usize) += 1;
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn recycled_requires_four_p() {
        let x = band(10, 39, 0);
        let r = recycled_filter(&x, 0.2, Control::Fdr, &HyperGrid::reduced(), &mut rng_from(0), Exec::Sequential);
        assert!(matches!(r, Err(Error::InsufficientSamples { required: 40, .. })));
    }

    #[test]
    fn recycled_is_deterministic() {
        let x = band(10, 80, 5);
        let grid = HyperGrid::reduced();
        let a = recycled_filter(&x, 0.2, Control::Fdr, &grid, &mut rng_from(6), Exec::Sequential).unwrap();
        let b = recycled_filter(&x, 0.2, Control::Fdr, &grid, &mut rng_from(6), Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mfdr_discovers_at_least_as_many() {
        let x = band(10, 80, 8);
        let (split, sel) = split_and_select(&x, 0.2, Control::Fdr, &HyperGrid::reduced(), &mut rng_from(3), Exec::Sequential).unwrap();
        for recycle in [true, false] {
            let e = |c| final_estimate(&x, &split, &sel, 0.2, c, recycle, 77, Exec::Sequential).unwrap().len();
            assert!(e(Control::Mfdr) >= e(Control::Fdr));
        }
    }

    #[test]
    fn recycled_knockoffs_copy_first_half() {
        let x = band(6, 48, 4);
        let split = SplitPlan::random(48, &mut rng_from(1));
        let rows: Vec<usize> = split.part1.iter().chain(&split.part2).copied().collect();
        let d = standardize(&take_rows(&x, &rows)).unwrap();
        let ko = crate::stats::node_knockoffs(&d, 2, split.n1(), Strategy::Sdp, &mut rng_from(2)).unwrap();
        let n1 = split.n1();
        assert_eq!(ko.knockoff.rows(0, n1), ko.original.rows(0, n1));
        let (a, b) = ko.gram_deviation();
        assert!(a < 1e-8 && b < 1e-8);
    }

    fn with_edges(edges: &[(usize, usize)]) -> GraphEstimate {
        GraphEstimate { edges: edges.iter().copied().collect(), neighborhoods: vec![] }
    }

    #[test]
    fn strict_majority() {
        let mut runs = vec![with_edges(&[(0, 1)]); 10];
        runs.extend(vec![with_edges(&[]); 10]);
        assert!(majority_edges(&runs, 3).is_empty());
        runs[10] = with_edges(&[(0, 1)]);
        assert_eq!(majority_edges(&runs, 3).edges, with_edges(&[(0, 1)]).edges);
    }

    #[test]
    fn one_split_matches_recycled_filter() {
        let x = band(8, 64, 2);
        let grid = HyperGrid::reduced();
        let agg = aggregate_splits(&x, 0.2, Control::Mfdr, &grid, 1, &mut rng_from(5), Exec::Sequential).unwrap();
        let seed: u64 = rng_from(5).random();
        let one = recycled_filter(&x, 0.2, Control::Mfdr, &grid, &mut child(seed, tags::SPLIT, 0), Exec::Sequential).unwrap();
        assert_eq!(agg.edges, one.estimate.edges);
    }
}
