//! Synthetic precision matrices, Gaussian sampling, FDP/TPP and the
//! partial-correlation BH/BY baselines.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::filter::GraphEstimate;
use crate::knockoff::min_eigenvalue;
use crate::seeds::rng_from;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Band,
    Block,
    ErdosRenyi,
    Cluster,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Band => "band",
            GraphKind::Block => "block",
            GraphKind::ErdosRenyi => "er",
            GraphKind::Cluster => "cluster",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "band" => Ok(GraphKind::Band),
            "block" => Ok(GraphKind::Block),
            "er" | "erdos_renyi" | "erdos-renyi" => Ok(GraphKind::ErdosRenyi),
            "cluster" => Ok(GraphKind::Cluster),
            _ => Err(Error::InvalidSpec(format!("unknown graph kind '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionSpec {
    pub kind: GraphKind,
    pub p: usize,
    /// Edge parameter for band and block graphs.
    pub b: f64,
    pub seed: u64,
    /// Block count override; defaults to 10 (block) and 5 (cluster).
    pub blocks: Option<usize>,
}

impl PrecisionSpec {
    pub fn new(kind: GraphKind, p: usize, b: f64, seed: u64) -> Self {
        PrecisionSpec { kind, p, b, seed, blocks: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrueGraph {
    pub p: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl TrueGraph {
    pub fn from_precision(omega: &DMatrix<f64>) -> Self {
        let p = omega.nrows();
        let mut edges = BTreeSet::new();
        for i in 0..p {
            for j in i + 1..p {
                if omega[(i, j)].abs() > 1e-12 {
                    edges.insert((i, j));
                }
            }
        }
        TrueGraph { p, edges }
    }
}

fn er_entry<R: Rng + ?Sized>(rng: &mut R, prob: f64) -> f64 {
    let w = rng.random_range(0.2..=0.6);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    if rng.random_bool(prob) {
        sign * w
    } else {
        0.0
    }
}

fn block_count(spec: &PrecisionSpec, default: usize) -> Result<usize> {
    let k = spec.blocks.unwrap_or(default);
    if k == 0 || !spec.p.is_multiple_of(k) {
        return Err(Error::InvalidSpec(format!("p = {} is not divisible into {k} blocks", spec.p)));
    }
    Ok(k)
}

/// Ω and its edge set. The unshifted pattern is permuted at random, then
/// shifted by (|λ_min| + 0.5)·I.
pub fn generate_precision(spec: &PrecisionSpec) -> Result<(DMatrix<f64>, TrueGraph)> {
    let p = spec.p;
    if p < 2 {
        return Err(Error::InvalidSpec("p must be at least 2".into()));
    }
    let mut rng = rng_from(spec.seed);
    let mut o = DMatrix::<f64>::identity(p, p);
    match spec.kind {
        GraphKind::Band => {
            for i in 0..p {
                for j in 0..p {
                    let d = i.abs_diff(j);
                    if (1..=10).contains(&d) {
                        o[(i, j)] = spec.b.signum() * spec.b.abs().powf(d as f64 / 10.0);
                    }
                }
            }
        }
        GraphKind::Block => {
            let size = p / block_count(spec, 10)?;
            for i in 0..p {
                for j in 0..p {
                    if i != j && i / size == j / size {
                        o[(i, j)] = spec.b;
                    }
                }
            }
        }
        GraphKind::ErdosRenyi | GraphKind::Cluster => {
            let size = match spec.kind {
                GraphKind::Cluster => p / block_count(spec, 5)?,
                _ => p,
            };
            let prob = if spec.kind == GraphKind::Cluster { 0.5 } else { 0.1 };
            for i in 0..p {
                for j in 0..i {
                    if i / size == j / size {
                        let v = er_entry(&mut rng, prob);
                        o[(i, j)] = v;
                        o[(j, i)] = v;
                    }
                }
            }
        }
    }
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut rng);
    let mut omega = DMatrix::from_fn(p, p, |i, j| o[(perm[i], perm[j])]);
    let shift = min_eigenvalue(&omega).abs() + 0.5;
    for i in 0..p {
        omega[(i, i)] += shift;
    }
    let truth = TrueGraph::from_precision(&omega);
    Ok((omega, truth))
}

/// n rows from N(0, Ω⁻¹): solve Lᵀxᵀ = zᵀ with Ω = LLᵀ.
pub fn sample_gaussian<R: Rng + ?Sized>(omega: &DMatrix<f64>, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = omega.nrows();
    let chol = omega.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite(min_eigenvalue(omega)))?;
    if n == 0 {
        return Ok(DMatrix::zeros(0, p));
    }
    let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let lt = chol.l().transpose();
    let xt = lt.solve_upper_triangular(&z).ok_or(Error::NotPositiveDefinite(0.0))?;
    Ok(xt.transpose())
}

/// (|Ê \ E| / (|Ê| ∨ 1), |Ê ∩ E| / (|E| ∨ 1)).
pub fn fdp_tpp(est: &GraphEstimate, truth: &TrueGraph) -> (f64, f64) {
    let hits = est.edges.intersection(&truth.edges).count();
    let false_pos = est.edges.len() - hits;
    (false_pos as f64 / est.edges.len().max(1) as f64, hits as f64 / truth.edges.len().max(1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mtp {
    Bh,
    By,
}

/// Two-sided Fisher-z p-values for every pair (i < j), in row-major pair order.
pub fn partial_correlation_pvalues(data: &DMatrix<f64>) -> Result<Vec<((usize, usize), f64)>> {
    let (n, p) = data.shape();
    if n <= p + 3 {
        return Err(Error::InsufficientSamples { n, p, required: p + 4 });
    }
    let mut x = data.clone();
    for j in 0..p {
        let m = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-m);
    }
    let s = x.tr_mul(&x) / (n as f64 - 1.0);
    let k = s.cholesky().ok_or(Error::SingularCovariance)?.inverse();
    let scale = (n as f64 - p as f64 - 1.0).sqrt();
    let mut out = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            let rho = (-k[(i, j)] / (k[(i, i)] * k[(j, j)]).sqrt()).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
            let z = rho.atanh() * scale;
            out.push(((i, j), erfc(z.abs() / std::f64::consts::SQRT_2)));
        }
    }
    Ok(out)
}

/// Step-up rejections at level `level` (BH form): reject the k smallest
/// p-values, k the largest index with p_(k) ≤ k·level/m.
pub fn step_up(pvals: &[f64], level: f64) -> Vec<bool> {
    let m = pvals.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut k = 0;
    for (rank, &i) in idx.iter().enumerate() {
        if pvals[i] <= (rank + 1) as f64 * level / m as f64 {
            k = rank + 1;
        }
    }
    let mut out = vec![false; m];
    for &i in &idx[..k] {
        out[i] = true;
    }
    out
}

pub fn harmonic(m: usize) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum()
}

pub fn mtp_edges(pvals: &[((usize, usize), f64)], p: usize, q: f64, method: Mtp) -> GraphEstimate {
    let ps: Vec<f64> = pvals.iter().map(|x| x.1).collect();
    let level = match method {
        Mtp::Bh => q,
        Mtp::By => q / harmonic(ps.len()),
    };
    let rej = step_up(&ps, level);
    let mut est = GraphEstimate::empty(p);
    for (k, &r) in rej.iter().enumerate() {
        if r {
            let (i, j) = pvals[k].0;
            est.edges.insert((i, j));
            est.neighborhoods[i].push(j);
            est.neighborhoods[j].push(i);
        }
    }
    est
}

pub fn baseline_bh_by(data: &DMatrix<f64>, q: f64, method: Mtp) -> Result<GraphEstimate> {
    let pv = partial_correlation_pvalues(data)?;
    Ok(mtp_edges(&pv, data.ncols(), q, method))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_pattern_values() {
        // read the unshifted pattern off a p = 21 band graph via the permutation
        let spec = PrecisionSpec::new(GraphKind::Band, 21, -0.6, 3);
        let (omega, truth) = generate_precision(&spec).unwrap();
        let diag = omega[(0, 0)];
        assert!((0..21).all(|i| (omega[(i, i)] - diag).abs() < 1e-12));
        let mut offs: Vec<f64> = Vec::new();
        for i in 0..21 {
            for j in i + 1..21 {
                if omega[(i, j)] != 0.0 {
                    offs.push(omega[(i, j)]);
                }
            }
        }
        assert!(offs.iter().any(|v| (v + 0.6).abs() < 1e-12));
        assert!(offs.iter().all(|&v| v < 0.0 && v >= -0.6f64.powf(0.1) - 1e-12));
        // 10 off-diagonals of lengths 20..11
        assert_eq!(truth.edges.len(), (11..=20).sum::<usize>());
    }

    #[test]
    fn band_formula_before_permutation() {
        let b: f64 = -0.6;
        let v = |d: usize| if d <= 10 { b.signum() * b.abs().powf(d as f64 / 10.0) } else { 0.0 };
        assert!((v(10).abs() - 0.6).abs() < 1e-15);
        assert_eq!(v(11), 0.0);
    }

    #[test]
    fn shift_gives_min_eigenvalue_half() {
        for (k, kind) in [GraphKind::Band, GraphKind::Block, GraphKind::ErdosRenyi, GraphKind::Cluster].into_iter().enumerate() {
            let (omega, _) = generate_precision(&PrecisionSpec::new(kind, 40, -0.6, k as u64)).unwrap();
            assert!(min_eigenvalue(&omega) >= 0.5 - 1e-8);
            assert!((omega.clone() - omega.transpose()).amax() == 0.0);
        }
    }

    #[test]
    fn two_block_cliques() {
        let spec = PrecisionSpec { blocks: Some(2), ..PrecisionSpec::new(GraphKind::Block, 40, -0.6, 5) };
        let (_, truth) = generate_precision(&spec).unwrap();
        assert_eq!(truth.edges.len(), 2 * 190);
        // connected components are two sets of 20
        let mut comp: Vec<usize> = (0..40).collect();
        fn find(c: &mut Vec<usize>, x: usize) -> usize {
            if c[x] != x {
                let r = find(c, c[x]);
                c[x] = r;
            }
            c[x]
        }
        for &(i, j) in &truth.edges {
            let (a, b) = (find(&mut comp, i), find(&mut comp, j));
            comp[a] = b;
        }
        let roots: BTreeSet<usize> = (0..40).map(|i| find(&mut comp, i)).collect();
        assert_eq!(roots.len(), 2);
    }

    #[test]
    fn block_divisibility() {
        assert!(matches!(
            generate_precision(&PrecisionSpec::new(GraphKind::Block, 25, -0.6, 1)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn sample_covariance_converges() {
        let (omega, _) = generate_precision(&PrecisionSpec::new(GraphKind::ErdosRenyi, 5, 0.0, 8)).unwrap();
        let x = sample_gaussian(&omega, 100_000, &mut rng_from(1)).unwrap();
        let s = x.tr_mul(&x) / 100_000.0;
        let sigma = omega.try_inverse().unwrap();
        assert!((s - sigma).amax() < 0.05);
    }

    #[test]
    fn sampling_deterministic_and_empty() {
        let (omega, _) = generate_precision(&PrecisionSpec::new(GraphKind::Band, 6, -0.3, 2)).unwrap();
        let a = sample_gaussian(&omega, 10, &mut rng_from(5)).unwrap();
        let b = sample_gaussian(&omega, 10, &mut rng_from(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(sample_gaussian(&omega, 0, &mut rng_from(5)).unwrap().shape(), (0, 6));
    }

    fn est(edges: &[(usize, usize)]) -> GraphEstimate {
        GraphEstimate { edges: edges.iter().copied().collect(), neighborhoods: vec![] }
    }

    #[test]
    fn fdp_tpp_examples() {
        let truth = TrueGraph { p: 3, edges: [(0, 1)].into_iter().collect() };
        assert_eq!(fdp_tpp(&est(&[]), &truth), (0.0, 0.0));
        assert_eq!(fdp_tpp(&est(&[(0, 1), (0, 2)]), &truth), (0.5, 1.0));
        assert_eq!(fdp_tpp(&est(&[(0, 1)]), &truth), (0.0, 1.0));
    }

    #[test]
    fn step_up_examples() {
        assert!(step_up(&[1.0; 5], 0.2).iter().all(|r| !r));
        // p_(3) = 0.03 ≤ 3·0.05/4 rescues p_(2) = 0.03 as well
        assert_eq!(step_up(&[0.01, 0.03, 0.03, 0.9], 0.05), vec![true, true, true, false]);
    }

    #[test]
    fn by_subset_of_bh() {
        let mut r = rng_from(4);
        for _ in 0..100 {
            let pv: Vec<((usize, usize), f64)> = (0..15).map(|k| ((0, k + 1), r.random::<f64>().powi(3))).collect();
            let bh = mtp_edges(&pv, 16, 0.2, Mtp::Bh);
            let by = mtp_edges(&pv, 16, 0.2, Mtp::By);
            assert!(by.edges.is_subset(&bh.edges));
        }
    }

    #[test]
    fn harmonic_numbers() {
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn partial_correlation_matches_precision() {
        let (omega, _) = generate_precision(&PrecisionSpec::new(GraphKind::Band, 4, -0.6, 9)).unwrap();
        let x = sample_gaussian(&omega, 200_000, &mut rng_from(2)).unwrap();
        let pv = partial_correlation_pvalues(&x).unwrap();
        for ((i, j), p) in pv {
            let rho = -omega[(i, j)] / (omega[(i, i)] * omega[(j, j)]).sqrt();
            if rho.abs() > 0.05 {
                assert!(p < 1e-6);
            }
        }
    }
}
