//! Linear dependent tailfree process (LDTFP) frailty laws.
//!
//! The real line is split into `2^j` sets at level `j` by the dyadic quantiles
//! of the centering law `N(0, θ)`. A set at level `j < J` sends mass to its
//! left child with probability `h((1, x')β)`; the whole-line root always splits
//! 1/2 : 1/2, which makes every `G_x` median-zero. Inside a finest set the
//! density keeps the shape of the centering law:
//!
//! ```text
//! g(e | x) = 2^J · Π_{j=1..J} π_j(e, x) · φ_θ(e)
//! ```
//!
//! where `π_j` is the probability of the level-`j` set containing `e` given its
//! parent.
//!
//! Nodes are identified by the level of the sets they generate: the root
//! generates level 1 and is fixed, the level-`(j-1)` set `s` generates level
//! `j` and carries the coefficient vector `β_{j,s}` with prior variance
//! `2n / (c ρ(j))` per component, for `j = 2..J`.

use crate::error::{Error, Result};
use crate::numeric::{
    gamma_ln_pdf, ln_sigmoid, normal_ln_pdf, sigmoid, std_normal_cdf, std_normal_quantile,
    std_normal_sf, LN_SQRT_2PI,
};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Which member of the LDTFP family a frailty law belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrailtyLawKind {
    /// Split probabilities depend on an intercept and the cluster covariates.
    Ldtfp,
    /// Intercept-only splits: one tailfree law shared by all clusters.
    ExchangeableTailfree,
    /// All splits 1/2: the law is exactly `N(0, θ)`.
    Gaussian,
}

impl FrailtyLawKind {
    /// Length of each node's coefficient vector for `q` cluster covariates.
    pub fn coefficient_dim(self, q: usize) -> usize {
        match self {
            FrailtyLawKind::Ldtfp => q + 1,
            FrailtyLawKind::ExchangeableTailfree => 1,
            FrailtyLawKind::Gaussian => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrailtyLawKind::Ldtfp => "ldtfp",
            FrailtyLawKind::ExchangeableTailfree => "exchangeable_tailfree",
            FrailtyLawKind::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for FrailtyLawKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ldtfp" => Ok(FrailtyLawKind::Ldtfp),
            "exchangeable" | "exchangeable_tailfree" | "tailfree" => {
                Ok(FrailtyLawKind::ExchangeableTailfree)
            }
            "gaussian" | "normal" => Ok(FrailtyLawKind::Gaussian),
            other => Err(Error::invalid(format!(
                "unknown frailty law `{other}` (expected ldtfp, exchangeable or gaussian)"
            ))),
        }
    }
}

/// Dyadic normal-quantile partitions of depth `J` and scale `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub depth: usize,
    pub theta: f64,
}

impl PartitionTree {
    pub fn new(depth: usize, theta: f64) -> Result<Self> {
        if depth == 0 || depth > 20 {
            return Err(Error::invalid(format!("tree depth must be in 1..=20, got {depth}")));
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::invalid(format!("θ must be positive, got {theta}")));
        }
        Ok(PartitionTree { depth, theta })
    }

    pub fn sd(&self) -> f64 {
        self.theta.sqrt()
    }

    pub fn n_finest(&self) -> usize {
        1 << self.depth
    }

    /// The `2^j - 1` interior boundaries at level `j`.
    pub fn boundaries(&self, level: usize) -> Vec<f64> {
        let m = 1usize << level;
        let sd = self.sd();
        (1..m)
            .map(|i| sd * std_normal_quantile(i as f64 / m as f64))
            .collect()
    }

    /// Bounds `(lo, hi]` of set `index` at `level`.
    pub fn set_bounds(&self, level: usize, index: usize) -> (f64, f64) {
        let m = (1usize << level) as f64;
        let sd = self.sd();
        (
            sd * std_normal_quantile(index as f64 / m),
            sd * std_normal_quantile((index + 1) as f64 / m),
        )
    }

    /// Finest-level set containing `e`, with the fraction of that set's
    /// centering mass lying at or below `e`.
    pub fn locate(&self, e: f64) -> (usize, f64) {
        let m = self.n_finest();
        let scale = m as f64;
        let z = e / self.sd();
        // work on the upper tail for positive e to keep precision
        let (index, within) = if z <= 0.0 {
            let u = std_normal_cdf(z) * scale;
            let idx = (u.ceil() as usize).clamp(1, m) - 1;
            (idx, u - idx as f64)
        } else {
            let v = std_normal_sf(z) * scale;
            let from_top = (v.floor() as usize).min(m - 1);
            let idx = m - 1 - from_top;
            (idx, 1.0 - (v - from_top as f64))
        };
        (index, within.clamp(0.0, 1.0))
    }

    pub fn finest_index(&self, e: f64) -> usize {
        self.locate(e).0
    }
}

/// A realized covariate-indexed frailty law `{G_x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailfreeForest {
    pub kind: FrailtyLawKind,
    pub tree: PartitionTree,
    /// Number of cluster covariates q.
    pub q: usize,
    /// Node coefficients, node-major: `coeffs[node * dim .. (node + 1) * dim]`.
    pub coeffs: Vec<f64>,
    /// Precision c.
    pub precision: f64,
    /// Exponent of the level weight `ρ(j) = j^rho_power`.
    pub rho_power: f64,
    /// Cluster count n in the prior variance `2n / (c ρ(j))`.
    pub n_scale: f64,
}

impl TailfreeForest {
    /// A forest with all node coefficients at zero.
    pub fn centered(
        kind: FrailtyLawKind,
        tree: PartitionTree,
        q: usize,
        precision: f64,
        rho_power: f64,
        n_scale: f64,
    ) -> Self {
        let n_coeffs = n_nodes(tree.depth) * kind.coefficient_dim(q);
        TailfreeForest {
            kind,
            tree,
            q,
            coeffs: vec![0.0; n_coeffs],
            precision,
            rho_power,
            n_scale,
        }
    }

    pub fn depth(&self) -> usize {
        self.tree.depth
    }

    pub fn theta(&self) -> f64 {
        self.tree.theta
    }

    pub fn dim(&self) -> usize {
        self.kind.coefficient_dim(self.q)
    }

    pub fn n_nodes(&self) -> usize {
        n_nodes(self.depth())
    }

    pub fn node(&self, node: usize) -> &[f64] {
        let d = self.dim();
        &self.coeffs[node * d..(node + 1) * d]
    }

    pub fn node_mut(&mut self, node: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.coeffs[node * d..(node + 1) * d]
    }

    pub fn rho(&self, level: usize) -> f64 {
        (level as f64).powf(self.rho_power)
    }

    /// Prior variance of each coefficient of a node generating `level`.
    pub fn prior_variance(&self, level: usize) -> f64 {
        2.0 * self.n_scale / (self.precision * self.rho(level))
    }

    /// Linear predictor `(1, x')β` of a node.
    pub fn node_predictor(&self, node: usize, x: &[f64]) -> f64 {
        let beta = self.node(node);
        match beta.split_first() {
            None => 0.0,
            Some((intercept, slopes)) => {
                intercept + slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
            }
        }
    }

    /// Probability of moving to the left child at a node.
    pub fn left_probability(&self, node: usize, x: &[f64]) -> f64 {
        if self.dim() == 0 {
            0.5
        } else {
            sigmoid(self.node_predictor(node, x))
        }
    }

    /// `ln(2^J Π_j π_j)` for the finest set `index`.
    pub fn log_path_weight(&self, index: usize, x: &[f64]) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let depth = self.depth();
        let mut total = 0.0;
        for level in 2..=depth {
            let parent = index >> (depth - level + 1);
            let right = (index >> (depth - level)) & 1 == 1;
            let d = self.node_predictor(node_index(level, parent), x);
            total += if right { ln_sigmoid(-d) } else { ln_sigmoid(d) } + LN_2;
        }
        total
    }

    /// Probabilities of all finest sets under `G_x`; they sum to one.
    pub fn finest_masses(&self, x: &[f64]) -> Vec<f64> {
        let mut masses = vec![0.5, 0.5];
        for level in 2..=self.depth() {
            let mut next = Vec::with_capacity(masses.len() * 2);
            for (parent, m) in masses.iter().enumerate() {
                let left = self.left_probability(node_index(level, parent), x);
                next.push(m * left);
                next.push(m * (1.0 - left));
            }
            masses = next;
        }
        masses
    }

    pub fn ln_density(&self, e: f64, x: &[f64]) -> f64 {
        let index = self.tree.finest_index(e);
        self.log_path_weight(index, x) + normal_ln_pdf(e, 0.0, self.theta())
    }

    pub fn density(&self, e: f64, x: &[f64]) -> f64 {
        self.ln_density(e, x).exp()
    }

    /// Exact CDF of `G_x`.
    ///
    /// Accumulates the mass between the median and `e`, so `G_x(0) = 1/2`
    /// holds without rounding.
    pub fn cdf(&self, e: f64, x: &[f64]) -> f64 {
        let depth = self.depth();
        let (index, within) = self.tree.locate(e);
        let right_half = index >> (depth - 1) == 1;
        let mut mass = 0.5;
        let mut near = 0.0;
        for level in 2..=depth {
            let parent = index >> (depth - level + 1);
            let right = (index >> (depth - level)) & 1 == 1;
            let left_p = self.left_probability(node_index(level, parent), x);
            if right {
                if right_half {
                    near += mass * left_p;
                }
                mass *= 1.0 - left_p;
            } else {
                if !right_half {
                    near += mass * (1.0 - left_p);
                }
                mass *= left_p;
            }
        }
        if right_half {
            (0.5 + near + mass * within).min(1.0)
        } else {
            (0.5 - near - mass * (1.0 - within)).max(0.0)
        }
    }

    /// Draws one frailty from `G_x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let depth = self.depth();
        let mut index = usize::from(rng.random::<f64>() >= 0.5);
        for level in 2..=depth {
            let left = self.left_probability(node_index(level, index), x);
            index = 2 * index + usize::from(rng.random::<f64>() >= left);
        }
        let m = self.tree.n_finest() as f64;
        let u: f64 = rng.random();
        let p = ((index as f64 + u) / m).clamp(1e-300, 1.0 - 1e-16);
        self.tree.sd() * std_normal_quantile(p)
    }

    /// Level generated by a node and its set index at the parent level.
    pub fn node_location(node: usize) -> (usize, usize) {
        node_location(node)
    }

    /// Root-to-node path such as `"LRL"` of the set a node splits.
    pub fn node_path(node: usize) -> String {
        let (level, set) = node_location(node);
        let parent_level = level - 1;
        (0..parent_level)
            .rev()
            .map(|b| if (set >> b) & 1 == 1 { 'R' } else { 'L' })
            .collect()
    }
}

/// Number of coefficient-carrying nodes in a depth-`J` tree: `2^J - 2`.
pub fn n_nodes(depth: usize) -> usize {
    (1usize << depth) - 2
}

/// Flat index of the node generating `level` from parent set `parent`.
pub fn node_index(level: usize, parent: usize) -> usize {
    debug_assert!(level >= 2);
    (1usize << (level - 1)) - 2 + parent
}

pub fn node_location(node: usize) -> (usize, usize) {
    let mut level = 2;
    let mut start = 0;
    loop {
        let width = 1usize << (level - 1);
        if node < start + width {
            return (level, node - start);
        }
        start += width;
        level += 1;
    }
}

/// Priors of the scale `θ` and precision `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawHyper {
    /// Shape of the Gamma prior on `θ⁻²`.
    pub tau1: f64,
    /// Rate of the Gamma prior on `θ⁻²`.
    pub tau2: f64,
    pub precision_prior: PrecisionPrior,
}

impl Default for LawHyper {
    fn default() -> Self {
        LawHyper {
            tau1: 1.001,
            tau2: 1.001,
            precision_prior: PrecisionPrior::Gamma { shape: 1.0, rate: 1.0 },
        }
    }
}

impl LawHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau2 > 0.0) {
            return Err(Error::invalid("τ₁ and τ₂ must be positive"));
        }
        match self.precision_prior {
            PrecisionPrior::Gamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => {
                Err(Error::invalid("a_c and b_c must be positive"))
            }
            PrecisionPrior::Fixed(c) if !(c > 0.0) => {
                Err(Error::invalid("fixed precision must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// `ln p(θ)` induced by the Gamma prior on `θ⁻²`.
    pub fn ln_theta_prior(&self, theta: f64) -> f64 {
        let u = theta.powi(-2);
        gamma_ln_pdf(u, self.tau1, self.tau2) + LN_2 - 3.0 * theta.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionPrior {
    Gamma { shape: f64, rate: f64 },
    /// Point mass; `f64::INFINITY` forces every coefficient to zero.
    Fixed(f64),
}

/// Structural settings of a prior draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestSpec {
    pub kind: FrailtyLawKind,
    pub depth: usize,
    pub hyper: LawHyper,
    pub rho_power: f64,
}

/// Draws `θ`, `c` and every node coefficient from the prior.
pub fn sample_prior<R: Rng + ?Sized>(
    spec: &ForestSpec,
    n_clusters: usize,
    q: usize,
    rng: &mut R,
) -> Result<TailfreeForest> {
    spec.hyper.validate()?;
    let inv_theta2 = Gamma::new(spec.hyper.tau1, 1.0 / spec.hyper.tau2)
        .map_err(|e| Error::invalid(e.to_string()))?
        .sample(rng);
    let theta = inv_theta2.powf(-0.5);
    let precision = match spec.hyper.precision_prior {
        PrecisionPrior::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(rng),
        PrecisionPrior::Fixed(c) => c,
    };
    let tree = PartitionTree::new(spec.depth, theta)?;
    let mut forest = TailfreeForest::centered(
        spec.kind,
        tree,
        q,
        precision,
        spec.rho_power,
        n_clusters as f64,
    );
    for node in 0..forest.n_nodes() {
        let (level, _) = node_location(node);
        let sd = forest.prior_variance(level).sqrt();
        for b in forest.node_mut(node) {
            let z: f64 = StandardNormal.sample(rng);
            *b = if sd.is_finite() && sd > 0.0 { sd * z } else { 0.0 };
        }
    }
    Ok(forest)
}

/// Log prior density of the node coefficients alone.
pub fn ln_coefficient_prior(forest: &TailfreeForest) -> f64 {
    (0..forest.n_nodes())
        .map(|node| {
            let var = forest.prior_variance(node_location(node).0);
            forest
                .node(node)
                .iter()
                .map(|b| -0.5 * b * b / var - 0.5 * var.ln() - LN_SQRT_2PI)
                .sum::<f64>()
        })
        .sum()
}

/// Joint log prior of the coefficients, `θ⁻²` and `c`.
///
/// The densities of `θ⁻²` and `c` are on their own scales; a fixed precision
/// contributes nothing.
pub fn log_prior_density(forest: &TailfreeForest, hyper: &LawHyper) -> f64 {
    let theta_part = gamma_ln_pdf(forest.theta().powi(-2), hyper.tau1, hyper.tau2);
    let c_part = match hyper.precision_prior {
        PrecisionPrior::Gamma { shape, rate } => gamma_ln_pdf(forest.precision, shape, rate),
        PrecisionPrior::Fixed(_) => 0.0,
    };
    ln_coefficient_prior(forest) + theta_part + c_part
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::std_normal_pdf;
    use rand::SeedableRng;

    fn random_forest(depth: usize, q: usize, seed: u64) -> TailfreeForest {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tree = PartitionTree::new(depth, 0.5 + rng.random::<f64>() * 3.0).unwrap();
        let mut f = TailfreeForest::centered(FrailtyLawKind::Ldtfp, tree, q, 1.0, 2.0, 10.0);
        for b in &mut f.coeffs {
            *b = 2.0 * rng.random::<f64>() - 1.0;
        }
        f
    }

    #[test]
    fn partition_boundaries() {
        let t = PartitionTree::new(1, 1.0).unwrap();
        assert_eq!(t.boundaries(1), vec![0.0]);
        let t = PartitionTree::new(2, 1.0).unwrap();
        let b = t.boundaries(2);
        assert!((b[0] + 0.674_489_750_196_081_7).abs() < 1e-12);
        assert_eq!(b[1], 0.0);
        let t = PartitionTree::new(2, 4.0).unwrap();
        let b = t.boundaries(2);
        assert!((b[2] - 1.348_979_500_392_163_4).abs() < 1e-12);
        assert!(PartitionTree::new(0, 1.0).is_err());
    }

    #[test]
    fn locate_respects_left_closed_sets() {
        let t = PartitionTree::new(3, 2.0).unwrap();
        assert_eq!(t.finest_index(0.0), 3);
        assert_eq!(t.finest_index(1e-9), 4);
        assert_eq!(t.finest_index(-50.0), 0);
        assert_eq!(t.finest_index(50.0), 7);
        for (i, b) in t.boundaries(3).iter().enumerate() {
            assert_eq!(t.finest_index(b - 1e-9), i);
            assert_eq!(t.finest_index(b + 1e-9), i + 1);
        }
    }

    #[test]
    fn node_numbering_round_trips() {
        for node in 0..n_nodes(5) {
            let (level, parent) = node_location(node);
            assert_eq!(node_index(level, parent), node);
        }
        assert_eq!(TailfreeForest::node_path(0), "L");
        assert_eq!(TailfreeForest::node_path(1), "R");
        assert_eq!(TailfreeForest::node_path(node_index(4, 0b101)), "RLR");
    }

    #[test]
    fn zero_coefficients_recover_centering_law() {
        let mut f = random_forest(4, 2, 1);
        f.coeffs.iter_mut().for_each(|b| *b = 0.0);
        let sd = f.theta().sqrt();
        for i in -40..=40 {
            let e = i as f64 * 0.2;
            let want = std_normal_pdf(e / sd) / sd;
            assert!((f.density(e, &[0.3, -1.0]) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_one_is_always_centering_law() {
        let tree = PartitionTree::new(1, 1.0).unwrap();
        let f = TailfreeForest::centered(FrailtyLawKind::Ldtfp, tree, 1, 1.0, 2.0, 5.0);
        assert_eq!(f.n_nodes(), 0);
        assert!((f.density(0.7, &[3.0]) - std_normal_pdf(0.7)).abs() < 1e-15);
    }

    #[test]
    fn median_zero_and_tails() {
        for seed in 0..20 {
            let f = random_forest(4, 2, seed);
            let x = [0.4, -1.3];
            assert_eq!(f.cdf(0.0, &x), 0.5);
            assert!((f.cdf(1e6, &x) - 1.0).abs() < 1e-15);
            assert!(f.cdf(-1e6, &x).abs() < 1e-15);
        }
    }

    #[test]
    fn finest_masses_sum_to_one() {
        let f = random_forest(4, 1, 3);
        let total: f64 = f.finest_masses(&[0.7]).iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        let left: f64 = f.finest_masses(&[0.7])[..8].iter().sum();
        assert!((left - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cdf_is_consistent_with_masses() {
        let f = random_forest(3, 1, 9);
        let x = [1.2];
        let masses = f.finest_masses(&x);
        let bounds = f.tree.boundaries(3);
        let mut acc = 0.0;
        for (i, b) in bounds.iter().enumerate() {
            acc += masses[i];
            let got = f.cdf(*b, &x);
            assert!((got - acc).abs() < 1e-14, "i={i} got={got} want={acc}");
        }
    }

    #[test]
    fn exchangeable_law_ignores_covariates() {
        let tree = PartitionTree::new(3, 1.5).unwrap();
        let mut f = TailfreeForest::centered(FrailtyLawKind::ExchangeableTailfree, tree, 2, 1.0, 2.0, 5.0);
        for (i, b) in f.coeffs.iter_mut().enumerate() {
            *b = (i as f64 * 0.37).sin();
        }
        for e in [-2.0, -0.3, 0.5, 1.9] {
            assert_eq!(f.density(e, &[0.0, 0.0]), f.density(e, &[5.0, -3.0]));
        }
    }

    #[test]
    fn prior_sampling_is_deterministic_and_degenerate_precision_zeroes_coefficients() {
        let spec = ForestSpec {
            kind: FrailtyLawKind::Ldtfp,
            depth: 4,
            hyper: LawHyper::default(),
            rho_power: 2.0,
        };
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let fa = sample_prior(&spec, 10, 2, &mut a).unwrap();
        let fb = sample_prior(&spec, 10, 2, &mut b).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(fa.coeffs.len(), 14 * 3);

        let spec = ForestSpec {
            hyper: LawHyper {
                precision_prior: PrecisionPrior::Fixed(f64::INFINITY),
                ..LawHyper::default()
            },
            ..spec
        };
        let f = sample_prior(&spec, 10, 2, &mut a).unwrap();
        assert!(f.coeffs.iter().all(|b| *b == 0.0));
        let sd = f.theta().sqrt();
        assert!((f.density(0.3, &[1.0, 1.0]) - std_normal_pdf(0.3 / sd) / sd).abs() < 1e-14);

        let bad = ForestSpec {
            hyper: LawHyper {
                tau1: 0.0,
                ..LawHyper::default()
            },
            ..spec
        };
        assert!(sample_prior(&bad, 10, 2, &mut a).is_err());
    }

    #[test]
    fn coefficient_prior_closed_form() {
        // J = 2: two nodes generate level 2, variance 2·10/(1·4) = 5
        let tree = PartitionTree::new(2, 1.0).unwrap();
        let f = TailfreeForest::centered(FrailtyLawKind::Ldtfp, tree, 0, 1.0, 2.0, 10.0);
        let want = 2.0 * (-0.5 * (2.0 * std::f64::consts::PI * 5.0).ln());
        assert!((ln_coefficient_prior(&f) - want).abs() < 1e-13);

        let mut g = f.clone();
        g.coeffs[0] = 0.5;
        let mut h = f.clone();
        h.coeffs[0] = 1.5;
        assert!(ln_coefficient_prior(&f) > ln_coefficient_prior(&g));
        assert!(ln_coefficient_prior(&g) > ln_coefficient_prior(&h));
    }

    #[test]
    fn sampled_frailties_follow_cdf() {
        let f = random_forest(3, 1, 11);
        let x = [-0.4];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 40_000;
        let draws: Vec<f64> = (0..n).map(|_| f.sample(&x, &mut rng)).collect();
        for e in [-1.5, -0.5, 0.0, 0.8, 2.0] {
            let emp = draws.iter().filter(|d| **d <= e).count() as f64 / n as f64;
            let p = f.cdf(e, &x);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((emp - p).abs() < 4.0 * se + 1e-9, "e={e} emp={emp} p={p}");
        }
    }
}
