//! Stochastic moment matrices over an index set.
//!
//! For a monomial multi-index `mu`, the Galerkin matrix
//! `G^mu[a,b] = int y^mu Phi_a Phi_b rho dy` is sparse: the entry is nonzero
//! exactly when `a - b` matches one of the signed offsets in the weight set
//! `W(mu)` derived from the band and parity structure of the univariate
//! matrices `K^{mu_m}`. The pipeline is
//!
//! 1. neighbour matrices `N^w` for every offset `w` (fast tree-walk path),
//! 2. summed matrices `S^mu = sum_{w in W(mu)} N^w`,
//! 3. univariate matrices `K^k`,
//! 4. `G^mu` evaluated only on the support of `S^mu`.
//!
//! Offsets are kept sign-normalized (first nonzero exponent positive):
//! `N^w = N^{-w}`, so only one representative of each `+/-` pair is built,
//! which is also how the matrix-addition counts of the summed step are
//! reported.

use std::collections::BTreeSet;
use std::io::Write;

use crate::multiindex::{subtract, IndexSet, MultiIndex, SignedMultiIndex};
use crate::orthopoly::{build_k_matrix, eval_poly, Family, KMatrix};
use crate::quad::gauss_rule;
use crate::{par, Error, Result};

/// The signed offsets `W(mu)` whose neighbour matrices cover the nonzero
/// pattern of `G^mu`: componentwise products of a sign part (first support
/// position of `mu` fixed positive) and a magnitude part (exponents stepping
/// down from `mu_m` by two), sign-normalized and deduplicated.
#[derive(Clone, Debug)]
pub struct WeightSet {
    pub mu: MultiIndex,
    pub elements: Vec<SignedMultiIndex>,
    pub sign_part_size: u64,
    pub magnitude_part_size: u64,
}

/// Builds `W(mu)`. Every element has `|w_m| <= mu_m` with matching parity in
/// each coordinate, and `|elements| <= sign_part_size * magnitude_part_size`.
pub fn weight_set(mu: &MultiIndex) -> WeightSet {
    let support: Vec<(u32, u32)> = mu.pairs().to_vec();
    let sign_part_size = if support.is_empty() {
        1
    } else {
        1u64 << (support.len() - 1)
    };
    let magnitude_part_size = support
        .iter()
        .map(|&(_, e)| (e / 2 + 1) as u64)
        .product::<u64>();

    let mut elements = BTreeSet::new();
    // Magnitude choices per support position: mu_m, mu_m - 2, ..., down to
    // parity; sign choices on every support position after the first.
    let mut magnitudes = vec![0u32; support.len()];
    enumerate_magnitudes(&support, 0, &mut magnitudes, &mut |mags| {
        let nsigns = support.len().saturating_sub(1);
        for bits in 0u64..(1u64 << nsigns) {
            let mut pairs = Vec::with_capacity(support.len());
            for (i, (&(pos, _), &mag)) in support.iter().zip(mags.iter()).enumerate() {
                if mag == 0 {
                    continue;
                }
                let sign = if i > 0 && (bits >> (i - 1)) & 1 == 1 { -1 } else { 1 };
                pairs.push((pos, sign * mag as i64));
            }
            let w = SignedMultiIndex::from_pairs(pairs).expect("sorted pairs");
            elements.insert(w.sign_normalized());
        }
    });

    WeightSet {
        mu: mu.clone(),
        elements: elements.into_iter().collect(),
        sign_part_size,
        magnitude_part_size,
    }
}

fn enumerate_magnitudes(
    support: &[(u32, u32)],
    i: usize,
    mags: &mut Vec<u32>,
    emit: &mut impl FnMut(&[u32]),
) {
    if i == support.len() {
        emit(mags);
        return;
    }
    let e = support[i].1;
    let mut m = e % 2;
    loop {
        mags[i] = m;
        enumerate_magnitudes(support, i + 1, mags, emit);
        if m + 2 > e {
            break;
        }
        m += 2;
    }
}

/// Union of the weight sets of a coefficient index list, including the zero
/// offset, in canonical order.
pub fn weight_union(xi: &[MultiIndex]) -> Vec<SignedMultiIndex> {
    let mut all = BTreeSet::new();
    all.insert(SignedMultiIndex::zero());
    for mu in xi {
        for w in weight_set(mu).elements {
            all.insert(w);
        }
    }
    all.into_iter().collect()
}

/// Symmetric boolean pattern over set ordinals: entry `(a,b)` is set when
/// `alpha_a +/- w = alpha_b` for members of the index set. Stored as sorted
/// upper-triangle pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighbourMatrix {
    pub w: SignedMultiIndex,
    pub dim: u32,
    pairs: Vec<(u32, u32)>,
}

impl NeighbourMatrix {
    /// Upper-triangle pairs `(a, b)` with `a <= b`, sorted.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// Stored entry count (upper triangle).
    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }
}

/// Work counters of the fast construction path.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeighbourStats {
    /// Tree steps taken by all locate calls.
    pub locate_steps: u64,
    /// Membership tests performed (one per (w, eta) pair not skipped early).
    pub membership_tests: u64,
}

/// Builds all neighbour matrices for `weights` over `set` by the fast path:
/// for each member `eta`, the candidate `eta - w` is screened with the
/// stored-weight membership test and then located by a parenthood-tree walk,
/// `O(|weights| * |set| * max_total_degree)` in total. Parallel over offsets.
pub fn neighbour_matrices(
    set: &IndexSet,
    weights: &[SignedMultiIndex],
) -> (Vec<NeighbourMatrix>, NeighbourStats) {
    let results = par::map_collect(weights, |w| neighbour_matrix(set, w));
    let mut stats = NeighbourStats::default();
    let mut mats = Vec::with_capacity(results.len());
    for (mat, st) in results {
        stats.locate_steps += st.locate_steps;
        stats.membership_tests += st.membership_tests;
        mats.push(mat);
    }
    (mats, stats)
}

/// Sequential variant of [`neighbour_matrices`]; same output bit for bit.
pub fn neighbour_matrices_seq(
    set: &IndexSet,
    weights: &[SignedMultiIndex],
) -> (Vec<NeighbourMatrix>, NeighbourStats) {
    let mut stats = NeighbourStats::default();
    let mut mats = Vec::with_capacity(weights.len());
    for w in weights {
        let (mat, st) = neighbour_matrix(set, w);
        stats.locate_steps += st.locate_steps;
        stats.membership_tests += st.membership_tests;
        mats.push(mat);
    }
    (mats, stats)
}

fn neighbour_matrix(set: &IndexSet, w: &SignedMultiIndex) -> (NeighbourMatrix, NeighbourStats) {
    let dim = set.len() as u32;
    let mut stats = NeighbourStats::default();
    if w.is_zero() {
        // alpha +/- 0 = alpha: the identity pattern, no locate needed.
        let pairs = (0..dim).map(|i| (i, i)).collect();
        return (
            NeighbourMatrix { w: w.clone(), dim, pairs },
            stats,
        );
    }
    let mut pairs = Vec::new();
    if !set.offset_out_of_range(w) {
        let w_weight = set.offset_weight(w);
        for n in 0..dim {
            stats.membership_tests += 1;
            let eta = set.index(n);
            let gamma = subtract(eta, w);
            let hint = combine_hint(set, set.weight(n), w_weight);
            if !set.contains(&gamma, hint) {
                continue;
            }
            let target = gamma.to_unsigned().expect("no negative exponents");
            let k = set
                .locate_counted(&target, &mut stats.locate_steps)
                .expect("membership test accepted a member");
            pairs.push((n.min(k), n.max(k)));
        }
        pairs.sort_unstable();
        debug_assert!(pairs.windows(2).all(|p| p[0] != p[1]));
    }
    (NeighbourMatrix { w: w.clone(), dim, pairs }, stats)
}

/// Combines the stored element weight and the offset weight into the hint
/// `contains` expects: a ratio for threshold families, a difference for the
/// total-degree family.
fn combine_hint(set: &IndexSet, eta_weight: f64, w_weight: f64) -> f64 {
    match set.spec() {
        crate::IndexSetSpec::Ts { .. } | crate::IndexSetSpec::ATd { .. } => eta_weight / w_weight,
        crate::IndexSetSpec::IsoTd { .. } => eta_weight - w_weight,
        _ => 0.0,
    }
}

/// Reference construction straight from the definition: a double loop over
/// all ordinal pairs, `O(|set|^2)` per offset.
pub fn brute_force_neighbour(set: &IndexSet, w: &SignedMultiIndex) -> NeighbourMatrix {
    let dim = set.len() as u32;
    let neg = w.negate();
    let mut pairs = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            let delta = subtract(set.index(a), &set.index(b).to_signed());
            if delta == *w || delta == neg {
                pairs.push((a, b));
            }
        }
    }
    NeighbourMatrix { w: w.clone(), dim, pairs }
}

/// Integer sum of neighbour patterns for one `mu`; its support is exactly
/// the nonzero pattern of `G^mu`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SummedMatrix {
    pub mu: MultiIndex,
    pub dim: u32,
    /// Sorted upper-triangle entries `(a, b, count)`.
    entries: Vec<(u32, u32, u32)>,
}

impl SummedMatrix {
    pub fn entries(&self) -> &[(u32, u32, u32)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// Sums the neighbour matrices of `ws.elements`, which the caller looks up
/// in `nmats` by value.
pub fn summed_matrix<'a, F>(ws: &WeightSet, mut nmats: F) -> Result<SummedMatrix>
where
    F: FnMut(&SignedMultiIndex) -> Option<&'a NeighbourMatrix>,
{
    let mut all: Vec<(u32, u32)> = Vec::new();
    let mut dim = 0;
    for w in &ws.elements {
        let mat = nmats(w).ok_or_else(|| Error::MissingWeight(format!("{}", w)))?;
        dim = mat.dim;
        all.extend_from_slice(mat.pairs());
    }
    all.sort_unstable();
    let mut entries: Vec<(u32, u32, u32)> = Vec::new();
    for (a, b) in all {
        match entries.last_mut() {
            Some(e) if e.0 == a && e.1 == b => e.2 += 1,
            _ => entries.push((a, b, 1)),
        }
    }
    Ok(SummedMatrix {
        mu: ws.mu.clone(),
        dim,
        entries,
    })
}

/// Sparse symmetric real matrix over set ordinals.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    pub mu: MultiIndex,
    pub dim: u32,
    /// Sorted upper-triangle entries `(a, b, value)`.
    entries: Vec<(u32, u32, f64)>,
}

impl MomentMatrix {
    pub fn identity(mu: MultiIndex, dim: u32) -> Self {
        MomentMatrix {
            mu,
            dim,
            entries: (0..dim).map(|i| (i, i, 1.0)).collect(),
        }
    }

    /// Builds from explicit upper-triangle entries (sorted internally).
    pub fn from_upper_triangle(mu: MultiIndex, dim: u32, mut entries: Vec<(u32, u32, f64)>) -> Self {
        debug_assert!(entries.iter().all(|&(a, b, _)| a <= b && b < dim));
        entries.sort_unstable_by_key(|&(a, b, _)| (a, b));
        MomentMatrix { mu, dim, entries }
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim as usize;
        let mut dense = vec![vec![0.0; n]; n];
        for &(a, b, v) in &self.entries {
            dense[a as usize][b as usize] = v;
            dense[b as usize][a as usize] = v;
        }
        dense
    }

    /// Full-pattern compressed rows (both triangles), for matrix products.
    pub fn to_full_csr(&self) -> FullCsr {
        let n = self.dim as usize;
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(a, b, v) in &self.entries {
            adj[a as usize].push((b, v));
            if a != b {
                adj[b as usize].push((a, v));
            }
        }
        for row in adj.iter_mut() {
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        FullCsr { rows: adj }
    }
}

/// Row-indexed adjacency of a symmetric sparse matrix with both triangles.
#[derive(Clone, Debug)]
pub struct FullCsr {
    pub rows: Vec<Vec<(u32, f64)>>,
}

fn product_over_support(
    mu: &MultiIndex,
    alpha: &MultiIndex,
    beta: &MultiIndex,
    kmats: &[KMatrix],
) -> Result<f64> {
    let mut value = 1.0;
    for &(m, e) in mu.pairs() {
        let km = kmats.get(e as usize).ok_or_else(|| {
            Error::MissingWeight(format!("univariate matrix for exponent {}", e))
        })?;
        let l = alpha.get(m) as usize;
        let c = beta.get(m) as usize;
        if l >= km.dim() || c >= km.dim() {
            return Err(Error::Dimension(format!(
                "K^{} has dimension {} but degree {} appears in the set",
                e,
                km.dim(),
                l.max(c)
            )));
        }
        value *= km.entry(l, c);
    }
    Ok(value)
}

/// Evaluates `G^mu` on the support of its summed matrix: each entry is the
/// product of univariate entries `K^{mu_m}[alpha_m, beta_m]` over the support
/// of `mu`. Entries are kept regardless of magnitude; the sparsity pattern is
/// exactly the support of `smat`. Parallel over entries.
pub fn moment_matrix(
    mu: &MultiIndex,
    set: &IndexSet,
    smat: &SummedMatrix,
    kmats: &[KMatrix],
) -> Result<MomentMatrix> {
    if mu.is_zero() {
        return Ok(MomentMatrix::identity(mu.clone(), set.len() as u32));
    }
    let values: Vec<Result<f64>> = par::map_collect(smat.entries(), |&(a, b, _)| {
        product_over_support(mu, set.index(a), set.index(b), kmats)
    });
    let mut entries = Vec::with_capacity(values.len());
    for (&(a, b, _), value) in smat.entries().iter().zip(values) {
        entries.push((a, b, value?));
    }
    Ok(MomentMatrix {
        mu: mu.clone(),
        dim: set.len() as u32,
        entries,
    })
}

/// Direct construction by the selection rules, without neighbour machinery:
/// a double loop over all ordinal pairs keeping entries whose coordinate
/// differences are within the band and parity structure of `mu`. Produces
/// the same matrix as the summed-matrix path.
pub fn moment_matrix_direct(
    mu: &MultiIndex,
    set: &IndexSet,
    kmats: &[KMatrix],
) -> Result<MomentMatrix> {
    if mu.is_zero() {
        return Ok(MomentMatrix::identity(mu.clone(), set.len() as u32));
    }
    let dim = set.len() as u32;
    let rows: Vec<Result<Vec<(u32, u32, f64)>>> = par::map_range(dim as usize, |a| {
        let a = a as u32;
        let mut row = Vec::new();
        for b in a..dim {
            let alpha = set.index(a);
            let beta = set.index(b);
            if !selection_rule(mu, alpha, beta) {
                continue;
            }
            row.push((a, b, product_over_support(mu, alpha, beta, kmats)?));
        }
        Ok(row)
    });
    let mut entries = Vec::new();
    for row in rows {
        entries.extend(row?);
    }
    Ok(MomentMatrix {
        mu: mu.clone(),
        dim,
        entries,
    })
}

/// Nonzero condition for `G^mu[alpha,beta]`: coordinates agree outside the
/// support of `mu`, and inside it differ by at most `mu_m` with the parity
/// of `mu_m`.
fn selection_rule(mu: &MultiIndex, alpha: &MultiIndex, beta: &MultiIndex) -> bool {
    let delta = subtract(alpha, &beta.to_signed());
    for &(m, d) in delta.pairs() {
        let bound = mu.get(m) as i64;
        if d.abs() > bound || (d.abs() - bound) % 2 != 0 {
            return false;
        }
    }
    // Positions where alpha and beta agree need matching parity only when
    // mu is odd there, in which case the difference 0 is forbidden.
    for &(m, e) in mu.pairs() {
        if e % 2 == 1 && delta.get(m) == 0 {
            return false;
        }
    }
    true
}

/// Dense quadrature oracle for `G^mu`: every entry is evaluated as a product
/// of one-dimensional Gauss quadratures, independent of the coefficient
/// formulas used by [`moment_matrix`]. Guarded to small instances.
pub fn quadrature_moment_oracle(
    mu: &MultiIndex,
    set: &IndexSet,
    family: Family,
) -> Result<Vec<Vec<f64>>> {
    let dim = set.len();
    let maxdeg = set.max_exponent().max(mu.max_exponent());
    let active = set
        .indices()
        .iter()
        .map(|a| a.length())
        .max()
        .unwrap_or(0)
        .max(mu.length());
    if dim > 256 || active > 6 {
        return Err(Error::TooLarge(format!(
            "oracle guard: {} elements over {} dimensions",
            dim, active
        )));
    }
    let rule = gauss_rule(family, (3 * maxdeg as usize) / 2 + 3);
    let mut dense = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let alpha = set.indices()[a].clone();
            let beta = set.indices()[b].clone();
            let mut value = 1.0;
            for m in 1..=active {
                let k = mu.get(m);
                let l = alpha.get(m);
                let c = beta.get(m);
                if k == 0 && l == 0 && c == 0 {
                    continue;
                }
                value *= rule.integrate(|y| {
                    y.powi(k as i32) * eval_poly(family, l, y) * eval_poly(family, c, y)
                });
            }
            dense[a][b] = value;
            dense[b][a] = value;
        }
    }
    Ok(dense)
}

/// Everything the four-step pipeline produces for one coefficient list.
pub struct MomentPipeline {
    pub weight_sets: Vec<WeightSet>,
    pub offsets: Vec<SignedMultiIndex>,
    pub neighbours: Vec<NeighbourMatrix>,
    pub summed: Vec<SummedMatrix>,
    pub kmatrices: Vec<KMatrix>,
    pub moments: Vec<MomentMatrix>,
    pub stats: NeighbourStats,
    /// Total matrix additions of the summed step, `sum_mu |W(mu)|`.
    pub weight_count: u64,
}

/// Options for [`build_moment_matrices`].
#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    /// Below this set size the neighbour machinery does not pay off and the
    /// direct double loop is used instead; the output is identical.
    pub dense_threshold: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { dense_threshold: 64 }
    }
}

/// Runs the four-step pipeline for the coefficient indices `xi` over `set`.
pub fn build_moment_matrices(
    set: &IndexSet,
    xi: &[MultiIndex],
    family: Family,
    opts: PipelineOptions,
) -> Result<MomentPipeline> {
    let weight_sets: Vec<WeightSet> = xi.iter().map(weight_set).collect();
    let weight_count: u64 = weight_sets.iter().map(|ws| ws.elements.len() as u64).sum();

    // Conservative work bound for the summed step; holds for every input.
    let max_exp = xi.iter().map(|m| m.max_exponent()).max().unwrap_or(0) as f64;
    let tilde_m = xi.iter().map(|m| m.length()).max().unwrap_or(0);
    let bound = (xi.len() as f64 / 2.0) * (max_exp + 2.0).powi(tilde_m as i32);
    if !xi.is_empty() {
        assert!(
            weight_count as f64 <= bound.max(1.0),
            "weight count {} exceeds the work bound {}",
            weight_count,
            bound
        );
    }

    let kdim = set.max_exponent() as usize + 1;
    let kmax = xi.iter().map(|m| m.max_exponent()).max().unwrap_or(0);
    let kmatrices: Vec<KMatrix> = (0..=kmax)
        .map(|k| build_k_matrix(family, k, kdim))
        .collect::<Result<_>>()?;

    if set.len() < opts.dense_threshold {
        let moments: Vec<MomentMatrix> = xi
            .iter()
            .map(|mu| moment_matrix_direct(mu, set, &kmatrices))
            .collect::<Result<_>>()?;
        return Ok(MomentPipeline {
            weight_sets,
            offsets: Vec::new(),
            neighbours: Vec::new(),
            summed: Vec::new(),
            kmatrices,
            moments,
            stats: NeighbourStats::default(),
            weight_count,
        });
    }

    let offsets = weight_union(xi);
    let (neighbours, stats) = neighbour_matrices(set, &offsets);
    let find = |w: &SignedMultiIndex| -> Option<&NeighbourMatrix> {
        offsets
            .binary_search(w)
            .ok()
            .map(|i| &neighbours[i])
    };
    let summed: Vec<SummedMatrix> = weight_sets
        .iter()
        .map(|ws| summed_matrix(ws, |w| find(w)))
        .collect::<Result<_>>()?;
    let moments: Vec<MomentMatrix> = summed
        .iter()
        .zip(xi)
        .map(|(smat, mu)| moment_matrix(mu, set, smat, &kmatrices))
        .collect::<Result<_>>()?;
    Ok(MomentPipeline {
        weight_sets,
        offsets,
        neighbours,
        summed,
        kmatrices,
        moments,
        stats,
        weight_count,
    })
}

/// Writes a neighbour matrix in Matrix Market coordinate pattern format
/// (lower triangle of the symmetric pattern, 1-based indices).
pub fn write_pattern_matrix_market<W: Write>(out: &mut W, mat: &NeighbourMatrix) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate pattern symmetric")?;
    writeln!(out, "{} {} {}", mat.dim, mat.dim, mat.nnz())?;
    for &(a, b) in mat.pairs() {
        writeln!(out, "{} {}", b + 1, a + 1)?;
    }
    Ok(())
}

/// Writes a real symmetric sparse matrix in Matrix Market coordinate format
/// (lower triangle, 1-based indices, 17 significant digits).
pub fn write_real_matrix_market<W: Write>(
    out: &mut W,
    dim: u32,
    entries: impl Iterator<Item = (u32, u32, f64)>,
    nnz: usize,
) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", dim, dim, nnz)?;
    for (a, b, v) in entries {
        writeln!(out, "{} {} {}", b + 1, a + 1, crate::fmt_g17(v))?;
    }
    Ok(())
}
