//! Hierarchical multi-index sets with parenthood trees.
//!
//! An index set is grown from the zero multi-index by one-increments at a
//! position greater or equal to the length of the parent. The generation
//! order is defined by a stack: all feasible children of the current element
//! are pushed in increasing length order, so elements are added in decreasing
//! length order. The recorded parent/child tree supports locating a member
//! in `O(|alpha|)` steps, which is what makes fast neighbour-matrix
//! construction possible.
//!
//! Ordinals are 0-based throughout, including file output and error messages.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};

use crate::{Error, Result};

/// Finitely supported multi-index stored as sorted `(position, exponent)`
/// pairs. Positions are 1-based dimension numbers; exponents are strictly
/// positive (the zero multi-index has no pairs).
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct MultiIndex {
    pairs: Vec<(u32, u32)>,
}

impl MultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The unit multi-index `e_m` (1-based position `m`).
    pub fn unit(m: u32) -> Self {
        assert!(m >= 1, "positions are 1-based");
        Self { pairs: vec![(m, 1)] }
    }

    /// Builds from sparse pairs; positions must be 1-based and strictly
    /// increasing, exponents strictly positive.
    pub fn from_pairs(pairs: Vec<(u32, u32)>) -> Result<Self> {
        for (i, &(p, e)) in pairs.iter().enumerate() {
            if p == 0 {
                return Err(Error::Config("positions are 1-based".into()));
            }
            if e == 0 {
                return Err(Error::Config("zero exponents are not stored".into()));
            }
            if i > 0 && pairs[i - 1].0 >= p {
                return Err(Error::Config("positions must be strictly increasing".into()));
            }
        }
        Ok(Self { pairs })
    }

    /// Builds from a dense exponent vector (index 0 is position 1).
    pub fn from_dense(dense: &[u32]) -> Self {
        let pairs = dense
            .iter()
            .enumerate()
            .filter(|&(_, &e)| e > 0)
            .map(|(i, &e)| (i as u32 + 1, e))
            .collect();
        Self { pairs }
    }

    pub fn to_dense(&self, len: usize) -> Vec<u32> {
        let mut v = vec![0; len.max(self.length() as usize)];
        for &(p, e) in &self.pairs {
            v[p as usize - 1] = e;
        }
        v
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn is_zero(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Exponent at 1-based position `m`.
    pub fn get(&self, m: u32) -> u32 {
        self.pairs
            .binary_search_by_key(&m, |&(p, _)| p)
            .map(|i| self.pairs[i].1)
            .unwrap_or(0)
    }

    /// Largest position with a nonzero exponent, or 0 for the zero index.
    pub fn length(&self) -> u32 {
        self.pairs.last().map(|&(p, _)| p).unwrap_or(0)
    }

    /// Total degree: sum of all exponents.
    pub fn total_degree(&self) -> u32 {
        self.pairs.iter().map(|&(_, e)| e).sum()
    }

    /// Number of nonzero positions.
    pub fn support_size(&self) -> usize {
        self.pairs.len()
    }

    pub fn max_exponent(&self) -> u32 {
        self.pairs.iter().map(|&(_, e)| e).max().unwrap_or(0)
    }

    /// One-increment at 1-based position `m`; used by the set builders, where
    /// `m >= length(self)` always holds.
    fn increment(&mut self, m: u32) {
        match self.pairs.last_mut() {
            Some(last) if last.0 == m => last.1 += 1,
            _ => self.pairs.push((m, 1)),
        }
    }

    /// The unique generation parent: one-decrement at the last position.
    /// Returns `None` for the zero index.
    pub fn generation_parent(&self) -> Option<MultiIndex> {
        let mut p = self.clone();
        let last = p.pairs.last_mut()?;
        if last.1 > 1 {
            last.1 -= 1;
        } else {
            p.pairs.pop();
        }
        Some(p)
    }

    /// Componentwise `<=`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.pairs.iter().all(|&(p, e)| e <= other.get(p))
    }

    pub fn to_signed(&self) -> SignedMultiIndex {
        SignedMultiIndex {
            pairs: self.pairs.iter().map(|&(p, e)| (p, e as i64)).collect(),
        }
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_dense(&self.to_signed()))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_dense(&self.to_signed()))
    }
}

/// Multi-index with signed exponents; arises from componentwise subtraction
/// and from weight sets. Canonical sparse form: no zero exponents stored.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SignedMultiIndex {
    pairs: Vec<(u32, i64)>,
}

impl SignedMultiIndex {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: Vec<(u32, i64)>) -> Result<Self> {
        for (i, &(p, e)) in pairs.iter().enumerate() {
            if p == 0 {
                return Err(Error::Config("positions are 1-based".into()));
            }
            if e == 0 {
                return Err(Error::Config("zero exponents are not stored".into()));
            }
            if i > 0 && pairs[i - 1].0 >= p {
                return Err(Error::Config("positions must be strictly increasing".into()));
            }
        }
        Ok(Self { pairs })
    }

    pub fn from_dense(dense: &[i64]) -> Self {
        let pairs = dense
            .iter()
            .enumerate()
            .filter(|&(_, &e)| e != 0)
            .map(|(i, &e)| (i as u32 + 1, e))
            .collect();
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(u32, i64)] {
        &self.pairs
    }

    pub fn is_zero(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, m: u32) -> i64 {
        self.pairs
            .binary_search_by_key(&m, |&(p, _)| p)
            .map(|i| self.pairs[i].1)
            .unwrap_or(0)
    }

    pub fn length(&self) -> u32 {
        self.pairs.last().map(|&(p, _)| p).unwrap_or(0)
    }

    pub fn has_negative(&self) -> bool {
        self.pairs.iter().any(|&(_, e)| e < 0)
    }

    /// Signed sum of all exponents.
    pub fn signed_degree(&self) -> i64 {
        self.pairs.iter().map(|&(_, e)| e).sum()
    }

    pub fn negate(&self) -> SignedMultiIndex {
        SignedMultiIndex {
            pairs: self.pairs.iter().map(|&(p, e)| (p, -e)).collect(),
        }
    }

    /// Flips the sign so the first nonzero exponent is positive.
    pub fn sign_normalized(&self) -> SignedMultiIndex {
        match self.pairs.first() {
            Some(&(_, e)) if e < 0 => self.negate(),
            _ => self.clone(),
        }
    }

    /// Reinterprets as an unsigned multi-index; all exponents must be positive.
    pub fn to_unsigned(&self) -> Result<MultiIndex> {
        if self.has_negative() {
            return Err(Error::Config(format!(
                "negative exponent in {}",
                format_dense(self)
            )));
        }
        Ok(MultiIndex {
            pairs: self.pairs.iter().map(|&(p, e)| (p, e as u32)).collect(),
        })
    }
}

impl fmt::Debug for SignedMultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_dense(self))
    }
}

impl fmt::Display for SignedMultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_dense(self))
    }
}

fn format_dense(s: &SignedMultiIndex) -> String {
    let len = s.length().max(1);
    let vals: Vec<String> = (1..=len).map(|m| s.get(m).to_string()).collect();
    format!("({})", vals.join(","))
}

/// Componentwise difference `a - b` in canonical sparse form.
pub fn subtract(a: &MultiIndex, b: &SignedMultiIndex) -> SignedMultiIndex {
    let mut pairs = Vec::with_capacity(a.pairs.len() + b.pairs.len());
    let mut i = 0;
    let mut j = 0;
    while i < a.pairs.len() || j < b.pairs.len() {
        let pa = a.pairs.get(i).map(|&(p, _)| p).unwrap_or(u32::MAX);
        let pb = b.pairs.get(j).map(|&(p, _)| p).unwrap_or(u32::MAX);
        let (p, v) = if pa < pb {
            i += 1;
            (pa, a.pairs[i - 1].1 as i64)
        } else if pb < pa {
            j += 1;
            (pb, -b.pairs[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (pa, a.pairs[i - 1].1 as i64 - b.pairs[j - 1].1)
        };
        if v != 0 {
            pairs.push((p, v));
        }
    }
    SignedMultiIndex { pairs }
}

/// Specification of an index set family.
///
/// Weight vectors `g` of the anisotropic families are normalized internally
/// by their minimum, so they only need to be given up to a positive constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum IndexSetSpec {
    /// Threshold sequence set: all alpha with `prod_m mu_m^alpha_m >= eps`.
    /// Positions beyond the finite `mu` list have weight zero.
    Ts { mu: Vec<f64>, eps: f64 },
    /// Isotropic total degree: `sum alpha_n <= k` over `n` dimensions.
    IsoTd { n: u32, k: u32 },
    /// Isotropic tensor product: `max alpha_n <= k` over `n` dimensions.
    IsoTp { n: u32, k: u32 },
    /// Anisotropic total degree: `sum (g_n/g_min) alpha_n <= k`.
    ATd { n: u32, k: f64, g: Vec<f64> },
    /// Anisotropic tensor product: `max (g_n/g_min) alpha_n <= k`.
    ATp { n: u32, k: f64, g: Vec<f64> },
}

impl IndexSetSpec {
    /// Short family label used in file outputs.
    pub fn family(&self) -> &'static str {
        match self {
            IndexSetSpec::Ts { .. } => "ts",
            IndexSetSpec::IsoTd { .. } => "isotd",
            IndexSetSpec::IsoTp { .. } => "isotp",
            IndexSetSpec::ATd { .. } => "atd",
            IndexSetSpec::ATp { .. } => "atp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IndexSetSpec::Ts { mu, eps } => {
                if mu.is_empty() {
                    return Err(Error::Config("ts: empty mu sequence".into()));
                }
                if !(mu[0] < 1.0) {
                    return Err(Error::Config(format!(
                        "ts: mu[0] = {} must be strictly below one",
                        mu[0]
                    )));
                }
                for w in mu.windows(2) {
                    if !(w[1] <= w[0]) {
                        return Err(Error::Config("ts: mu must be non-increasing".into()));
                    }
                }
                if !(mu[mu.len() - 1] >= 0.0) {
                    return Err(Error::Config("ts: mu entries must be nonnegative".into()));
                }
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(Error::Config(format!("ts: eps = {} not in (0,1)", eps)));
                }
            }
            IndexSetSpec::IsoTd { n, .. } | IndexSetSpec::IsoTp { n, .. } => {
                if *n == 0 {
                    return Err(Error::Config("dimension count must be positive".into()));
                }
            }
            IndexSetSpec::ATd { n, k, g } | IndexSetSpec::ATp { n, k, g } => {
                if *n == 0 {
                    return Err(Error::Config("dimension count must be positive".into()));
                }
                if g.len() != *n as usize {
                    return Err(Error::Config(format!(
                        "weight vector has {} entries for {} dimensions",
                        g.len(),
                        n
                    )));
                }
                if g.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(Error::Config("weights must be positive and finite".into()));
                }
                for w in g.windows(2) {
                    if !(w[1] >= w[0]) {
                        return Err(Error::Config(
                            "weights must be non-decreasing; permute dimensions first".into(),
                        ));
                    }
                }
                if !(*k >= 0.0) || !k.is_finite() {
                    return Err(Error::Config("k must be a nonnegative finite number".into()));
                }
            }
        }
        Ok(())
    }
}

/// Resolved membership condition; the anisotropic total-degree family is
/// reduced to a threshold condition with `mu_n = exp(-g_n/g_min)` and
/// `eps = exp(-k)`.
#[derive(Clone, Debug)]
enum SetCondition {
    Threshold { mu: Vec<f64>, eps: f64 },
    TotalDegree { n: u32, k: u32 },
    WeightedMax { n: u32, k: f64, g: Vec<f64> },
}

/// An ordered multi-index set with per-element weights and the parenthood
/// tree produced by the generation algorithm. Immutable once built; lookups
/// are pure and safe to share across threads.
#[derive(Clone, Debug)]
pub struct IndexSet {
    spec: IndexSetSpec,
    cond: SetCondition,
    indices: Vec<MultiIndex>,
    weights: Vec<f64>,
    parent: Vec<i64>,
    children: Vec<Vec<u32>>,
}

struct Frame {
    alpha: MultiIndex,
    m: u32,
    eps_a: f64,
    parent: u32,
}

/// Builds the index set described by `spec`.
///
/// Elements are generated in the canonical stack order: after an element is
/// added, its feasible children are pushed in increasing length order, so
/// additions happen in decreasing length order. Child lists record new
/// children at the front, which keeps them sorted by increasing extension
/// position.
pub fn build_index_set(spec: &IndexSetSpec) -> Result<IndexSet> {
    spec.validate()?;
    let cond = match spec {
        IndexSetSpec::Ts { mu, eps } => SetCondition::Threshold {
            mu: mu.clone(),
            eps: *eps,
        },
        IndexSetSpec::IsoTd { n, k } => SetCondition::TotalDegree { n: *n, k: *k },
        IndexSetSpec::IsoTp { n, k } => SetCondition::WeightedMax {
            n: *n,
            k: *k as f64,
            g: vec![1.0; *n as usize],
        },
        IndexSetSpec::ATd { n: _, k, g } => {
            let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
            SetCondition::Threshold {
                mu: g.iter().map(|&x| (-x / gmin).exp()).collect(),
                eps: (-k).exp(),
            }
        }
        IndexSetSpec::ATp { n, k, g } => {
            let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
            SetCondition::WeightedMax {
                n: *n,
                k: *k,
                g: g.iter().map(|&x| x / gmin).collect(),
            }
        }
    };
    let mut set = IndexSet {
        spec: spec.clone(),
        cond,
        indices: Vec::new(),
        weights: Vec::new(),
        parent: Vec::new(),
        children: Vec::new(),
    };
    match set.cond.clone() {
        SetCondition::Threshold { mu, eps } => build_threshold(&mut set, &mu, eps),
        SetCondition::TotalDegree { n, k } => build_total_degree(&mut set, n, k),
        SetCondition::WeightedMax { n, k, g } => build_weighted_max(&mut set, n, k, &g),
    }
    Ok(set)
}

fn mu_at(mu: &[f64], m: u32) -> f64 {
    mu.get(m as usize - 1).copied().unwrap_or(0.0)
}

fn build_threshold(set: &mut IndexSet, mu: &[f64], eps: f64) {
    set.push_root(1.0);
    let mut alpha = MultiIndex::zero();
    let mut m = 1u32;
    let mut eps_a = 1.0f64;
    let mut cur = 0u32;
    let mut stack: Vec<Frame> = Vec::new();
    loop {
        if eps_a * mu_at(mu, m) >= eps {
            stack.push(Frame {
                alpha: alpha.clone(),
                m,
                eps_a,
                parent: cur,
            });
            m += 1;
            continue;
        }
        let Some(fr) = stack.pop() else { return };
        alpha = fr.alpha;
        m = fr.m;
        alpha.increment(m);
        eps_a = fr.eps_a * mu_at(mu, m);
        cur = set.push_child(alpha.clone(), eps_a, fr.parent);
    }
}

fn build_total_degree(set: &mut IndexSet, n: u32, k: u32) {
    set.push_root(0.0);
    let mut alpha = MultiIndex::zero();
    let mut m = 1u32;
    let mut deg = 0u32;
    let mut cur = 0u32;
    let mut stack: Vec<Frame> = Vec::new();
    loop {
        if deg < k && m <= n {
            stack.push(Frame {
                alpha: alpha.clone(),
                m,
                eps_a: deg as f64,
                parent: cur,
            });
            m += 1;
            continue;
        }
        let Some(fr) = stack.pop() else { return };
        alpha = fr.alpha;
        m = fr.m;
        alpha.increment(m);
        deg = fr.eps_a as u32 + 1;
        cur = set.push_child(alpha.clone(), deg as f64, fr.parent);
    }
}

fn build_weighted_max(set: &mut IndexSet, n: u32, k: f64, g: &[f64]) {
    set.push_root(0.0);
    let mut alpha = MultiIndex::zero();
    let mut m = 1u32;
    let mut eps_a = 0.0f64;
    let mut cur = 0u32;
    let mut stack: Vec<Frame> = Vec::new();
    loop {
        // Children are pushed optimistically; infeasible increments are
        // rejected at pop time, because incrementing the last position of a
        // member may be infeasible while later positions are still feasible.
        if eps_a <= k && m <= n {
            stack.push(Frame {
                alpha: alpha.clone(),
                m,
                eps_a,
                parent: cur,
            });
            m += 1;
            eps_a = 0.0;
            continue;
        }
        loop {
            let Some(fr) = stack.pop() else { return };
            alpha = fr.alpha.clone();
            m = fr.m;
            alpha.increment(m);
            eps_a = fr.eps_a + g[m as usize - 1];
            if eps_a <= k {
                cur = set.push_child(alpha.clone(), eps_a, fr.parent);
                break;
            }
        }
    }
}

impl IndexSet {
    fn push_root(&mut self, weight: f64) {
        self.indices.push(MultiIndex::zero());
        self.weights.push(weight);
        self.parent.push(-1);
        self.children.push(Vec::new());
    }

    fn push_child(&mut self, index: MultiIndex, weight: f64, parent: u32) -> u32 {
        let ord = self.indices.len() as u32;
        self.indices.push(index);
        self.weights.push(weight);
        self.parent.push(parent as i64);
        self.children.push(Vec::new());
        self.children[parent as usize].insert(0, ord);
        ord
    }

    pub fn spec(&self) -> &IndexSetSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, ordinal: u32) -> &MultiIndex {
        &self.indices[ordinal as usize]
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Stored weight of an element: `mu^alpha` for threshold-like families,
    /// the total degree for `isotd`, and the weighted value of the last
    /// incremented position for the tensor-product families.
    pub fn weight(&self, ordinal: u32) -> f64 {
        self.weights[ordinal as usize]
    }

    /// Parent ordinal, or -1 for the root.
    pub fn parent(&self, ordinal: u32) -> i64 {
        self.parent[ordinal as usize]
    }

    /// Child ordinals sorted by increasing extension position.
    pub fn children(&self, ordinal: u32) -> &[u32] {
        &self.children[ordinal as usize]
    }

    pub fn max_total_degree(&self) -> u32 {
        self.indices.iter().map(|a| a.total_degree()).max().unwrap_or(0)
    }

    pub fn max_exponent(&self) -> u32 {
        self.indices.iter().map(|a| a.max_exponent()).max().unwrap_or(0)
    }

    /// Locates a member by walking the parenthood tree; cost is one tree step
    /// per unit of total degree of `target`.
    pub fn locate(&self, target: &MultiIndex) -> Result<u32> {
        let mut steps = 0u64;
        self.locate_counted(target, &mut steps)
    }

    /// As [`locate`](Self::locate), adding the number of tree steps taken to
    /// `steps`. Returns `NotFound` if the walk falls off the tree or ends on
    /// a different element, which only happens when `target` is not a member.
    pub fn locate_counted(&self, target: &MultiIndex, steps: &mut u64) -> Result<u32> {
        // Tensor-product child lists may not start at the parent's own
        // length, so the step to a longer child indexes from the end of the
        // list; the other families index from the front.
        let from_end = matches!(self.cond, SetCondition::WeightedMax { .. });
        let mut k = 0u32;
        let mut u = 1u32;
        for &(pos, val) in target.pairs() {
            let mut remaining = val;
            if pos > u {
                let list = &self.children[k as usize];
                let idx = if from_end {
                    let last = *list.last().ok_or_else(|| self.not_found(target))?;
                    let hi = self.indices[last as usize].length();
                    (list.len() as i64 - 1 - (hi as i64 - pos as i64)) as usize
                } else {
                    (pos - u) as usize
                };
                k = *list.get(idx).ok_or_else(|| self.not_found(target))?;
                *steps += 1;
                remaining -= 1;
                u = pos;
            }
            while remaining > 0 {
                let list = &self.children[k as usize];
                k = *list.first().ok_or_else(|| self.not_found(target))?;
                *steps += 1;
                remaining -= 1;
            }
        }
        if self.indices[k as usize] != *target {
            return Err(self.not_found(target));
        }
        Ok(k)
    }

    fn not_found(&self, target: &MultiIndex) -> Error {
        Error::NotFound(format!("{}", target))
    }

    /// Fast membership test for `candidate = eta - w` given the combined
    /// weight hint computed from stored weights:
    /// `mu^eta / mu^w` for threshold families, `deg(eta) - deg(w)` for the
    /// total-degree family (unused by the tensor-product families).
    pub fn contains(&self, candidate: &SignedMultiIndex, weight_hint: f64) -> bool {
        if candidate.has_negative() {
            return false;
        }
        match &self.cond {
            SetCondition::Threshold { mu, eps } => {
                if candidate.pairs().iter().any(|&(p, _)| mu_at(mu, p) == 0.0) {
                    return false;
                }
                weight_hint >= *eps
            }
            SetCondition::TotalDegree { n, k } => {
                candidate.length() <= *n && weight_hint <= *k as f64
            }
            SetCondition::WeightedMax { n, k, g } => {
                candidate.length() <= *n
                    && candidate
                        .pairs()
                        .iter()
                        .all(|&(p, v)| g[p as usize - 1] * v as f64 <= *k)
            }
        }
    }

    /// Self-contained membership test; recomputes the weight from scratch.
    pub fn contains_index(&self, candidate: &MultiIndex) -> bool {
        let hint = match &self.cond {
            SetCondition::Threshold { mu, .. } => candidate
                .pairs()
                .iter()
                .map(|&(p, e)| mu_at(mu, p).powi(e as i32))
                .product(),
            SetCondition::TotalDegree { .. } => candidate.total_degree() as f64,
            SetCondition::WeightedMax { .. } => 0.0,
        };
        self.contains(&candidate.to_signed(), hint)
    }

    /// Weight of an arbitrary signed offset `w` under this set's condition:
    /// `mu^w` for threshold families (`NaN` when the support of `w` touches a
    /// zero-weight position), the signed degree for the total-degree family.
    pub fn offset_weight(&self, w: &SignedMultiIndex) -> f64 {
        match &self.cond {
            SetCondition::Threshold { mu, .. } => {
                let mut acc = 1.0;
                for &(p, e) in w.pairs() {
                    let m = mu_at(mu, p);
                    if m == 0.0 {
                        return f64::NAN;
                    }
                    acc *= m.powi(e as i32);
                }
                acc
            }
            SetCondition::TotalDegree { .. } => w.signed_degree() as f64,
            SetCondition::WeightedMax { .. } => 0.0,
        }
    }

    /// True when no member can be mapped to another member by the offset `w`
    /// (support of `w` reaches outside the set's active dimensions).
    pub fn offset_out_of_range(&self, w: &SignedMultiIndex) -> bool {
        match &self.cond {
            SetCondition::Threshold { mu, .. } => {
                w.pairs().iter().any(|&(p, _)| mu_at(mu, p) == 0.0)
            }
            SetCondition::TotalDegree { n, .. } | SetCondition::WeightedMax { n, .. } => {
                w.length() > *n
            }
        }
    }

    /// Writes the text serialization, one line per element:
    /// `ordinal<TAB>parent<TAB>pos:exp,...<TAB>weight` (root parent is -1).
    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        for ord in 0..self.len() {
            let pairs = self.indices[ord]
                .pairs()
                .iter()
                .map(|&(p, e)| format!("{}:{}", p, e))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                ord,
                self.parent[ord],
                pairs,
                crate::fmt_g17(self.weights[ord])
            )?;
        }
        Ok(())
    }

    /// Reads the text serialization back into (index, parent, weight) rows.
    pub fn read_text<R: BufRead>(input: R) -> Result<Vec<(MultiIndex, i64, f64)>> {
        let mut rows = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::Config(format!(
                    "line {}: expected 4 tab-separated fields",
                    lineno
                )));
            }
            let ord: usize = fields[0]
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad ordinal", lineno)))?;
            if ord != rows.len() {
                return Err(Error::Config(format!(
                    "line {}: ordinal {} out of order",
                    lineno, ord
                )));
            }
            let parent: i64 = fields[1]
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad parent", lineno)))?;
            let mut pairs = Vec::new();
            if !fields[2].is_empty() {
                for item in fields[2].split(',') {
                    let (p, e) = item
                        .split_once(':')
                        .ok_or_else(|| Error::Config(format!("line {}: bad pair", lineno)))?;
                    pairs.push((
                        p.parse()
                            .map_err(|_| Error::Config(format!("line {}: bad position", lineno)))?,
                        e.parse()
                            .map_err(|_| Error::Config(format!("line {}: bad exponent", lineno)))?,
                    ));
                }
            }
            let weight: f64 = fields[3]
                .parse()
                .map_err(|_| Error::Config(format!("line {}: bad weight", lineno)))?;
            rows.push((MultiIndex::from_pairs(pairs)?, parent, weight));
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(dense: &[u32]) -> MultiIndex {
        MultiIndex::from_dense(dense)
    }

    fn smi(dense: &[i64]) -> SignedMultiIndex {
        SignedMultiIndex::from_dense(dense)
    }

    fn paper_ts_spec() -> IndexSetSpec {
        IndexSetSpec::Ts {
            mu: vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0, 1.0 / 50.0, 1.0 / 60.0, 1.0 / 70.0],
            eps: 1.0 / 20.0,
        }
    }

    /// Expected golden set: generation order, exact weights, parent ordinals.
    fn paper_ts_expected() -> Vec<(Vec<u32>, f64, i64)> {
        vec![
            (vec![0, 0, 0], 1.0, -1),
            (vec![0, 0, 1], 0.25, 0),
            (vec![0, 0, 2], 0.0625, 1),
            (vec![0, 1, 0], 1.0 / 3.0, 0),
            (vec![0, 1, 1], 1.0 / 12.0, 3),
            (vec![0, 2, 0], 1.0 / 9.0, 3),
            (vec![1, 0, 0], 0.5, 0),
            (vec![1, 0, 1], 0.125, 6),
            (vec![1, 1, 0], 1.0 / 6.0, 6),
            (vec![1, 2, 0], 1.0 / 18.0, 8),
            (vec![2, 0, 0], 0.25, 6),
            (vec![2, 0, 1], 0.0625, 10),
            (vec![2, 1, 0], 1.0 / 12.0, 10),
            (vec![3, 0, 0], 0.125, 10),
            (vec![4, 0, 0], 0.0625, 13),
        ]
    }

    #[test]
    fn golden_ts_set_matches_example_run() {
        let set = build_index_set(&paper_ts_spec()).unwrap();
        let expected = paper_ts_expected();
        assert_eq!(set.len(), expected.len());
        for (ord, (dense, weight, parent)) in expected.iter().enumerate() {
            assert_eq!(set.index(ord as u32), &mi(dense), "ordinal {}", ord);
            assert!(
                (set.weight(ord as u32) - weight).abs() <= 1e-12,
                "weight at {}: {} vs {}",
                ord,
                set.weight(ord as u32),
                weight
            );
            assert_eq!(set.parent(ord as u32), *parent, "parent of {}", ord);
        }
        // Child lists sorted by increasing extension position, new children
        // recorded at the front.
        assert_eq!(set.children(0), &[6, 3, 1]);
        assert_eq!(set.children(6), &[10, 8, 7]);
        assert_eq!(set.children(10), &[13, 12, 11]);
    }

    #[test]
    fn isotd_degree_zero_is_singleton() {
        let set = build_index_set(&IndexSetSpec::IsoTd { n: 4, k: 0 }).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.index(0).is_zero());
    }

    fn binomial(n: u64, k: u64) -> u64 {
        let k = k.min(n - k);
        let mut acc = 1u64;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }

    #[test]
    fn isotropic_cardinalities() {
        for n in 1..=6u32 {
            for k in 0..=8u32 {
                let tp = build_index_set(&IndexSetSpec::IsoTp { n, k }).unwrap();
                assert_eq!(
                    tp.len() as u64,
                    (k as u64 + 1).pow(n),
                    "isotp({},{})",
                    n,
                    k
                );
                let td = build_index_set(&IndexSetSpec::IsoTd { n, k }).unwrap();
                assert_eq!(
                    td.len() as u64,
                    binomial((n + k) as u64, k as u64),
                    "isotd({},{})",
                    n,
                    k
                );
            }
        }
    }

    #[test]
    fn locate_walks_the_paper_example() {
        let set = build_index_set(&paper_ts_spec()).unwrap();
        assert_eq!(set.locate(&mi(&[2, 0, 1])).unwrap(), 11);
        assert_eq!(set.locate(&MultiIndex::zero()).unwrap(), 0);
        for ord in 0..set.len() as u32 {
            assert_eq!(set.locate(set.index(ord)).unwrap(), ord);
        }
    }

    #[test]
    fn locate_rejects_non_members() {
        let set = build_index_set(&paper_ts_spec()).unwrap();
        assert!(set.locate(&mi(&[0, 0, 3])).is_err());
        assert!(set.locate(&mi(&[5, 0, 0])).is_err());
        assert!(set.locate(&mi(&[1, 1, 1])).is_err());
    }

    #[test]
    fn contains_rejects_the_rejected_child() {
        let set = build_index_set(&paper_ts_spec()).unwrap();
        // mu^(0,0,3) = 1/64 < 1/20.
        let gamma = smi(&[0, 0, 3]);
        let hint = set.offset_weight(&gamma.sign_normalized());
        assert!(!set.contains(&gamma, hint));
        assert!(set.contains(&smi(&[2, 0, 1]), 0.0625));
        assert!(!set.contains(&smi(&[1, -1, 0]), 10.0));
    }

    #[test]
    fn degenerate_ts_eps_above_mu1_is_singleton() {
        let set = build_index_set(&IndexSetSpec::Ts {
            mu: vec![0.3, 0.2],
            eps: 0.5,
        })
        .unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(build_index_set(&IndexSetSpec::Ts {
            mu: vec![1.0, 0.5],
            eps: 0.1
        })
        .is_err());
        assert!(build_index_set(&IndexSetSpec::Ts {
            mu: vec![0.5, 0.6],
            eps: 0.1
        })
        .is_err());
        assert!(build_index_set(&IndexSetSpec::Ts {
            mu: vec![0.5],
            eps: 1.5
        })
        .is_err());
        assert!(build_index_set(&IndexSetSpec::ATd {
            n: 2,
            k: 3.0,
            g: vec![1.0, -1.0]
        })
        .is_err());
        assert!(build_index_set(&IndexSetSpec::ATp {
            n: 2,
            k: 3.0,
            g: vec![2.0, 1.0]
        })
        .is_err());
    }

    #[test]
    fn subtract_componentwise() {
        assert_eq!(subtract(&mi(&[1, 2, 0]), &smi(&[1, -1, 0])), smi(&[0, 3, 0]));
        let a = mi(&[3, 0, 2]);
        assert!(subtract(&a, &a.to_signed()).is_zero());
    }

    #[test]
    fn text_round_trip() {
        let set = build_index_set(&paper_ts_spec()).unwrap();
        let mut buf = Vec::new();
        set.write_text(&mut buf).unwrap();
        let rows = IndexSet::read_text(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), set.len());
        for (ord, (index, parent, weight)) in rows.iter().enumerate() {
            assert_eq!(index, set.index(ord as u32));
            assert_eq!(*parent, set.parent(ord as u32));
            assert_eq!(*weight, set.weight(ord as u32));
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = IndexSetSpec::ATd {
            n: 3,
            k: 4.5,
            g: vec![1.0, 2.0, 3.0],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: IndexSetSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let parsed: IndexSetSpec =
            serde_json::from_str(r#"{"type":"isotd","n":4,"k":2}"#).unwrap();
        assert_eq!(parsed, IndexSetSpec::IsoTd { n: 4, k: 2 });
    }
}
