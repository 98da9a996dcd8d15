//! Desk-scale 1D stochastic Galerkin solver for the model problem
//! `-(a(y,x) u')' = 1` on `(-1,1)` with homogeneous Dirichlet ends, a
//! diffusion coefficient `a(y,x) = 1 + [1 + sum_m a_m(x) y_m]^p`, and
//! uniformly distributed parameters expanded in orthonormal Legendre chaos.
//!
//! Carries the full experiment workflow: coefficient expansion, Galerkin
//! assembly and solve, mean/variance statistics, relative error curves,
//! coefficient-norm orderings, anisotropic weight estimation, best-M
//! selection and convergence-rate fits.

pub mod fem;
pub mod solver;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::moment::{build_moment_matrices, PipelineOptions};
use crate::multiindex::{IndexSet, MultiIndex};
use crate::orthopoly::{eval_poly, Family};
use crate::quad::gauss_rule;
use crate::{par, Error, Result};

pub use fem::FemSpace;
pub use solver::{KroneckerSystem, SolveReport};

/// Spatial profile of the terms `a_m(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialProfile {
    /// `a_m(x) = m^{-s}`.
    Constant,
    /// `a_m(x) = m^{-s} sin(m pi x)`.
    Sinusoidal,
}

/// Parameters of the diffusion coefficient `1 + [1 + sum a_m(x) y_m]^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub m: u32,
    pub s: f64,
    pub p: u32,
    pub spatial: SpatialProfile,
}

impl DiffusionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 {
            return Err(Error::Config("need at least one variable and power one".into()));
        }
        if !(self.s > 0.0) {
            return Err(Error::Config("decay exponent must be positive".into()));
        }
        Ok(())
    }

    fn amplitude(&self, m: u32) -> f64 {
        (m as f64).powf(-self.s)
    }

    fn term(&self, m: u32, x: f64) -> f64 {
        match self.spatial {
            SpatialProfile::Constant => self.amplitude(m),
            SpatialProfile::Sinusoidal => {
                self.amplitude(m) * (m as f64 * std::f64::consts::PI * x).sin()
            }
        }
    }

    /// Closed-form evaluation of the coefficient.
    pub fn evaluate(&self, y: &[f64], x: f64) -> f64 {
        let bracket: f64 =
            1.0 + (1..=self.m).map(|m| self.term(m, x) * y[m as usize - 1]).sum::<f64>();
        1.0 + bracket.powi(self.p as i32)
    }
}

/// One expanded term `c * prod_m sin(m pi x)^{e_m}` (the sine product is
/// empty in the space-independent case).
#[derive(Clone, Debug)]
pub struct SpatialCoefficient {
    pub scalar: f64,
    pub sin_powers: Vec<(u32, u32)>,
}

impl SpatialCoefficient {
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.scalar;
        for &(m, e) in &self.sin_powers {
            v *= (m as f64 * std::f64::consts::PI * x).sin().powi(e as i32);
        }
        v
    }
}

/// Multinomial expansion of the diffusion coefficient grouped by monomial:
/// `a(y,x) = a_0(x) + sum_{mu in xi} a_mu(x) y^mu`.
#[derive(Clone, Debug)]
pub struct NonAffineExpansion {
    pub spec: DiffusionSpec,
    pub a0: SpatialCoefficient,
    /// Nonconstant terms, keyed by their exponent vector; excludes zero.
    pub terms: Vec<(MultiIndex, SpatialCoefficient)>,
    /// Truncation dimension: largest active variable index.
    pub tilde_m: u32,
}

impl NonAffineExpansion {
    /// Evaluates the expanded form; equals [`DiffusionSpec::evaluate`] up to
    /// rounding.
    pub fn evaluate(&self, y: &[f64], x: f64) -> f64 {
        let mut acc = self.a0.eval(x);
        for (mu, coeff) in &self.terms {
            let mut mono = coeff.eval(x);
            for &(m, e) in mu.pairs() {
                mono *= y[m as usize - 1].powi(e as i32);
            }
            acc += mono;
        }
        acc
    }

    pub fn xi(&self) -> Vec<MultiIndex> {
        self.terms.iter().map(|(mu, _)| mu.clone()).collect()
    }
}

/// Expands `(1 + sum a_m(x) y_m)^p` by the multinomial theorem and validates
/// strict positivity of the coefficient (interval bound on the bracket plus
/// a low-discrepancy sample scan).
pub fn expand_diffusion(spec: &DiffusionSpec) -> Result<NonAffineExpansion> {
    spec.validate()?;
    validate_positivity(spec)?;
    let mut terms = Vec::new();
    let mut exponents = vec![0u32; spec.m as usize];
    let p = spec.p;
    expand_rec(spec, 0, p, &mut exponents, &mut terms);
    // Deterministic order: by total degree, then lexicographic.
    terms.sort_by(|a, b| {
        (a.0.total_degree(), a.0.pairs()).cmp(&(b.0.total_degree(), b.0.pairs()))
    });
    let a0 = SpatialCoefficient {
        // Constant 1 plus the mu = 0 term of the bracket power.
        scalar: 2.0,
        sin_powers: Vec::new(),
    };
    Ok(NonAffineExpansion {
        spec: spec.clone(),
        a0,
        terms,
        tilde_m: spec.m,
    })
}

fn expand_rec(
    spec: &DiffusionSpec,
    dim: usize,
    p: u32,
    exponents: &mut Vec<u32>,
    out: &mut Vec<(MultiIndex, SpatialCoefficient)>,
) {
    if dim == spec.m as usize {
        let mu = MultiIndex::from_dense(exponents);
        if mu.is_zero() {
            return; // collected in a0
        }
        let total: u32 = exponents.iter().sum();
        let mut scalar = multinomial(p, total, exponents);
        let mut sin_powers = Vec::new();
        for &(m, e) in mu.pairs() {
            scalar *= spec.amplitude(m).powi(e as i32);
            if spec.spatial == SpatialProfile::Sinusoidal {
                sin_powers.push((m, e));
            }
        }
        out.push((mu, SpatialCoefficient { scalar, sin_powers }));
        return;
    }
    let used: u32 = exponents[..dim].iter().sum();
    for e in 0..=(p - used) {
        exponents[dim] = e;
        expand_rec(spec, dim + 1, p, exponents, out);
    }
    exponents[dim] = 0;
}

/// `p! / ((p - total)! * prod e_m!)` evaluated in f64; exact for the desk
/// scale powers used here.
fn multinomial(p: u32, total: u32, exponents: &[u32]) -> f64 {
    let mut acc = 1.0;
    let mut remaining = p;
    for &e in exponents {
        for i in 0..e {
            acc *= (remaining - i) as f64;
        }
        for i in 1..=e {
            acc /= i as f64;
        }
        remaining -= e;
    }
    debug_assert_eq!(remaining, p - total);
    acc
}

fn validate_positivity(spec: &DiffusionSpec) -> Result<()> {
    // Interval bound: the bracket lies in [1 - r, 1 + r] with
    // r = sum_m |a_m|_inf; an even power keeps a >= 1, an odd power needs
    // 1 + (1 - r)^p > 0.
    let r: f64 = (1..=spec.m).map(|m| spec.amplitude(m)).sum();
    let interval_min = if spec.p % 2 == 0 {
        1.0
    } else {
        1.0 + (1.0 - r).powi(spec.p as i32)
    };
    // Halton scan over (y, x); catches what the crude interval misses.
    let mut sample_min = f64::INFINITY;
    let dims = spec.m as usize + 1;
    for i in 0..10_000u32 {
        let point = halton_point(i + 1, dims);
        let y: Vec<f64> = point[..spec.m as usize].iter().map(|u| 2.0 * u - 1.0).collect();
        let x = 2.0 * point[spec.m as usize] - 1.0;
        sample_min = sample_min.min(spec.evaluate(&y, x));
    }
    if interval_min <= 0.0 || sample_min <= 0.0 {
        return Err(Error::Model(format!(
            "diffusion coefficient not strictly positive: interval bound {:.3e}, sampled minimum {:.3e}",
            interval_min, sample_min
        )));
    }
    Ok(())
}

const HALTON_PRIMES: [u32; 9] = [2, 3, 5, 7, 11, 13, 17, 19, 23];

fn halton_point(index: u32, dims: usize) -> Vec<f64> {
    assert!(dims <= HALTON_PRIMES.len());
    (0..dims)
        .map(|d| {
            let base = HALTON_PRIMES[d];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// A chaos solution: one spatial coefficient vector per set ordinal.
pub struct ChaosSolution {
    pub set: IndexSet,
    pub fem: FemSpace,
    /// `ndof x |set|`; column `a` is the coefficient of chaos index `a`.
    pub coeffs: DMatrix<f64>,
    pub report: SolveReport,
}

impl ChaosSolution {
    /// Evaluates `u(y, x)` from the truncated expansion.
    pub fn evaluate(&self, y: &[f64], x: f64) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.set.len() {
            let coeff = self.fem.value_at(&self.coeffs.column(a).clone_owned(), x);
            acc += coeff * chaos_value(self.set.index(a as u32), y);
        }
        acc
    }
}

/// Value of the multivariate chaos polynomial at `y` (Legendre family).
pub fn chaos_value(mu: &MultiIndex, y: &[f64]) -> f64 {
    mu.pairs()
        .iter()
        .map(|&(m, e)| eval_poly(Family::Legendre, e, y[m as usize - 1]))
        .product()
}

/// Solver knobs.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-12, maxit: 5000 }
    }
}

/// Assembles the Galerkin system for `expansion` over `index_set` and solves
/// it with mean-block preconditioned CG. The load is the constant 1, so the
/// stochastic right-hand side is the unit vector of the zero index.
pub fn assemble_and_solve(
    expansion: &NonAffineExpansion,
    index_set: &IndexSet,
    fem: &FemSpace,
    opts: SolverOptions,
) -> Result<ChaosSolution> {
    let xi = expansion.xi();
    let pipeline = build_moment_matrices(index_set, &xi, Family::Legendre, PipelineOptions::default())?;
    let a0 = fem.assemble_stiffness(&|x| expansion.a0.eval(x));
    let a_mats: Vec<DMatrix<f64>> = par::map_collect(&expansion.terms, |(_, coeff)| {
        fem.assemble_stiffness(&|x| coeff.eval(x))
    });
    let system = KroneckerSystem::new(a0, a_mats, &pipeline.moments, index_set.len())?;
    let mut rhs = DMatrix::zeros(fem.ndof(), index_set.len());
    rhs.column_mut(0).copy_from(&fem.assemble_unit_load());
    let (coeffs, report) = system.solve(&rhs, opts.tol, opts.maxit)?;
    Ok(ChaosSolution {
        set: index_set.clone(),
        fem: fem.clone(),
        coeffs,
        report,
    })
}

/// Mean and variance fields sampled at the FEM quadrature points.
#[derive(Clone, Debug)]
pub struct Statistics {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Mean field is the zero-index coefficient; the variance field is the sum
/// of squares of the remaining coefficients (orthonormal basis).
pub fn statistics(sol: &ChaosSolution) -> Statistics {
    statistics_of_subset(sol, None)
}

/// Statistics of the expansion truncated to `selection` (all ordinals when
/// `None`). Ordinal 0 carries the mean; if it is not selected the mean
/// field is zero.
pub fn statistics_of_subset(sol: &ChaosSolution, selection: Option<&[u32]>) -> Statistics {
    let npts = sol.fem.elements * sol.fem.points_per_element();
    let mut mean = vec![0.0; npts];
    let mut variance = vec![0.0; npts];
    let all: Vec<u32>;
    let ordinals: &[u32] = match selection {
        Some(s) => s,
        None => {
            all = (0..sol.set.len() as u32).collect();
            &all
        }
    };
    for &a in ordinals {
        let values = sol
            .fem
            .values_at_quad_points(&sol.coeffs.column(a as usize).clone_owned());
        if a == 0 {
            mean.copy_from_slice(&values);
        } else {
            for (slot, v) in variance.iter_mut().zip(&values) {
                *slot += v * v;
            }
        }
    }
    Statistics { mean, variance }
}

/// Relative `L^2(D)` errors of mean and variance in percent.
pub fn relative_errors(stats: &Statistics, reference: &Statistics, fem: &FemSpace) -> Result<(f64, f64)> {
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    };
    let mean_ref = fem.l2_norm_at_quad(&reference.mean);
    let var_ref = fem.l2_norm_at_quad(&reference.variance);
    if mean_ref == 0.0 || var_ref == 0.0 {
        return Err(Error::InsufficientData("reference statistics have zero norm".into()));
    }
    let mean_err = fem.l2_norm_at_quad(&diff(&stats.mean, &reference.mean)) / mean_ref * 100.0;
    let var_err =
        fem.l2_norm_at_quad(&diff(&stats.variance, &reference.variance)) / var_ref * 100.0;
    Ok((mean_err, var_err))
}

/// Energy norms of all coefficients, sorted non-increasing; ties keep
/// generation order.
pub fn coefficient_norms(sol: &ChaosSolution) -> Vec<(u32, f64)> {
    let mut norms: Vec<(u32, f64)> = (0..sol.set.len() as u32)
        .map(|a| {
            (
                a,
                sol.fem.v_norm(&sol.coeffs.column(a as usize).clone_owned()),
            )
        })
        .collect();
    norms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    norms
}

/// Fits the per-dimension decay rates `g_m` of the coefficient energies
/// along each coordinate ray, `||u_{k e_m}||_V^2 ~ exp(-g_m k)`, by least
/// squares on the log energies. The mean coefficient (`k = 0`) does not
/// belong to the decaying fluctuation family and is excluded, as are points
/// within relative noise `1e-12` of the ray peak.
pub fn estimate_weights(sol: &ChaosSolution, m_dims: u32) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(m_dims as usize);
    for m in 1..=m_dims {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut k = 1u32;
        loop {
            let target = MultiIndex::from_pairs(vec![(m, k)]).unwrap();
            if !sol.set.contains_index(&target) {
                break;
            }
            let ord = sol.set.locate(&target)?;
            let norm = sol.fem.v_norm(&sol.coeffs.column(ord as usize).clone_owned());
            pts.push((k as f64, norm));
            k += 1;
        }
        let peak = pts.iter().map(|&(_, n)| n).fold(0.0f64, f64::max);
        let floor = peak * 1e-12;
        let usable: Vec<(f64, f64)> = pts
            .into_iter()
            .filter(|&(_, n)| n > floor)
            .map(|(k, n)| (k, 2.0 * n.ln()))
            .collect();
        if usable.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "ray {} has {} usable points",
                m,
                usable.len()
            )));
        }
        let (slope, _) = least_squares_line(&usable);
        g.push(-slope);
    }
    Ok(g)
}

/// Ordinals of the `m` coefficients with the largest energy norms, ties
/// broken by generation ordinal.
pub fn best_m_select(sol: &ChaosSolution, m: usize) -> Result<Vec<u32>> {
    if m > sol.set.len() {
        return Err(Error::Config(format!(
            "cannot select {} of {} coefficients",
            m,
            sol.set.len()
        )));
    }
    Ok(coefficient_norms(sol)
        .into_iter()
        .take(m)
        .map(|(a, _)| a)
        .collect())
}

/// Least-squares slope of `log norm` against `log rank` over the 1-based
/// rank window `[first, last]`, sign-flipped to a positive rate.
pub fn fit_rate(norms: &[f64], first: usize, last: usize) -> Result<f64> {
    if first < 1 || last > norms.len() || first > last {
        return Err(Error::Config(format!(
            "rank window [{},{}] out of range for {} norms",
            first,
            last,
            norms.len()
        )));
    }
    let pts: Vec<(f64, f64)> = (first..=last)
        .filter(|&r| norms[r - 1] > 0.0)
        .map(|r| ((r as f64).ln(), norms[r - 1].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} positive norms in the fit window",
            pts.len()
        )));
    }
    let (slope, _) = least_squares_line(&pts);
    Ok(-slope)
}

fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Exact-solution statistics for the space-independent coefficient: the
/// model problem then has `u(y,x) = (1-x^2) / (2 a(y))`, so the mean and
/// variance factorize into `(1-x^2)/2` times moments of `1/a`, which are
/// integrated by a tensor Gauss rule with 32 points per dimension.
pub fn exact_statistics_space_independent(
    spec: &DiffusionSpec,
    fem: &FemSpace,
) -> Result<Statistics> {
    if spec.spatial != SpatialProfile::Constant {
        return Err(Error::Config(
            "closed-form reference needs the space-independent coefficient".into(),
        ));
    }
    if spec.m > 3 {
        return Err(Error::TooLarge("tensor rule guard: more than 3 variables".into()));
    }
    let rule = gauss_rule(Family::Legendre, 32);
    let dims = spec.m as usize;
    let mut inv_mean = 0.0;
    let mut inv_sq_mean = 0.0;
    let mut idx = vec![0usize; dims];
    loop {
        let mut weight = 1.0;
        let y: Vec<f64> = idx
            .iter()
            .map(|&i| {
                weight *= rule.weights[i];
                rule.nodes[i]
            })
            .collect();
        let a = spec.evaluate(&y, 0.0);
        inv_mean += weight / a;
        inv_sq_mean += weight / (a * a);
        // Odometer over the tensor grid.
        let mut d = 0;
        loop {
            if d == dims {
                break;
            }
            idx[d] += 1;
            if idx[d] < rule.nodes.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    let inv_var = inv_sq_mean - inv_mean * inv_mean;
    let nq = fem.points_per_element();
    let mut mean = vec![0.0; fem.elements * nq];
    let mut variance = vec![0.0; fem.elements * nq];
    for e in 0..fem.elements {
        for (q, &x) in fem.quad_points(e).iter().enumerate() {
            let shape = (1.0 - x * x) / 2.0;
            mean[e * nq + q] = shape * inv_mean;
            variance[e * nq + q] = shape * shape * inv_var;
        }
    }
    Ok(Statistics { mean, variance })
}

/// Statistics of a solution evaluated by plain Monte Carlo over the chaos
/// expansion; a slow cross-check used by tests.
pub fn monte_carlo_statistics(sol: &ChaosSolution, samples: usize, seed: u64) -> Statistics {
    let npts = sol.fem.elements * sol.fem.points_per_element();
    // Precompute coefficient fields at quadrature points.
    let fields: Vec<Vec<f64>> = (0..sol.set.len())
        .map(|a| {
            sol.fem
                .values_at_quad_points(&sol.coeffs.column(a).clone_owned())
        })
        .collect();
    let dims = sol
        .set
        .indices()
        .iter()
        .map(|a| a.length())
        .max()
        .unwrap_or(0) as usize;
    let mut mean = vec![0.0; npts];
    let mut second = vec![0.0; npts];
    let mut state = seed.max(1);
    let mut next_uniform = move || {
        // xorshift64*; good enough for a smoke-test sampler.
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        let bits = state.wrapping_mul(0x2545F4914F6CDD1D);
        (bits >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..samples {
        let y: Vec<f64> = (0..dims).map(|_| 2.0 * next_uniform() - 1.0).collect();
        let basis: Vec<f64> = (0..sol.set.len())
            .map(|a| chaos_value(sol.set.index(a as u32), &y))
            .collect();
        for p in 0..npts {
            let mut v = 0.0;
            for a in 0..sol.set.len() {
                v += fields[a][p] * basis[a];
            }
            mean[p] += v;
            second[p] += v * v;
        }
    }
    let n = samples as f64;
    let variance: Vec<f64> = mean
        .iter()
        .zip(&second)
        .map(|(&m, &s)| s / n - (m / n) * (m / n))
        .collect();
    for m in mean.iter_mut() {
        *m /= n;
    }
    Statistics { mean, variance }
}
