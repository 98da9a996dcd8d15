//! Coefficient kernels of the orthonormal Legendre and Hermite families:
//! squared 3jm symbols, triple-product and inversion coefficients, product
//! linearization, polynomial evaluation, and the banded univariate moment
//! matrices `K^k` with entries `int y^k phi_l phi_m rho dy`.
//!
//! All factorial ratios are evaluated as sums of logarithms; naive factorial
//! products overflow f64 well inside the useful argument range.

use crate::{Error, Result};

/// Orthonormal polynomial family together with its probability measure:
/// Legendre with density 1/2 on [-1,1], probabilists' Hermite with the
/// standard Gaussian density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Legendre,
    Hermite,
}

const LN_FAC_LEN: usize = 171;

/// ln(n!) for n < 171, built from the exactly accumulated f64 factorial.
fn ln_factorial_table() -> [f64; LN_FAC_LEN] {
    let mut table = [0.0f64; LN_FAC_LEN];
    let mut fac = 1.0f64;
    for n in 1..LN_FAC_LEN {
        fac *= n as f64;
        table[n] = fac.ln();
    }
    table
}

fn ln_fac(n: u32) -> f64 {
    thread_local! {
        static TABLE: [f64; LN_FAC_LEN] = ln_factorial_table();
    }
    assert!(
        (n as usize) < LN_FAC_LEN,
        "factorial argument {} out of range",
        n
    );
    TABLE.with(|t| t[n as usize])
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    ln_fac(n) - ln_fac(k) - ln_fac(n - k)
}

/// ln(n!!) with the convention (-1)!! = 1; `n` is passed as `i64` because the
/// inversion formulas reach n = -1.
fn ln_double_factorial(n: i64) -> f64 {
    assert!(n >= -1);
    let mut acc = 0.0;
    let mut i = n;
    while i > 1 {
        acc += (i as f64).ln();
        i -= 2;
    }
    acc
}

/// Squared 3jm symbol with zero magnetic quantum numbers. Zero unless
/// `k+l+m` is even and the triangle condition `|k-l| <= m <= k+l` holds.
/// Arguments are sorted internally, so permutation invariance is exact.
pub fn wigner3jm_sq(k: u32, l: u32, m: u32) -> f64 {
    if (k + l + m) % 2 != 0 || m + k < l || m + l < k || m > k + l {
        return 0.0;
    }
    let (k, l, m) = sort3(k, l, m);
    let g = (k + l + m) / 2;
    let ln = ln_fac(2 * (g - k)) + ln_fac(2 * (g - l)) + ln_fac(2 * (g - m)) - ln_fac(2 * g + 1)
        + 2.0 * (ln_fac(g) - ln_fac(g - k) - ln_fac(g - l) - ln_fac(g - m));
    ln.exp()
}

fn sort3(a: u32, b: u32, c: u32) -> (u32, u32, u32) {
    let mut v = [a, b, c];
    v.sort_unstable();
    (v[0], v[1], v[2])
}

/// Triple product integral `int phi_k phi_l phi_m rho dy` of the orthonormal
/// family. Symmetric in all three arguments; vanishes outside the parity and
/// triangle selection rules.
pub fn triple_coefficient(family: Family, k: u32, l: u32, m: u32) -> f64 {
    if (k + l + m) % 2 != 0 || m + k < l || m + l < k || m > k + l {
        return 0.0;
    }
    let (k, l, m) = sort3(k, l, m);
    if k == 0 {
        // Selection rules leave only the orthonormality integral.
        return if l == m { 1.0 } else { 0.0 };
    }
    match family {
        Family::Legendre => {
            let scale = ((2 * k + 1) as f64 * (2 * l + 1) as f64 * (2 * m + 1) as f64).sqrt();
            scale * wigner3jm_sq(k, l, m)
        }
        Family::Hermite => {
            let g = (k + l + m) / 2;
            let ln = ln_binomial(k, g - m) + ln_binomial(l, g - m) + ln_binomial(m, g - k);
            (0.5 * ln).exp()
        }
    }
}

/// Coefficients of `y^k = sum_n c_n phi_n(y)`; entry `n` vanishes when `k-n`
/// is odd.
pub fn inversion_coefficients(family: Family, k: u32) -> Vec<f64> {
    let mut coeffs = vec![0.0; k as usize + 1];
    for n in (k % 2..=k).step_by(2) {
        let ln = match family {
            Family::Legendre => {
                ln_binomial(k, n)
                    + ln_fac(n)
                    + 0.5 * ((2 * n + 1) as f64).ln()
                    + ln_double_factorial(k as i64 - n as i64 - 1)
                    - ln_double_factorial(k as i64 + n as i64 + 1)
            }
            Family::Hermite => {
                ln_binomial(k, n)
                    + 0.5 * ln_fac(n)
                    + ln_double_factorial(k as i64 - n as i64 - 1)
            }
        };
        coeffs[n as usize] = ln.exp();
    }
    coeffs
}

/// Expands the product `phi_k phi_l` in the family:
/// returns the nonzero `(m, c_m)` with `phi_k phi_l = sum c_m phi_m`.
pub fn linearize_product(family: Family, k: u32, l: u32) -> Vec<(u32, f64)> {
    let lo = k.abs_diff(l);
    let hi = k + l;
    (lo..=hi)
        .step_by(2)
        .map(|m| (m, triple_coefficient(family, k, l, m)))
        .collect()
}

/// Value of the orthonormal polynomial `phi_n` by three-term recurrence.
pub fn eval_poly(family: Family, n: u32, y: f64) -> f64 {
    match family {
        Family::Legendre => {
            // L_0 = 1, L_1 = sqrt(3) y,
            // y L_n = a_n L_{n+1} + a_{n-1} L_{n-1}, a_n = (n+1)/sqrt((2n+1)(2n+3)).
            if n == 0 {
                return 1.0;
            }
            let mut prev = 1.0;
            let mut cur = 3.0f64.sqrt() * y;
            for i in 1..n {
                let i = i as f64;
                let a_i = (i + 1.0) / ((2.0 * i + 1.0) * (2.0 * i + 3.0)).sqrt();
                let a_im1 = i / ((2.0 * i - 1.0) * (2.0 * i + 1.0)).sqrt();
                let next = (y * cur - a_im1 * prev) / a_i;
                prev = cur;
                cur = next;
            }
            cur
        }
        Family::Hermite => {
            // H_0 = 1, H_1 = y, y H_n = sqrt(n+1) H_{n+1} + sqrt(n) H_{n-1}.
            if n == 0 {
                return 1.0;
            }
            let mut prev = 1.0;
            let mut cur = y;
            for i in 1..n {
                let i = i as f64;
                let next = (y * cur - i.sqrt() * prev) / (i + 1.0).sqrt();
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Symmetric `(2k+1)`-diagonal univariate moment matrix with entries
/// `K[l][m] = int y^k phi_l phi_m rho dy` (0-based degree indices).
///
/// Within the band, the diagonal at offset `d` vanishes unless `d` and `k`
/// have the same parity.
#[derive(Clone, Debug)]
pub struct KMatrix {
    pub family: Family,
    pub k: u32,
    dim: usize,
    /// `bands[d][i]` is the entry `(i, i+d)`, `d = 0..=k`.
    bands: Vec<Vec<f64>>,
}

impl KMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(l, m)` with 0-based degree indices; zero outside the band.
    pub fn entry(&self, l: usize, m: usize) -> f64 {
        let (lo, hi) = if l <= m { (l, m) } else { (m, l) };
        let d = hi - lo;
        if d > self.k as usize {
            return 0.0;
        }
        self.bands[d][lo]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|l| (0..self.dim).map(|m| self.entry(l, m)).collect())
            .collect()
    }
}

/// Builds `K^k` of dimension `dim` via the inversion and triple-product
/// coefficients: entry `(l,m) = sum_n c_n T(l,m,n)` over the admissible `n`.
pub fn build_k_matrix(family: Family, k: u32, dim: usize) -> Result<KMatrix> {
    if dim == 0 {
        return Err(Error::Dimension("k-matrix dimension must be positive".into()));
    }
    let inv = inversion_coefficients(family, k);
    let mut bands = Vec::with_capacity(k as usize + 1);
    for d in 0..=k as usize {
        let mut band = vec![0.0; dim.saturating_sub(d)];
        if d % 2 == (k as usize) % 2 {
            for (i, slot) in band.iter_mut().enumerate() {
                let l = i as u32;
                let m = (i + d) as u32;
                let mut acc = 0.0;
                for n in ((d as u32)..=k).step_by(2) {
                    // n runs over k-n even intersected with the triangle rule
                    // n >= |l-m| = d; parity of d and k matches on this band.
                    acc += inv[n as usize] * triple_coefficient(family, l, m, n);
                }
                *slot = acc;
            }
        }
        bands.push(band);
    }
    Ok(KMatrix {
        family,
        k,
        dim,
        bands,
    })
}

/// Closed form of the superdiagonal of `K^1`: entry `(l, l+1)` in 0-based
/// degree indices.
pub fn k1_superdiagonal(family: Family, l: usize) -> f64 {
    let l1 = (l + 1) as f64;
    match family {
        Family::Legendre => l1 / ((2.0 * l1 - 1.0) * (2.0 * l1 + 1.0)).sqrt(),
        Family::Hermite => l1.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_rule;

    #[test]
    fn wigner_base_cases() {
        assert_eq!(wigner3jm_sq(0, 0, 0), 1.0);
        assert!((wigner3jm_sq(1, 1, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(wigner3jm_sq(1, 0, 0), 0.0); // odd sum
        assert_eq!(wigner3jm_sq(1, 1, 3), 0.0); // triangle violated
    }

    #[test]
    fn wigner_permutation_invariance() {
        for k in 0..=12u32 {
            for l in 0..=12u32 {
                for m in 0..=12u32 {
                    let v = wigner3jm_sq(k, l, m);
                    for (a, b, c) in [
                        (k, m, l),
                        (l, k, m),
                        (l, m, k),
                        (m, k, l),
                        (m, l, k),
                    ] {
                        assert_eq!(v, wigner3jm_sq(a, b, c), "({},{},{})", k, l, m);
                    }
                }
            }
        }
    }

    /// Exact rational evaluation of the squared 3jm symbol.
    fn wigner_exact(k: u32, l: u32, m: u32) -> f64 {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::{One, ToPrimitive, Zero};
        if (k + l + m) % 2 != 0 || m + k < l || m + l < k || m > k + l {
            return 0.0;
        }
        let g = (k + l + m) / 2;
        let fac = |n: u32| -> BigInt {
            let mut acc = BigInt::one();
            for i in 2..=n as u64 {
                acc *= i;
            }
            acc
        };
        let num = fac(2 * (g - k)) * fac(2 * (g - l)) * fac(2 * (g - m)) * fac(g).pow(2);
        let den = fac(2 * g + 1) * (fac(g - k) * fac(g - l) * fac(g - m)).pow(2);
        let r = BigRational::new(num, den);
        assert!(!r.is_zero());
        r.to_f64().unwrap()
    }

    #[test]
    fn wigner_matches_exact_rational_oracle() {
        for k in 0..=12u32 {
            for l in 0..=12u32 {
                for m in (k.abs_diff(l)..=(k + l).min(12)).step_by(2) {
                    if (k + l + m) % 2 != 0 {
                        continue;
                    }
                    let exact = wigner_exact(k, l, m);
                    let got = wigner3jm_sq(k, l, m);
                    assert!(
                        (got - exact).abs() <= 1e-13 * exact.abs().max(1e-300),
                        "({},{},{}): {} vs {}",
                        k,
                        l,
                        m,
                        got,
                        exact
                    );
                }
            }
        }
    }

    #[test]
    fn triple_coefficient_examples() {
        assert!((triple_coefficient(Family::Legendre, 1, 1, 0) - 1.0).abs() < 1e-14);
        assert!(
            (triple_coefficient(Family::Hermite, 1, 1, 2) - 2.0f64.sqrt()).abs() < 1e-14
        );
    }

    #[test]
    fn triple_coefficient_matches_quadrature() {
        for family in [Family::Legendre, Family::Hermite] {
            let rule = gauss_rule(family, 18);
            for k in 0..=10u32 {
                for l in 0..=10u32 {
                    for m in 0..=10u32 {
                        let oracle = rule.integrate(|y| {
                            eval_poly(family, k, y) * eval_poly(family, l, y) * eval_poly(family, m, y)
                        });
                        let got = triple_coefficient(family, k, l, m);
                        let scale = oracle.abs().max(1.0);
                        assert!(
                            (got - oracle).abs() < 1e-11 * scale,
                            "{:?} ({},{},{}): {} vs {}",
                            family,
                            k,
                            l,
                            m,
                            got,
                            oracle
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn inversion_examples() {
        let l1 = inversion_coefficients(Family::Legendre, 1);
        assert_eq!(l1[0], 0.0);
        assert!((l1[1] - 1.0 / 3.0f64.sqrt()).abs() < 1e-15);

        let l2 = inversion_coefficients(Family::Legendre, 2);
        assert!((l2[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(l2[1], 0.0);
        assert!((l2[2] - 2.0 * 5.0f64.sqrt() / 15.0).abs() < 1e-15);

        let h2 = inversion_coefficients(Family::Hermite, 2);
        assert!((h2[0] - 1.0).abs() < 1e-15);
        assert_eq!(h2[1], 0.0);
        assert!((h2[2] - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inversion_identity_pointwise() {
        for family in [Family::Legendre, Family::Hermite] {
            for k in 0..=10u32 {
                let coeffs = inversion_coefficients(family, k);
                for i in 0..100 {
                    let y = match family {
                        Family::Legendre => -1.0 + 2.0 * (i as f64 + 0.5) / 100.0,
                        Family::Hermite => -3.0 + 6.0 * (i as f64 + 0.5) / 100.0,
                    };
                    let series: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(n, &c)| c * eval_poly(family, n as u32, y))
                        .sum();
                    let scale = y.abs().powi(k as i32).max(1.0);
                    assert!(
                        (series - y.powi(k as i32)).abs() < 1e-10 * scale,
                        "{:?} k={} y={}: {} vs {}",
                        family,
                        k,
                        y,
                        series,
                        y.powi(k as i32)
                    );
                }
            }
        }
    }

    #[test]
    fn linearization_base_cases() {
        for family in [Family::Legendre, Family::Hermite] {
            for n in 0..=6u32 {
                let terms = linearize_product(family, 0, n);
                assert_eq!(terms, vec![(n, 1.0)]);
            }
        }
        let terms = linearize_product(Family::Legendre, 1, 1);
        assert_eq!(terms.len(), 2);
        assert!((terms[0].1 - 1.0).abs() < 1e-14);
        assert!((terms[1].1 - 2.0 / 5.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn linearization_pointwise_identity() {
        for family in [Family::Legendre, Family::Hermite] {
            for k in 0..=8u32 {
                for l in 0..=8u32 {
                    let terms = linearize_product(family, k, l);
                    for i in 0..100 {
                        let y = match family {
                            Family::Legendre => -1.0 + 2.0 * (i as f64 + 0.5) / 100.0,
                            Family::Hermite => -2.5 + 5.0 * (i as f64 + 0.5) / 100.0,
                        };
                        let product = eval_poly(family, k, y) * eval_poly(family, l, y);
                        let series: f64 = terms
                            .iter()
                            .map(|&(m, c)| c * eval_poly(family, m, y))
                            .sum();
                        assert!(
                            (product - series).abs() < 1e-10 * product.abs().max(1.0),
                            "{:?} ({},{}) y={}",
                            family,
                            k,
                            l,
                            y
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn eval_poly_base_cases() {
        for family in [Family::Legendre, Family::Hermite] {
            for y in [-0.9, 0.0, 0.3, 1.0] {
                assert_eq!(eval_poly(family, 0, y), 1.0);
            }
        }
        assert!((eval_poly(Family::Legendre, 1, 0.5) - 3.0f64.sqrt() * 0.5).abs() < 1e-15);
        assert!((eval_poly(Family::Hermite, 1, 0.7) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn orthonormality_by_quadrature() {
        for family in [Family::Legendre, Family::Hermite] {
            let rule = gauss_rule(family, 20);
            for i in 0..=15u32 {
                for j in 0..=15u32 {
                    let val = rule
                        .integrate(|y| eval_poly(family, i, y) * eval_poly(family, j, y));
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (val - expected).abs() < 1e-12,
                        "{:?} ({},{}): {}",
                        family,
                        i,
                        j,
                        val
                    );
                }
            }
        }
    }

    #[test]
    fn k_matrix_band_parity_and_quadrature() {
        for family in [Family::Legendre, Family::Hermite] {
            for k in 0..=6u32 {
                let dim = 26;
                let km = build_k_matrix(family, k, dim).unwrap();
                let rule = gauss_rule(family, 40);
                // Quadrature resolves entries to roundoff on the scale of the
                // matrix; Hermite entries grow into the hundreds here.
                let scale = (0..dim)
                    .flat_map(|l| (0..dim).map(move |m| (l, m)))
                    .map(|(l, m)| km.entry(l, m).abs())
                    .fold(1.0f64, f64::max);
                for l in 0..dim {
                    for m in 0..dim {
                        let entry = km.entry(l, m);
                        assert_eq!(entry, km.entry(m, l));
                        if l.abs_diff(m) > k as usize {
                            assert_eq!(entry, 0.0, "band {:?} k={} ({},{})", family, k, l, m);
                        }
                        if (l + m + k as usize) % 2 == 1 {
                            assert_eq!(entry, 0.0, "parity {:?} k={} ({},{})", family, k, l, m);
                        }
                        let oracle = rule.integrate(|y| {
                            y.powi(k as i32)
                                * eval_poly(family, l as u32, y)
                                * eval_poly(family, m as u32, y)
                        });
                        assert!(
                            (entry - oracle).abs() < 1e-11 * scale,
                            "{:?} k={} ({},{}): {} vs {}",
                            family,
                            k,
                            l,
                            m,
                            entry,
                            oracle
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn k0_is_identity() {
        for family in [Family::Legendre, Family::Hermite] {
            let km = build_k_matrix(family, 0, 10).unwrap();
            for l in 0..10 {
                for m in 0..10 {
                    let expected = if l == m { 1.0 } else { 0.0 };
                    assert!((km.entry(l, m) - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn k1_closed_forms() {
        let kl = build_k_matrix(Family::Legendre, 1, 30).unwrap();
        let kh = build_k_matrix(Family::Hermite, 1, 30).unwrap();
        assert!((kl.entry(0, 1) - 1.0 / 3.0f64.sqrt()).abs() < 1e-15);
        assert!((kh.entry(0, 1) - 1.0).abs() < 1e-15);
        for l in 0..29 {
            let cl = k1_superdiagonal(Family::Legendre, l);
            let ch = k1_superdiagonal(Family::Hermite, l);
            assert!((kl.entry(l, l + 1) - cl).abs() <= 2e-13 * cl.abs());
            assert!((kh.entry(l, l + 1) - ch).abs() <= 2e-13 * ch.abs());
        }
    }

    #[test]
    fn k2_legendre_corner() {
        // Second moment of the uniform density: int y^2 / 2 dy = 1/3.
        let km = build_k_matrix(Family::Legendre, 2, 5).unwrap();
        assert!((km.entry(0, 0) - 1.0 / 3.0).abs() < 1e-14);
    }
}
