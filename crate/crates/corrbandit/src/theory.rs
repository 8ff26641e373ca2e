//! Exact Gaussian KL divergences, the empirical divergence statistic, and
//! the minimax lower-bound quantities for the swapped-arm problem
//! transformations.

use nalgebra::{DMatrix, Matrix2};

use crate::environment::{
    build_lb_cov, lb_rho2_upper_bound, transform_problem, GapProfile,
};
use crate::error::TheoryError;

const DET_FLOOR: f64 = 1e-14;

/// KL divergence between zero-mean normals with covariances `a0` and `a1`:
/// `(tr(A1^-1 A0) - k + ln(det A1 / det A0)) / 2`.
pub fn kl_gaussian(a0: &DMatrix<f64>, a1: &DMatrix<f64>) -> Result<f64, TheoryError> {
    if a0.nrows() != a1.nrows() || a0.nrows() != a0.ncols() || a1.nrows() != a1.ncols() {
        return Err(TheoryError::DimensionMismatch { a: a0.nrows(), b: a1.nrows() });
    }
    let k = a0.nrows();
    let det0 = a0.clone().lu().determinant();
    let det1_lu = a1.clone().lu();
    let det1 = det1_lu.determinant();
    if det1.abs() < DET_FLOOR {
        return Err(TheoryError::SingularMatrix { det: det1 });
    }
    if det0.abs() < DET_FLOOR {
        return Err(TheoryError::SingularMatrix { det: det0 });
    }
    let solved = det1_lu
        .solve(a0)
        .ok_or(TheoryError::SingularMatrix { det: det1 })?;
    Ok(0.5 * (solved.trace() - k as f64 + (det1 / det0).ln()))
}

fn det2(a: &Matrix2<f64>) -> f64 {
    a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
}

fn inv2(a: &Matrix2<f64>) -> Result<Matrix2<f64>, TheoryError> {
    let d = det2(a);
    if d.abs() < DET_FLOOR {
        return Err(TheoryError::SingularMatrix { det: d });
    }
    Ok(Matrix2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / d)
}

/// Bivariate special case of [`kl_gaussian`] via the closed-form 2x2 inverse.
pub fn kl_bivariate(a0: &Matrix2<f64>, a1: &Matrix2<f64>) -> Result<f64, TheoryError> {
    let d0 = det2(a0);
    if d0.abs() < DET_FLOOR {
        return Err(TheoryError::SingularMatrix { det: d0 });
    }
    let inv1 = inv2(a1)?;
    let trace = (inv1 * a0).trace();
    Ok(0.5 * (trace - 2.0 + (det2(a1) / d0).ln()))
}

/// KL divergence between the `(i, j)` pair marginals of the lower-bound
/// instance and of its transformation that makes arm `m` optimal.
/// Indices are 0-based; `m >= 1`.
pub fn kl_pairwise(
    k: usize,
    rho: f64,
    m: usize,
    pair: (usize, usize),
) -> Result<f64, TheoryError> {
    let base = build_lb_cov(k, rho)?;
    let transformed = transform_problem(&base, m)?;
    let (i, j) = pair;
    if i >= j || j >= k {
        return Err(TheoryError::Env(crate::error::EnvError::InvalidPair { i, j }));
    }
    kl_bivariate(&base.pair_marginal(i, j), &transformed.pair_marginal(i, j))
}

/// Sample average of the log-likelihood ratio between two zero-mean
/// bivariate normals, evaluated on `samples`:
/// `(1/2t) sum [x y] (A0^-1 - A1^-1) [x y]^T + (ln det A1 - ln det A0) / 2`.
///
/// Its expectation under `a0` is `kl_bivariate(a0, a1)`.
pub fn empirical_kl(
    samples: &[(f64, f64)],
    a0: &Matrix2<f64>,
    a1: &Matrix2<f64>,
) -> Result<f64, TheoryError> {
    if samples.is_empty() {
        return Err(TheoryError::EmptySamples);
    }
    let diff = inv2(a0)? - inv2(a1)?;
    let t = samples.len() as f64;
    let mut quad = 0.0;
    for &(x, y) in samples {
        quad += diff[(0, 0)] * x * x
            + (diff[(0, 1)] + diff[(1, 0)]) * x * y
            + diff[(1, 1)] * y * y;
    }
    Ok(quad / (2.0 * t) + 0.5 * (det2(a1).ln() - det2(a0).ln()))
}

/// Constants and deviation level of the lower-bound theorem.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LowerBoundParams {
    pub k: usize,
    pub rho: f64,
    pub n: u64,
    /// Variance upper bound (1 for the unit-diagonal construction).
    pub u: f64,
    /// `1 - 1/sqrt(K-2)`, the admissible ceiling for `rho^2`.
    pub ub_rho2: f64,
    pub c1: f64,
    pub c2: f64,
    /// `max(3 c1, 48 c2)`.
    pub c_tilde: f64,
    /// Deviation level at the full horizon `n`.
    pub eps_tilde_n: f64,
    pub h_lb: f64,
    /// Set when `rho^2` exceeds `ub_rho2`; results still evaluate.
    pub rho_warning: bool,
}

impl LowerBoundParams {
    pub fn new(k: usize, rho: f64, n: u64, u: f64, h_lb: f64) -> Self {
        let ub_rho2 = lb_rho2_upper_bound(k);
        let c1 = 1.0 / (1.0 - ub_rho2);
        let c2 = rho / (1.0 - ub_rho2);
        let c_tilde = (3.0 * c1).max(48.0 * c2);
        let mut p = Self {
            k,
            rho,
            n,
            u,
            ub_rho2,
            c1,
            c2,
            c_tilde,
            eps_tilde_n: 0.0,
            h_lb,
            rho_warning: rho * rho > ub_rho2,
        };
        p.eps_tilde_n = p.eps_tilde(n);
        p
    }

    /// `eps_tilde_t = c_tilde u max((8/t) L, sqrt((8/t) L))` with
    /// `L = ln(12 K (K-1) t)`.
    pub fn eps_tilde(&self, t: u64) -> f64 {
        let t = t as f64;
        let log_term = (12.0 * self.k as f64 * (self.k as f64 - 1.0) * t).ln();
        let base = 8.0 / t * log_term;
        self.c_tilde * self.u * base.max(base.sqrt())
    }
}

/// Lower bound on the minimax probability of error:
/// `(1/6) exp(-6 n K / H_lb - binom(K,2) n eps_tilde_n)`.
pub fn lower_bound_value(
    params: &LowerBoundParams,
    gaps: &GapProfile,
) -> Result<f64, TheoryError> {
    if gaps
        .gaps
        .iter()
        .enumerate()
        .any(|(i, g)| i != gaps.best_arm && *g <= 0.0)
    {
        return Err(TheoryError::DegenerateGaps);
    }
    let k = params.k as f64;
    let n = params.n as f64;
    let pairs = k * (k - 1.0) / 2.0;
    let exponent = -6.0 * n * k / params.h_lb - pairs * n * params.eps_tilde_n;
    Ok(exponent.exp() / 6.0)
}

/// Analytic upper bound on `kl_pairwise(k, rho, m, pair)` from the
/// closed-form marginal structure, when one is available. Pairs untouched by
/// the swap, and the swapped pair itself, have divergence exactly zero.
/// Indices are 0-based.
pub fn kl_analytic_cap(rho: f64, m: usize, pair: (usize, usize)) -> Option<f64> {
    let (i, j) = pair;
    // paper-style 1-based labels make the exponent bookkeeping direct
    let (a, b, mm) = (i + 1, j + 1, m + 1);
    let denom = 1.0 - rho * rho;
    if (a, b) == (1, mm) {
        return Some(0.0);
    }
    if a != 1 && a != mm && b != 1 && b != mm {
        return Some(0.0);
    }
    if a == 1 {
        // pair (1, j), j != m
        let e = if b < mm { b - 1 } else { mm - 1 };
        return Some(rho * rho / 2.0 * (1.0 - rho.powi(2 * e as i32)) / denom);
    }
    if b == mm || a == mm {
        // pair containing m but not 1
        let other = if a == mm { b } else { a };
        let e = if other < mm { other - 1 } else { mm - 1 };
        return Some(rho * rho * (1.0 - rho.powi(e as i32)) / denom);
    }
    // pair (1-free, m-free) combinations are covered above; (j, 1) cannot
    // occur since pairs are ordered
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::gap_profile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn kl_identical_is_zero() {
        for k in 1..=4 {
            let a = DMatrix::identity(k, k);
            assert_eq!(kl_gaussian(&a, &a).unwrap(), 0.0);
        }
    }

    #[test]
    fn kl_scalar_closed_form() {
        let a0 = DMatrix::from_element(1, 1, 1.0);
        let a1 = DMatrix::from_element(1, 1, 2.0);
        let got = kl_gaussian(&a0, &a1).unwrap();
        let want = 0.5 * (0.5 - 1.0 + 2.0f64.ln());
        assert!((got - want).abs() < 1e-15);
        assert!((want - 0.096_573_5).abs() < 1e-6);
    }

    #[test]
    fn kl_scalar_random_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..100 {
            let s0: f64 = rng.gen_range(0.1..4.0);
            let s1: f64 = rng.gen_range(0.1..4.0);
            let got = kl_gaussian(
                &DMatrix::from_element(1, 1, s0),
                &DMatrix::from_element(1, 1, s1),
            )
            .unwrap();
            let want = 0.5 * (s0 / s1 - 1.0 + (s1 / s0).ln());
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_correlated_pair_closed_form() {
        let rho: f64 = 0.5;
        let a0 = Matrix2::new(1.0, rho, rho, 1.0);
        let a1 = Matrix2::new(1.0, rho * rho, rho * rho, 1.0);
        let got = kl_bivariate(&a0, &a1).unwrap();
        let want = 0.5
            * (2.0 * (1.0 - rho.powi(3)) / (1.0 - rho.powi(4)) - 2.0
                + ((1.0 - rho.powi(4)) / (1.0 - rho * rho)).ln());
        assert!((got - want).abs() < 1e-14);
        // general solver agrees with the closed 2x2 form
        let g = kl_gaussian(
            &DMatrix::from_row_slice(2, 2, a0.as_slice()),
            &DMatrix::from_row_slice(2, 2, a1.as_slice()),
        )
        .unwrap();
        assert!((got - g).abs() < 1e-13);
    }

    #[test]
    fn kl_nonnegative_zero_iff_equal() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..500 {
            let (a0, a1) = (random_pd2(&mut rng), random_pd2(&mut rng));
            let kl = kl_bivariate(&a0, &a1).unwrap();
            assert!(kl >= -1e-12);
            if a0 != a1 {
                assert!(kl > 0.0);
            }
            assert!(kl_bivariate(&a0, &a0).unwrap().abs() < 1e-12);
        }
    }

    fn random_pd2(rng: &mut ChaCha12Rng) -> Matrix2<f64> {
        let s1: f64 = rng.gen_range(0.2..2.0);
        let s2: f64 = rng.gen_range(0.2..2.0);
        let rho: f64 = rng.gen_range(-0.95..0.95);
        Matrix2::new(s1 * s1, rho * s1 * s2, rho * s1 * s2, s2 * s2)
    }

    #[test]
    fn singular_target_rejected() {
        let a0 = Matrix2::new(1.0, 0.0, 0.0, 1.0);
        let a1 = Matrix2::new(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            kl_bivariate(&a0, &a1),
            Err(TheoryError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a0 = DMatrix::identity(2, 2);
        let a1 = DMatrix::identity(3, 3);
        assert!(matches!(
            kl_gaussian(&a0, &a1),
            Err(TheoryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn swapped_pair_marginal_has_zero_divergence() {
        for k in [5usize, 10, 20] {
            let rho = (lb_rho2_upper_bound(k)).sqrt() * 0.999;
            for m in 1..k {
                // the swapped pair's marginal is [[1, rho], [rho, 1]] on
                // both sides, for every transformation
                let kl = kl_pairwise(k, rho, m, (0, m)).unwrap();
                assert!(kl.abs() < 1e-12, "k={k} m={m}: {kl}");
            }
        }
    }

    #[test]
    fn untouched_pairs_have_zero_divergence() {
        let (k, rho, m) = (6, 0.5, 2);
        for i in 1..k {
            for j in (i + 1)..k {
                if i != m && j != m {
                    let kl = kl_pairwise(k, rho, m, (i, j)).unwrap();
                    assert!(kl.abs() < 1e-13, "pair ({i},{j}): {kl}");
                }
            }
        }
    }

    #[test]
    fn analytic_caps_dominate_exact_kl() {
        for k in [5usize, 8, 12] {
            let rho = lb_rho2_upper_bound(k).sqrt();
            for m in 1..k {
                for i in 0..k {
                    for j in (i + 1)..k {
                        let exact = kl_pairwise(k, rho, m, (i, j)).unwrap();
                        if let Some(cap) = kl_analytic_cap(rho, m, (i, j)) {
                            assert!(
                                exact <= cap + 1e-12,
                                "k={k} m={m} pair=({i},{j}): {exact} > {cap}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kl_bounded_by_transformed_gap() {
        // kl^m_{1j}, kl^m_{mj} <= gap of arm m at the admissible rho
        for k in [5usize, 10, 20] {
            let rho = lb_rho2_upper_bound(k).sqrt();
            let model = build_lb_cov(k, rho).unwrap();
            let profile = gap_profile(&model).unwrap();
            for m in 1..k {
                let delta_m = profile.gaps[m];
                for i in 0..k {
                    for j in (i + 1)..k {
                        let kl = kl_pairwise(k, rho, m, (i, j)).unwrap();
                        assert!(
                            kl <= delta_m + 1e-12,
                            "k={k} m={m} pair=({i},{j}): kl={kl} > gap={delta_m}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn empirical_kl_zero_when_matrices_equal() {
        let a = Matrix2::new(1.0, 0.3, 0.3, 1.0);
        let samples = vec![(0.4, -1.2), (2.0, 0.1), (-0.7, 0.9)];
        assert_eq!(empirical_kl(&samples, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn empirical_kl_empty_rejected() {
        let a = Matrix2::identity();
        assert!(matches!(
            empirical_kl(&[], &a, &a),
            Err(TheoryError::EmptySamples)
        ));
    }

    #[test]
    fn lower_bound_monotone_and_capped() {
        let k = 10;
        let rho = lb_rho2_upper_bound(k).sqrt();
        let model = build_lb_cov(k, rho).unwrap();
        let profile = gap_profile(&model).unwrap();
        let h_lb = crate::environment::complexity_summary(&profile, 1.0).h_lb;
        let mut prev = 1.0;
        for n in [10u64, 100, 1000, 10_000] {
            let p = LowerBoundParams::new(k, rho, n, 1.0, h_lb);
            let v = lower_bound_value(&p, &profile).unwrap();
            // eps_tilde is in the hundreds here, so the exponent is around
            // -1e5 and the value underflows to 0; only the range and the
            // monotone direction are checkable in f64
            assert!(v >= 0.0 && v <= 1.0 / 6.0);
            assert!(v <= prev);
            prev = v;
        }
    }
}
