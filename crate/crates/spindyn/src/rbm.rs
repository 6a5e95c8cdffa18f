//! Complex-parameter RBM wavefunctions.
//!
//! The amplitude of a spin configuration is
//! `psi(sigma) = exp(sum_i a_i sigma_i) * prod_j 2 cosh(theta_j)` with
//! `theta_j = b_j + sum_i W_ij sigma_i`. Everything downstream works with
//! `log psi`, so amplitude ratios are overflow-free exponentials of
//! log differences.

use crate::basis::SpinConfiguration;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Full cache refresh interval for [`ChainState`], in applied flip updates.
/// Bounds floating-point drift of the incremental theta/log-amplitude cache.
const REFRESH_INTERVAL: u64 = 10_000;

/// `log(2 cosh(theta))` in an overflow-free form. The real part of `theta`
/// is factored out so the remaining exponential has modulus <= 1; the
/// principal branch is used for the residual logarithm. Branch offsets of
/// `2 pi i` cancel in every amplitude ratio `exp(dlog)`.
pub fn log_two_cosh(theta: Complex64) -> Complex64 {
    if theta.re >= 0.0 {
        theta + (1.0 + (-2.0 * theta).exp()).ln()
    } else {
        -theta + (1.0 + (2.0 * theta).exp()).ln()
    }
}

/// `tanh(theta)` for complex arguments without overflow at large `|Re theta|`.
pub fn stable_tanh(theta: Complex64) -> Complex64 {
    if theta.re >= 0.0 {
        let w = (-2.0 * theta).exp();
        (1.0 - w) / (1.0 + w)
    } else {
        let w = (2.0 * theta).exp();
        (w - 1.0) / (w + 1.0)
    }
}

/// Variational parameters of one RBM: visible biases `a` (length N),
/// hidden biases `b` (length M) and couplings `W` (N x M).
///
/// The flat parameter vector used by the optimizers is
/// `[a_0..a_{N-1}, b_0..b_{M-1}, W_00, W_01, .., W_{N-1,M-1}]`
/// (W row-major over visible index), giving `N + M + N*M` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParameters {
    n_visible: usize,
    n_hidden: usize,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    w: Vec<Complex64>, // row-major: w[i * n_hidden + j]
}

impl RbmParameters {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            a: vec![Complex64::ZERO; n_visible],
            b: vec![Complex64::ZERO; n_hidden],
            w: vec![Complex64::ZERO; n_visible * n_hidden],
        }
    }

    /// Random parameters with independent real and imaginary parts drawn
    /// from a zero-mean uniform distribution of standard deviation `scale`.
    /// Deterministic for a fixed seed.
    pub fn random(n_visible: usize, n_hidden: usize, scale: f64, seed: u64) -> Result<Self> {
        if scale < 0.0 {
            return Err(Error::InvalidConfig("init scale must be >= 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half_width = scale * 3.0f64.sqrt();
        let mut draw = |_: usize| {
            let re = (rng.gen::<f64>() - 0.5) * 2.0 * half_width;
            let im = (rng.gen::<f64>() - 0.5) * 2.0 * half_width;
            Complex64::new(re, im)
        };
        Ok(Self {
            n_visible,
            n_hidden,
            a: (0..n_visible).map(&mut draw).collect(),
            b: (0..n_hidden).map(&mut draw).collect(),
            w: (0..n_visible * n_hidden).map(&mut draw).collect(),
        })
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    /// Length of the flat parameter vector, `N + M + N*M`.
    pub fn flat_len(&self) -> usize {
        self.n_visible + self.n_hidden + self.n_visible * self.n_hidden
    }

    pub fn visible_bias(&self, i: usize) -> Complex64 {
        self.a[i]
    }

    pub fn hidden_bias(&self, j: usize) -> Complex64 {
        self.b[j]
    }

    pub fn coupling(&self, i: usize, j: usize) -> Complex64 {
        self.w[i * self.n_hidden + j]
    }

    /// Add `delta` to the visible bias at `site`. Adding `i pi / 2`
    /// multiplies every amplitude by `i sigma_site`, which is how a
    /// diagonal `S^z` sign structure is absorbed into the parameters.
    pub fn add_to_visible_bias(&mut self, site: usize, delta: Complex64) -> Result<()> {
        if site >= self.n_visible {
            return Err(Error::SiteOutOfRange {
                index: site,
                length: self.n_visible,
            });
        }
        self.a[site] += delta;
        Ok(())
    }

    pub fn flatten(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.flat_len());
        out.extend_from_slice(&self.a);
        out.extend_from_slice(&self.b);
        out.extend_from_slice(&self.w);
        out
    }

    pub fn from_flat(n_visible: usize, n_hidden: usize, flat: &[Complex64]) -> Result<Self> {
        let expected = n_visible + n_hidden + n_visible * n_hidden;
        if flat.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "flat vector has {} entries, expected {}",
                flat.len(),
                expected
            )));
        }
        Ok(Self {
            n_visible,
            n_hidden,
            a: flat[..n_visible].to_vec(),
            b: flat[n_visible..n_visible + n_hidden].to_vec(),
            w: flat[n_visible + n_hidden..].to_vec(),
        })
    }

    /// Apply a flat-ordered parameter update. Fails (leaving the
    /// parameters untouched) if any updated entry would be non-finite.
    pub fn apply_delta(&mut self, delta: &[Complex64]) -> Result<()> {
        if delta.len() != self.flat_len() {
            return Err(Error::DimensionMismatch(format!(
                "delta has {} entries, expected {}",
                delta.len(),
                self.flat_len()
            )));
        }
        if delta.iter().any(|d| !d.re.is_finite() || !d.im.is_finite()) {
            return Err(Error::NonFinite("parameter update"));
        }
        let (n, m) = (self.n_visible, self.n_hidden);
        for i in 0..n {
            self.a[i] += delta[i];
        }
        for j in 0..m {
            self.b[j] += delta[n + j];
        }
        for k in 0..n * m {
            self.w[k] += delta[n + m + k];
        }
        Ok(())
    }

    fn check_config(&self, config: &SpinConfiguration) -> Result<()> {
        if config.len() != self.n_visible {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} sites, RBM has {}",
                config.len(),
                self.n_visible
            )));
        }
        Ok(())
    }

    /// Effective hidden-unit arguments `theta_j = b_j + sum_i W_ij sigma_i`.
    pub fn theta(&self, config: &SpinConfiguration) -> Result<Vec<Complex64>> {
        self.check_config(config)?;
        let mut theta = self.b.clone();
        for i in 0..self.n_visible {
            let s = config.spin_f64(i);
            let row = &self.w[i * self.n_hidden..(i + 1) * self.n_hidden];
            for (t, &wij) in theta.iter_mut().zip(row) {
                *t += wij * s;
            }
        }
        Ok(theta)
    }

    /// `log psi(sigma) = sum_i a_i sigma_i + sum_j log(2 cosh theta_j)`.
    pub fn log_psi(&self, config: &SpinConfiguration) -> Result<Complex64> {
        let theta = self.theta(config)?;
        let bias: Complex64 = self
            .a
            .iter()
            .zip(config.spins())
            .map(|(&ai, &s)| ai * f64::from(s))
            .sum();
        Ok(bias + theta.into_iter().map(log_two_cosh).sum::<Complex64>())
    }

    /// Log-derivatives `O_i = (1/psi) d psi / d alpha_i` in flat order:
    /// `sigma_i` for the a-block, `tanh theta_j` for the b-block and
    /// `sigma_i tanh theta_j` for the W-block.
    pub fn log_derivatives(&self, config: &SpinConfiguration) -> Result<Vec<Complex64>> {
        let theta = self.theta(config)?;
        self.log_derivatives_with_theta(config, &theta)
    }

    /// Same as [`log_derivatives`](Self::log_derivatives) but reusing a
    /// precomputed theta vector (e.g. from a [`ChainState`]).
    pub fn log_derivatives_with_theta(
        &self,
        config: &SpinConfiguration,
        theta: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        self.check_config(config)?;
        let tanh: Vec<Complex64> = theta.iter().map(|&t| stable_tanh(t)).collect();
        let mut out = Vec::with_capacity(self.flat_len());
        out.extend(config.spins().iter().map(|&s| Complex64::from(f64::from(s))));
        out.extend_from_slice(&tanh);
        for i in 0..self.n_visible {
            let s = config.spin_f64(i);
            out.extend(tanh.iter().map(|&t| t * s));
        }
        Ok(out)
    }

    fn validate_flips(&self, flips: &[usize]) -> Result<()> {
        for (n, &i) in flips.iter().enumerate() {
            if i >= self.n_visible {
                return Err(Error::SiteOutOfRange {
                    index: i,
                    length: self.n_visible,
                });
            }
            if flips[..n].contains(&i) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate flip index {i}"
                )));
            }
        }
        Ok(())
    }
}

/// A spin configuration together with cached `theta_j` values and cached
/// `log psi`, kept consistent under local flip updates. The cache is fully
/// recomputed every [`REFRESH_INTERVAL`] applied flips.
#[derive(Debug, Clone)]
pub struct ChainState {
    config: SpinConfiguration,
    theta: Vec<Complex64>,
    log_amp: Complex64,
    flips_since_refresh: u64,
}

impl ChainState {
    pub fn new(params: &RbmParameters, config: SpinConfiguration) -> Result<Self> {
        let theta = params.theta(&config)?;
        let log_amp = params.log_psi(&config)?;
        Ok(Self {
            config,
            theta,
            log_amp,
            flips_since_refresh: 0,
        })
    }

    pub fn config(&self) -> &SpinConfiguration {
        &self.config
    }

    pub fn log_amp(&self) -> Complex64 {
        self.log_amp
    }

    pub fn theta(&self) -> &[Complex64] {
        &self.theta
    }

    /// `log psi(flipped sigma) - log psi(sigma)` without modifying the
    /// state. Cost `O(|flips| * M)`; rejection is free.
    pub fn delta_log_psi(&self, params: &RbmParameters, flips: &[usize]) -> Result<Complex64> {
        params.check_config(&self.config)?;
        params.validate_flips(flips)?;
        if flips.is_empty() {
            return Ok(Complex64::ZERO);
        }
        let m = params.n_hidden();
        let mut delta_theta = vec![Complex64::ZERO; m];
        let mut delta_bias = Complex64::ZERO;
        for &i in flips {
            let s = self.config.spin_f64(i);
            delta_bias -= 2.0 * s * params.a[i];
            let row = &params.w[i * m..(i + 1) * m];
            for (dt, &wij) in delta_theta.iter_mut().zip(row) {
                *dt -= 2.0 * s * wij;
            }
        }
        let mut delta = delta_bias;
        for (j, dt) in delta_theta.into_iter().enumerate() {
            let old = self.theta[j];
            delta += log_two_cosh(old + dt) - log_two_cosh(old);
        }
        Ok(delta)
    }

    /// Apply the flips in place, updating the caches incrementally:
    /// `theta_j <- theta_j - 2 sum_{i in flips} W_ij sigma_i`.
    pub fn apply_flips(&mut self, params: &RbmParameters, flips: &[usize]) -> Result<()> {
        params.check_config(&self.config)?;
        params.validate_flips(flips)?;
        if flips.is_empty() {
            return Ok(());
        }
        let delta = self.delta_log_psi(params, flips)?;
        let m = params.n_hidden();
        for &i in flips {
            let s = self.config.spin_f64(i);
            let row = &params.w[i * m..(i + 1) * m];
            for (t, &wij) in self.theta.iter_mut().zip(row) {
                *t -= 2.0 * s * wij;
            }
        }
        self.config.flip(flips);
        self.log_amp += delta;
        self.flips_since_refresh += flips.len() as u64;
        if self.flips_since_refresh >= REFRESH_INTERVAL {
            self.refresh(params)?;
        }
        Ok(())
    }

    /// The state for the flipped configuration, leaving `self` unmodified.
    pub fn flipped(&self, params: &RbmParameters, flips: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_flips(params, flips)?;
        Ok(out)
    }

    /// Recompute the caches from scratch.
    pub fn refresh(&mut self, params: &RbmParameters) -> Result<()> {
        self.theta = params.theta(&self.config)?;
        self.log_amp = params.log_psi(&self.config)?;
        self.flips_since_refresh = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::seq::SliceRandom;

    fn config(spins: &[i8]) -> SpinConfiguration {
        SpinConfiguration::new(spins.to_vec()).unwrap()
    }

    /// Brute-force amplitude: explicit sum over all 2^M hidden vectors of
    /// `exp(sum a sigma + sum b h + sum W sigma h)`.
    fn brute_force_psi(params: &RbmParameters, cfg: &SpinConfiguration) -> Complex64 {
        let n = params.n_visible();
        let m = params.n_hidden();
        let mut total = Complex64::ZERO;
        for hidden in 0..(1u32 << m) {
            let mut exponent = Complex64::ZERO;
            for i in 0..n {
                exponent += params.visible_bias(i) * cfg.spin_f64(i);
            }
            for j in 0..m {
                let h = if hidden >> j & 1 == 1 { 1.0 } else { -1.0 };
                exponent += params.hidden_bias(j) * h;
                for i in 0..n {
                    exponent += params.coupling(i, j) * cfg.spin_f64(i) * h;
                }
            }
            total += exponent.exp();
        }
        total
    }

    #[test]
    fn zero_params_give_log_four() {
        let params = RbmParameters::zeros(3, 2);
        let lp = params.log_psi(&config(&[1, -1, 1])).unwrap();
        assert_relative_eq!(lp.re, 4.0f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(lp.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn visible_bias_only() {
        let mut params = RbmParameters::zeros(1, 1);
        params.a[0] = Complex64::new(0.5, 0.0);
        let lp = params.log_psi(&config(&[1])).unwrap();
        assert_relative_eq!(lp.re, 0.5 + 2.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn matches_hidden_layer_brute_force() {
        let params = RbmParameters::random(4, 3, 0.3, 7).unwrap();
        for mask in 0..16u64 {
            let cfg = SpinConfiguration::from_mask(mask, 4);
            let expected = brute_force_psi(&params, &cfg);
            let got = params.log_psi(&cfg).unwrap().exp();
            assert_relative_eq!(got.re, expected.re, max_relative = 1e-10);
            assert_relative_eq!(got.im, expected.im, max_relative = 1e-10);
        }
    }

    #[test]
    fn brute_force_all_sector_configs_larger_chain() {
        // M <= 4, all 2^N configurations, N = 6.
        let params = RbmParameters::random(6, 4, 0.2, 13).unwrap();
        for mask in 0..64u64 {
            let cfg = SpinConfiguration::from_mask(mask, 6);
            let expected = brute_force_psi(&params, &cfg);
            let got = params.log_psi(&cfg).unwrap().exp();
            assert_relative_eq!(got.re, expected.re, max_relative = 1e-10);
            assert_relative_eq!(got.im, expected.im, max_relative = 1e-10);
        }
    }

    #[test]
    fn log_two_cosh_is_stable_at_large_argument() {
        let big = Complex64::new(500.0, 1.3);
        let v = log_two_cosh(big);
        assert!(v.re.is_finite());
        assert_relative_eq!(v.re, 500.0, max_relative = 1e-12);
        let neg = log_two_cosh(-big);
        assert_relative_eq!(v.re, neg.re, max_relative = 1e-12);
    }

    #[test]
    fn stable_tanh_matches_library_in_safe_range() {
        let t = Complex64::new(0.7, -0.4);
        let expected = t.tanh();
        let got = stable_tanh(t);
        assert_relative_eq!(got.re, expected.re, max_relative = 1e-13);
        assert_relative_eq!(got.im, expected.im, max_relative = 1e-13);
        assert_relative_eq!(stable_tanh(Complex64::new(400.0, 0.2)).re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn derivatives_at_zero_params() {
        let params = RbmParameters::zeros(3, 2);
        let cfg = config(&[1, -1, 1]);
        let o = params.log_derivatives(&cfg).unwrap();
        assert_eq!(o.len(), 3 + 2 + 6);
        for i in 0..3 {
            assert_relative_eq!(o[i].re, cfg.spin_f64(i), epsilon = 1e-15);
        }
        for v in &o[3..] {
            assert_relative_eq!(v.norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_coupling_derivative_is_tanh() {
        let mut params = RbmParameters::zeros(1, 1);
        params.w[0] = Complex64::new(0.3, 0.1);
        let o = params.log_derivatives(&config(&[1])).unwrap();
        let expected = Complex64::new(0.3, 0.1).tanh();
        assert_relative_eq!(o[2].re, expected.re, max_relative = 1e-12);
        assert_relative_eq!(o[2].im, expected.im, max_relative = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let params = RbmParameters::random(3, 2, 0.4, 3).unwrap();
        let cfg = config(&[1, -1, -1]);
        let o = params.log_derivatives(&cfg).unwrap();
        let flat = params.flatten();
        let h = 1e-5;
        for (k, &analytic) in o.iter().enumerate() {
            // Holomorphic derivative via a real step.
            let mut plus = flat.clone();
            plus[k] += h;
            let mut minus = flat.clone();
            minus[k] -= h;
            let lp = RbmParameters::from_flat(3, 2, &plus)
                .unwrap()
                .log_psi(&cfg)
                .unwrap();
            let lm = RbmParameters::from_flat(3, 2, &minus)
                .unwrap()
                .log_psi(&cfg)
                .unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (fd - analytic).norm() <= 1e-6 * analytic.norm().max(1e-6),
                "component {k}: fd {fd} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn empty_flip_is_identity() {
        let params = RbmParameters::random(4, 3, 0.2, 5).unwrap();
        let state = ChainState::new(&params, config(&[1, -1, 1, -1])).unwrap();
        let same = state.flipped(&params, &[]).unwrap();
        assert_eq!(state.config(), same.config());
        assert_eq!(state.log_amp(), same.log_amp());
    }

    #[test]
    fn double_flip_returns_to_start() {
        let params = RbmParameters::random(4, 3, 0.2, 5).unwrap();
        let state = ChainState::new(&params, config(&[1, -1, 1, -1])).unwrap();
        let back = state
            .flipped(&params, &[2])
            .unwrap()
            .flipped(&params, &[2])
            .unwrap();
        assert!((state.log_amp() - back.log_amp()).norm() < 1e-12);
        assert_eq!(state.config(), back.config());
    }

    #[test]
    fn flip_matches_fresh_recompute() {
        let params = RbmParameters::random(5, 4, 0.3, 11).unwrap();
        let state = ChainState::new(&params, config(&[1, -1, 1, -1, 1])).unwrap();
        for site in 0..5 {
            let flipped = state.flipped(&params, &[site]).unwrap();
            let fresh = params.log_psi(flipped.config()).unwrap();
            assert!((flipped.log_amp() - fresh).norm() < 1e-10);
        }
    }

    #[test]
    fn long_random_walk_stays_consistent() {
        let params = RbmParameters::random(6, 4, 0.3, 17).unwrap();
        let mut state = ChainState::new(&params, config(&[1, 1, 1, -1, -1, -1])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sites: Vec<usize> = (0..6).collect();
        for _ in 0..10_000 {
            let pick: Vec<usize> = sites.choose_multiple(&mut rng, 2).copied().collect();
            state.apply_flips(&params, &pick).unwrap();
        }
        let fresh = params.log_psi(state.config()).unwrap();
        assert!(
            (state.log_amp() - fresh).norm() < 1e-8,
            "drift {}",
            (state.log_amp() - fresh).norm()
        );
        for (j, &t) in state.theta().iter().enumerate() {
            let exact = params.theta(state.config()).unwrap()[j];
            assert!((t - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_flip_indices() {
        let params = RbmParameters::random(4, 2, 0.2, 1).unwrap();
        let state = ChainState::new(&params, config(&[1, -1, 1, -1])).unwrap();
        assert!(state.delta_log_psi(&params, &[4]).is_err());
        assert!(state.delta_log_psi(&params, &[1, 1]).is_err());
    }

    #[test]
    fn random_init_is_deterministic() {
        let p1 = RbmParameters::random(4, 8, 0.01, 42).unwrap();
        let p2 = RbmParameters::random(4, 8, 0.01, 42).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.flat_len(), 4 + 8 + 32);
        let zero = RbmParameters::random(4, 8, 0.0, 42).unwrap();
        assert!(zero.flatten().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn flat_round_trip() {
        let p = RbmParameters::random(3, 5, 0.2, 9).unwrap();
        let flat = p.flatten();
        let q = RbmParameters::from_flat(3, 5, &flat).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn source_phase_multiplies_amplitude_by_i_sigma() {
        let mut params = RbmParameters::random(4, 3, 0.2, 31).unwrap();
        let base = params.clone();
        params
            .add_to_visible_bias(1, Complex64::new(0.0, std::f64::consts::FRAC_PI_2))
            .unwrap();
        for mask in 0..16u64 {
            let cfg = SpinConfiguration::from_mask(mask, 4);
            let before = base.log_psi(&cfg).unwrap().exp();
            let after = params.log_psi(&cfg).unwrap().exp();
            let factor = Complex64::new(0.0, cfg.spin_f64(1));
            assert!((after - before * factor).norm() < 1e-10 * before.norm());
        }
    }
}
