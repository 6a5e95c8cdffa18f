//! Sz-conserving Metropolis sampling of `|Phi(sigma)|^2` for arbitrary
//! amplitude providers, plus the exact-enumeration twin used at small sizes.
//!
//! Chains are independent and deterministic: chain `c` draws from a
//! counter-based RNG stream `(seed, c)`, and results are merged in chain
//! order, so a run is reproducible regardless of how chains are scheduled.

use crate::basis::{SectorBasis, SpinConfiguration};
use crate::model::ModelSpec;
use crate::rbm::{ChainState, RbmParameters};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Fraction of rejected estimator evaluations that aborts a run.
const REJECTION_LIMIT: f64 = 1e-3;

/// Sampling schedule for one estimator pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerPlan {
    pub length: usize,
    pub n_chains: usize,
    pub n_samples_per_chain: usize,
    /// Proposal steps between kept samples.
    pub thinning: usize,
    /// Proposal steps discarded at the start of each chain.
    pub burn_in: usize,
    pub seed: u64,
    /// `2 S^z_tot` of the sampled sector.
    pub sector: i32,
}

impl SamplerPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains < 1 {
            return Err(Error::InvalidConfig("need at least one chain".into()));
        }
        if self.thinning < 1 {
            return Err(Error::InvalidConfig("thinning must be >= 1".into()));
        }
        if self.n_samples_per_chain < 1 {
            return Err(Error::InvalidConfig(
                "need at least one sample per chain".into(),
            ));
        }
        let l = self.length as i64;
        let t = i64::from(self.sector);
        if (l + t) % 2 != 0 || t.abs() > l {
            return Err(Error::InvalidConfig(format!(
                "sector 2*Sz = {} impossible for length {}",
                self.sector, self.length
            )));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.n_chains * self.n_samples_per_chain
    }
}

/// An amplitude provider `Phi(sigma)` sampled as `|Phi|^2`, exposing
/// cached incremental updates under spin flips.
pub trait Amplitude: Sync {
    type State: Clone + Send;

    fn init_state(&self, config: SpinConfiguration) -> Result<Self::State>;
    fn config<'a>(&self, state: &'a Self::State) -> &'a SpinConfiguration;
    fn log_amp(&self, state: &Self::State) -> Complex64;
    /// `log Phi(flipped) - log Phi(current)`, without modifying the state.
    fn delta_log_amp(&self, state: &Self::State, flips: &[usize]) -> Result<Complex64>;
    fn apply_flips(&self, state: &mut Self::State, flips: &[usize]) -> Result<()>;
}

/// RBM wavefunction amplitudes.
pub struct RbmAmplitude<'a> {
    pub params: &'a RbmParameters,
}

impl Amplitude for RbmAmplitude<'_> {
    type State = ChainState;

    fn init_state(&self, config: SpinConfiguration) -> Result<ChainState> {
        ChainState::new(self.params, config)
    }

    fn config<'b>(&self, state: &'b ChainState) -> &'b SpinConfiguration {
        state.config()
    }

    fn log_amp(&self, state: &ChainState) -> Complex64 {
        state.log_amp()
    }

    fn delta_log_amp(&self, state: &ChainState, flips: &[usize]) -> Result<Complex64> {
        state.delta_log_psi(self.params, flips)
    }

    fn apply_flips(&self, state: &mut ChainState, flips: &[usize]) -> Result<()> {
        state.apply_flips(self.params, flips)
    }
}

/// Amplitudes of `(z - H)|chi>` for an RBM `chi`; the `P_1` distribution
/// of the correction-vector solver.
pub struct QRbmAmplitude<'a> {
    pub model: &'a ModelSpec,
    pub z: Complex64,
    pub chi: &'a RbmParameters,
}

/// Chain state for [`QRbmAmplitude`]: the RBM cache plus the cached local
/// ratio `q(sigma) = <sigma|Q|chi> / chi(sigma) = z - E_loc(sigma)`.
#[derive(Debug, Clone)]
pub struct QState {
    pub chain: ChainState,
    pub q_ratio: Complex64,
}

/// Symmetric difference of two small flip sets: sites flipped twice cancel.
fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(a.len() + b.len());
    for &x in a.iter().chain(b) {
        if let Some(pos) = out.iter().position(|&y| y == x) {
            out.swap_remove(pos);
        } else {
            out.push(x);
        }
    }
    out
}

impl QRbmAmplitude<'_> {
    fn q_ratio(&self, chain: &ChainState) -> Result<Complex64> {
        self.model.local_q_ratio(self.z, self.chi, chain)
    }

    /// `q` at a configuration reached by `flips` from the cached state,
    /// evaluated with ratios anchored at the cached configuration.
    fn q_ratio_at(&self, state: &QState, flips: &[usize]) -> Result<Complex64> {
        if flips.is_empty() {
            return Ok(state.q_ratio);
        }
        let target = state.chain.config().flipped(flips);
        let to_target = state.chain.delta_log_psi(self.chi, flips)?;
        let (diagonal, exchanges) = self.model.row_flips(&target);
        let mut e_loc = Complex64::from(diagonal);
        for (pair, element) in exchanges {
            let combo = symmetric_difference(flips, &pair);
            let to_partner = state.chain.delta_log_psi(self.chi, &combo)?;
            e_loc += element * (to_partner - to_target).exp();
        }
        Ok(self.z - e_loc)
    }
}

impl Amplitude for QRbmAmplitude<'_> {
    type State = QState;

    fn init_state(&self, config: SpinConfiguration) -> Result<QState> {
        let chain = ChainState::new(self.chi, config)?;
        let q_ratio = self.q_ratio(&chain)?;
        Ok(QState { chain, q_ratio })
    }

    fn config<'b>(&self, state: &'b QState) -> &'b SpinConfiguration {
        state.chain.config()
    }

    fn log_amp(&self, state: &QState) -> Complex64 {
        state.chain.log_amp() + state.q_ratio.ln()
    }

    fn delta_log_amp(&self, state: &QState, flips: &[usize]) -> Result<Complex64> {
        let d_chi = state.chain.delta_log_psi(self.chi, flips)?;
        let q_new = self.q_ratio_at(state, flips)?;
        Ok(d_chi + q_new.ln() - state.q_ratio.ln())
    }

    fn apply_flips(&self, state: &mut QState, flips: &[usize]) -> Result<()> {
        state.chain.apply_flips(self.chi, flips)?;
        state.q_ratio = self.q_ratio(&state.chain)?;
        Ok(())
    }
}

/// Table-backed amplitudes over a sector basis; used to inject exact
/// wavefunctions into the sampling machinery.
pub struct TableAmplitude<'a> {
    basis: &'a SectorBasis,
    log_values: Vec<Complex64>,
}

impl<'a> TableAmplitude<'a> {
    pub fn from_amplitudes(basis: &'a SectorBasis, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != basis.size() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a basis of {} states",
                amplitudes.len(),
                basis.size()
            )));
        }
        Ok(Self {
            basis,
            log_values: amplitudes.iter().map(|a| a.ln()).collect(),
        })
    }

    fn index(&self, config: &SpinConfiguration) -> Result<usize> {
        self.basis
            .index_of(config)
            .ok_or_else(|| Error::InvalidConfig("configuration outside the table sector".into()))
    }
}

impl Amplitude for TableAmplitude<'_> {
    type State = (SpinConfiguration, usize);

    fn init_state(&self, config: SpinConfiguration) -> Result<Self::State> {
        let idx = self.index(&config)?;
        Ok((config, idx))
    }

    fn config<'b>(&self, state: &'b Self::State) -> &'b SpinConfiguration {
        &state.0
    }

    fn log_amp(&self, state: &Self::State) -> Complex64 {
        self.log_values[state.1]
    }

    fn delta_log_amp(&self, state: &Self::State, flips: &[usize]) -> Result<Complex64> {
        let idx = self.index(&state.0.flipped(flips))?;
        Ok(self.log_values[idx] - self.log_values[state.1])
    }

    fn apply_flips(&self, state: &mut Self::State, flips: &[usize]) -> Result<()> {
        state.0.flip(flips);
        state.1 = self.index(&state.0)?;
        Ok(())
    }
}

/// Propose exchanging one uniformly chosen antiparallel pair (an up site
/// and a down site, not necessarily neighbors). Returns `None` for a
/// fully polarized configuration; `S^z_tot` is always preserved.
pub fn propose_exchange<R: Rng>(config: &SpinConfiguration, rng: &mut R) -> Option<[usize; 2]> {
    let (up, down) = config.partition_sites();
    if up.is_empty() || down.is_empty() {
        return None;
    }
    let i = up[rng.gen_range(0..up.len())];
    let k = down[rng.gen_range(0..down.len())];
    Some([i, k])
}

/// One Metropolis step: accept the exchange with probability
/// `min(1, |Phi(sigma')|^2 / |Phi(sigma)|^2) = min(1, exp(2 Re dlog Phi))`.
/// Returns whether the move was accepted.
pub fn metropolis_step<A: Amplitude, R: Rng>(
    amp: &A,
    state: &mut A::State,
    rng: &mut R,
) -> Result<bool> {
    let Some(pair) = propose_exchange(amp.config(state), rng) else {
        return Ok(false);
    };
    let delta = amp.delta_log_amp(state, &pair)?;
    let weight = (2.0 * delta.re).exp().min(1.0);
    if rng.gen::<f64>() < weight {
        amp.apply_flips(state, &pair)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Estimator outcome for one kept configuration.
pub enum Sampled {
    Keep(Vec<Complex64>),
    /// Drop this configuration and count it in the diagnostics tally.
    Discard,
}

/// A batch of per-sample estimator values with optional exact weights.
/// Monte Carlo batches are uniformly weighted; enumeration batches carry
/// the normalized `|Phi|^2` weights.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    n_values: usize,
    values: Vec<Complex64>,
    weights: Option<Vec<f64>>,
    kept: usize,
    discarded: usize,
}

impl SampleBatch {
    pub fn n_values(&self) -> usize {
        self.n_values
    }

    pub fn kept(&self) -> usize {
        self.kept
    }

    pub fn discarded(&self) -> usize {
        self.discarded
    }

    /// Build directly from rows; mainly for tests with synthetic samples.
    pub fn from_rows(rows: Vec<Vec<Complex64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let kept = rows.len();
        let n_values = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_values) {
            return Err(Error::DimensionMismatch("ragged sample rows".into()));
        }
        if let Some(w) = &weights {
            if w.len() != kept {
                return Err(Error::DimensionMismatch("weights/rows mismatch".into()));
            }
        }
        let values = rows.into_iter().flatten().collect();
        Ok(Self {
            n_values,
            values,
            weights: weights.map(normalize_weights),
            kept,
            discarded: 0,
        })
    }

    pub fn row(&self, s: usize) -> &[Complex64] {
        &self.values[s * self.n_values..(s + 1) * self.n_values]
    }

    pub fn weight(&self, s: usize) -> f64 {
        match &self.weights {
            Some(w) => w[s],
            None => 1.0 / self.kept as f64,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[Complex64], f64)> + '_ {
        (0..self.kept).map(move |s| (self.row(s), self.weight(s)))
    }

    /// Weighted mean of one column.
    pub fn mean(&self, col: usize) -> Complex64 {
        self.rows().map(|(row, w)| row[col] * w).sum()
    }

    /// Weighted means of a column range.
    pub fn column_means(&self, range: std::ops::Range<usize>) -> Vec<Complex64> {
        let mut out = vec![Complex64::ZERO; range.len()];
        for (row, w) in self.rows() {
            for (o, &v) in out.iter_mut().zip(&row[range.clone()]) {
                *o += v * w;
            }
        }
        out
    }

    /// Weighted `< conj(col_i) * col_j >`.
    pub fn mean_conj_prod(&self, i: usize, j: usize) -> Complex64 {
        self.rows().map(|(row, w)| row[i].conj() * row[j] * w).sum()
    }

    /// Weighted mean of an arbitrary per-row function.
    pub fn mean_map(&self, f: impl Fn(&[Complex64]) -> Complex64) -> Complex64 {
        self.rows().map(|(row, w)| f(row) * w).sum()
    }
}

fn normalize_weights(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

fn check_rejections(discarded: usize, kept: usize) -> Result<()> {
    let total = discarded + kept;
    let limit = ((total as f64) * REJECTION_LIMIT).floor() as usize;
    if discarded > limit {
        return Err(Error::TooManyRejectedSamples {
            tally: discarded,
            total,
            limit,
        });
    }
    Ok(())
}

fn keep_or_discard(values: Vec<Complex64>, n_values: usize) -> Result<Sampled> {
    if values.len() != n_values {
        return Err(Error::DimensionMismatch(format!(
            "estimator returned {} values, expected {n_values}",
            values.len()
        )));
    }
    if values
        .iter()
        .any(|v| !v.re.is_finite() || !v.im.is_finite())
    {
        Ok(Sampled::Discard)
    } else {
        Ok(Sampled::Keep(values))
    }
}

/// A random configuration in the plan's sector, drawn from the chain RNG.
fn random_sector_config<R: Rng>(length: usize, sector: i32, rng: &mut R) -> SpinConfiguration {
    let n_up = ((length as i64 + i64::from(sector)) / 2) as usize;
    let mut sigma = vec![-1i8; length];
    let mut chosen = 0;
    // Floyd-style sampling of n_up distinct sites.
    while chosen < n_up {
        let site = rng.gen_range(0..length);
        if sigma[site] == -1 {
            sigma[site] = 1;
            chosen += 1;
        }
    }
    SpinConfiguration::new(sigma).expect("entries are +-1 by construction")
}

struct ChainOutput {
    values: Vec<Complex64>,
    kept: usize,
    discarded: usize,
}

fn run_one_chain<A, F>(
    plan: &SamplerPlan,
    amp: &A,
    eval: &F,
    n_values: usize,
    chain_index: usize,
) -> Result<ChainOutput>
where
    A: Amplitude,
    F: Fn(&SpinConfiguration) -> Result<Sampled> + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(chain_index as u64 + 1);
    let config = random_sector_config(plan.length, plan.sector, &mut rng);
    let mut state = amp.init_state(config)?;

    for _ in 0..plan.burn_in {
        metropolis_step(amp, &mut state, &mut rng)?;
    }

    let mut values = Vec::new();
    let mut kept = 0;
    let mut discarded = 0;
    for _ in 0..plan.n_samples_per_chain {
        for _ in 0..plan.thinning {
            metropolis_step(amp, &mut state, &mut rng)?;
        }
        match eval(amp.config(&state))? {
            Sampled::Keep(v) => match keep_or_discard(v, n_values)? {
                Sampled::Keep(v) => {
                    values.extend(v);
                    kept += 1;
                }
                Sampled::Discard => discarded += 1,
            },
            Sampled::Discard => discarded += 1,
        }
    }
    Ok(ChainOutput {
        values,
        kept,
        discarded,
    })
}

/// Run `plan.n_chains` independent Markov chains of `|Phi|^2` and evaluate
/// the estimator on every kept configuration. Chains run in parallel;
/// the result is identical regardless of scheduling.
pub fn run_chains<A, F>(
    plan: &SamplerPlan,
    amp: &A,
    n_values: usize,
    eval: F,
) -> Result<SampleBatch>
where
    A: Amplitude,
    F: Fn(&SpinConfiguration) -> Result<Sampled> + Sync,
{
    plan.validate()?;
    let outputs: Vec<Result<ChainOutput>> = (0..plan.n_chains)
        .into_par_iter()
        .map(|c| run_one_chain(plan, amp, &eval, n_values, c))
        .collect();

    let mut values = Vec::new();
    let mut kept = 0;
    let mut discarded = 0;
    for out in outputs {
        let out = out?;
        values.extend(out.values);
        kept += out.kept;
        discarded += out.discarded;
    }
    check_rejections(discarded, kept)?;
    if kept == 0 {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    Ok(SampleBatch {
        n_values,
        values,
        weights: None,
        kept,
        discarded,
    })
}

/// Exact-enumeration twin of [`run_chains`]: sums over every configuration
/// of the sector with weights `exp(log_weight)`, normalized. `log_weight`
/// returns `2 Re log Phi(sigma)`; the maximum is subtracted before
/// exponentiation so large log amplitudes cannot overflow.
pub fn enumerate_batch<W, F>(
    basis: &SectorBasis,
    log_weight: W,
    n_values: usize,
    eval: F,
) -> Result<SampleBatch>
where
    W: Fn(&SpinConfiguration) -> Result<f64>,
    F: Fn(&SpinConfiguration) -> Result<Sampled>,
{
    let mut log_weights = Vec::with_capacity(basis.size());
    let mut rows: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(basis.size());
    let mut discarded = 0;
    for config in basis.iter() {
        let lw = log_weight(&config)?;
        match eval(&config)? {
            Sampled::Keep(v) => match keep_or_discard(v, n_values)? {
                Sampled::Keep(v) => {
                    log_weights.push(lw);
                    rows.push(Some(v));
                }
                Sampled::Discard => discarded += 1,
            },
            Sampled::Discard => discarded += 1,
        }
    }
    let kept = rows.len();
    check_rejections(discarded, kept)?;
    if kept == 0 {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    let max_lw = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - max_lw).exp()).collect();
    let values = rows.into_iter().flatten().flatten().collect();
    Ok(SampleBatch {
        n_values,
        values,
        weights: Some(normalize_weights(weights)),
        kept,
        discarded,
    })
}

/// Named first and second moments of registered complex estimators,
/// mergeable across chains and runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    names: Vec<String>,
    count: u64,
    sums: Vec<Complex64>,
    /// Row-major `k x k` sums of `conj(x_i) * x_j`.
    conj_prods: Vec<Complex64>,
    rejected: u64,
}

impl Accumulator {
    pub fn new(names: Vec<String>) -> Self {
        let k = names.len();
        Self {
            names,
            count: 0,
            sums: vec![Complex64::ZERO; k],
            conj_prods: vec![Complex64::ZERO; k * k],
            rejected: 0,
        }
    }

    pub fn push(&mut self, values: &[Complex64]) {
        assert_eq!(values.len(), self.names.len());
        let k = values.len();
        self.count += 1;
        for i in 0..k {
            self.sums[i] += values[i];
            for j in 0..k {
                self.conj_prods[i * k + j] += values[i].conj() * values[j];
            }
        }
    }

    pub fn merge(mut self, other: &Accumulator) -> Result<Self> {
        if self.names != other.names {
            return Err(Error::DimensionMismatch(
                "cannot merge accumulators with different estimators".into(),
            ));
        }
        self.count += other.count;
        self.rejected += other.rejected;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.conj_prods.iter_mut().zip(&other.conj_prods) {
            *a += b;
        }
        Ok(self)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    fn index(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("unknown estimator {name}"))
    }

    pub fn mean(&self, name: &str) -> Complex64 {
        self.sums[self.index(name)] / self.count as f64
    }

    /// `< conj(x_i) x_j > - conj(<x_i>) <x_j>`.
    pub fn covariance(&self, name_i: &str, name_j: &str) -> Complex64 {
        let (i, j) = (self.index(name_i), self.index(name_j));
        let k = self.names.len();
        let n = self.count as f64;
        self.conj_prods[i * k + j] / n - (self.sums[i] / n).conj() * (self.sums[j] / n)
    }

    pub fn variance(&self, name: &str) -> f64 {
        self.covariance(name, name).re
    }

    /// Standard error of the mean, ignoring autocorrelation.
    pub fn std_error(&self, name: &str) -> f64 {
        (self.variance(name) / self.count as f64).sqrt()
    }
}

/// [`run_chains`] reduced into a named [`Accumulator`]. Samples are pushed
/// in chain order, so identical plans give bit-identical accumulators.
pub fn run_chains_accumulate<A, F>(
    plan: &SamplerPlan,
    amp: &A,
    names: &[&str],
    eval: F,
) -> Result<Accumulator>
where
    A: Amplitude,
    F: Fn(&SpinConfiguration) -> Result<Sampled> + Sync,
{
    let batch = run_chains(plan, amp, names.len(), eval)?;
    let mut acc = Accumulator::new(names.iter().map(|s| s.to_string()).collect());
    for (row, _) in batch.rows() {
        acc.push(row);
    }
    acc.rejected = batch.discarded() as u64;
    Ok(acc)
}
