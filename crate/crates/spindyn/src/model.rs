//! The J1-J2 Heisenberg chain and its local estimators.
//!
//! Matrix elements are written in the +-1 spin convention (physical
//! `S^z = sigma/2`): each bond `(i, j)` with coupling `J` contributes
//! `J sigma_i sigma_j / 4` to the diagonal and, when the two spins are
//! antiparallel, an exchange element `J / 2` to the configuration with
//! the pair swapped.

use crate::basis::SpinConfiguration;
use crate::rbm::{ChainState, RbmParameters};
use crate::{Error, Result};
use num_complex::Complex64;

/// Couplings and geometry of the chain. Bond lists are deduplicated at
/// construction: wrap-around duplicates (e.g. both `(0,1)` and `(1,0)` on
/// an L=2 ring, or the doubled next-nearest pairs on an L=4 ring) are
/// merged by summing their couplings, which preserves the Hamiltonian.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    length: usize,
    j1: f64,
    j2: f64,
    periodic: bool,
    bonds: Vec<Bond>,
}

/// An exchange bond between two distinct sites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// One sparse Hamiltonian row: the diagonal element plus the connected
/// off-diagonal configurations with their matrix elements.
#[derive(Debug, Clone)]
pub struct SparseRow {
    pub diagonal: f64,
    /// `(config', element)` pairs with `<config'|H|config> = element != 0`.
    pub exchanges: Vec<(SpinConfiguration, f64)>,
}

impl SparseRow {
    /// Total number of configurations in the row, including the diagonal.
    pub fn len(&self) -> usize {
        1 + self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl ModelSpec {
    pub fn new(length: usize, j1: f64, j2: f64, periodic: bool) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidConfig("chain length must be >= 2".into()));
        }
        if periodic && j2 != 0.0 && length < 4 {
            return Err(Error::InvalidConfig(
                "periodic next-nearest couplings need length >= 4".into(),
            ));
        }
        let mut spec = Self {
            length,
            j1,
            j2,
            periodic,
            bonds: Vec::new(),
        };
        spec.build_bonds();
        Ok(spec)
    }

    pub fn heisenberg(length: usize) -> Result<Self> {
        Self::new(length, 1.0, 0.0, true)
    }

    fn build_bonds(&mut self) {
        let l = self.length;
        let add = |bonds: &mut Vec<Bond>, i: usize, j: usize, coupling: f64| {
            if coupling == 0.0 || i == j {
                return;
            }
            let (i, j) = (i.min(j), i.max(j));
            if let Some(existing) = bonds.iter_mut().find(|b| b.i == i && b.j == j) {
                existing.coupling += coupling;
            } else {
                bonds.push(Bond { i, j, coupling });
            }
        };
        let mut bonds = Vec::new();
        for (range, coupling) in [(1usize, self.j1), (2usize, self.j2)] {
            let limit = if self.periodic { l } else { l.saturating_sub(range) };
            for i in 0..limit {
                add(&mut bonds, i, (i + range) % l, coupling);
            }
        }
        self.bonds = bonds;
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn j1(&self) -> f64 {
        self.j1
    }

    pub fn j2(&self) -> f64 {
        self.j2
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    fn check_config(&self, config: &SpinConfiguration) -> Result<()> {
        if config.len() != self.length {
            return Err(Error::DimensionMismatch(format!(
                "configuration has {} sites, model has {}",
                config.len(),
                self.length
            )));
        }
        Ok(())
    }

    /// Diagonal element `<sigma|H|sigma> = sum_bonds J sigma_i sigma_j / 4`.
    pub fn diagonal(&self, config: &SpinConfiguration) -> f64 {
        self.bonds
            .iter()
            .map(|b| 0.25 * b.coupling * config.spin_f64(b.i) * config.spin_f64(b.j))
            .sum()
    }

    /// The row in flip form: diagonal element plus one `([i, j], J/2)`
    /// entry per antiparallel bond. Avoids allocating configurations in
    /// the hot estimator loops.
    pub fn row_flips(&self, config: &SpinConfiguration) -> (f64, Vec<([usize; 2], f64)>) {
        let diagonal = self.diagonal(config);
        let exchanges = self
            .bonds
            .iter()
            .filter(|b| config.spin(b.i) != config.spin(b.j))
            .map(|b| ([b.i, b.j], 0.5 * b.coupling))
            .collect();
        (diagonal, exchanges)
    }

    /// All configurations connected to `config` by the Hamiltonian,
    /// including the diagonal term.
    pub fn connected_states(&self, config: &SpinConfiguration) -> Result<SparseRow> {
        self.check_config(config)?;
        let (diagonal, flips) = self.row_flips(config);
        let exchanges = flips
            .into_iter()
            .map(|(pair, element)| (config.flipped(&pair), element))
            .collect();
        Ok(SparseRow {
            diagonal,
            exchanges,
        })
    }

    /// Local energy `E_loc(sigma) = <sigma|H|psi> / psi(sigma)`, with the
    /// amplitude ratios taken from the chain-state cache.
    pub fn local_energy(&self, params: &RbmParameters, state: &ChainState) -> Result<Complex64> {
        self.check_config(state.config())?;
        let (diagonal, flips) = self.row_flips(state.config());
        let mut total = Complex64::from(diagonal);
        for (pair, element) in flips {
            total += element * state.delta_log_psi(params, &pair)?.exp();
        }
        Ok(total)
    }

    /// `<sigma|(z - H)|chi> / chi(sigma)` for the wavefunction held in
    /// `state`; equals `z - E_loc(sigma)`.
    pub fn local_q_ratio(
        &self,
        z: Complex64,
        chi_params: &RbmParameters,
        state: &ChainState,
    ) -> Result<Complex64> {
        Ok(z - self.local_energy(chi_params, state)?)
    }

    /// Absolute `<sigma|(z - H)|chi> = z chi(sigma) - <sigma|H|chi>`.
    /// Only meaningful at oracle scale where `exp(log chi)` cannot
    /// overflow; the sampled estimators use [`local_q_ratio`](Self::local_q_ratio).
    pub fn local_q_action(
        &self,
        z: Complex64,
        chi_params: &RbmParameters,
        state: &ChainState,
    ) -> Result<Complex64> {
        Ok(self.local_q_ratio(z, chi_params, state)? * state.log_amp().exp())
    }
}

/// Diagonal source operators: currently `S^z` at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SzSource {
    pub site: usize,
}

impl SzSource {
    /// `<sigma|A|psi> / psi(sigma) = sigma_site / 2` for the diagonal
    /// operator `A = S^z_site`.
    pub fn local_ratio(&self, config: &SpinConfiguration) -> Result<Complex64> {
        if self.site >= config.len() {
            return Err(Error::SiteOutOfRange {
                index: self.site,
                length: config.len(),
            });
        }
        Ok(Complex64::from(0.5 * config.spin_f64(self.site)))
    }
}
