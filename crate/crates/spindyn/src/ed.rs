//! Exact diagonalization oracle for small chains.
//!
//! Dense ground states and full spectra, exact resolvent Green's functions
//! via shifted linear solves, a matrix-free Lanczos for energies beyond
//! the dense sweet spot, and the perturbation harness used to measure the
//! error-cancellation orders of the combined Green's function estimators.

use crate::basis::SectorBasis;
use crate::model::ModelSpec;
use crate::rbm::RbmParameters;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default cap on sector dimension for dense operations.
pub const DEFAULT_BASIS_CAP: usize = 20_000;

/// Sparse Hamiltonian over a sector basis, stored row-wise.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub diagonal: Vec<f64>,
    /// Per row: `(column index, element)` pairs, excluding the diagonal.
    pub offdiagonal: Vec<Vec<(usize, f64)>>,
}

impl SparseHamiltonian {
    pub fn build(model: &ModelSpec, basis: &SectorBasis) -> Result<Self> {
        if model.length() != basis.length() {
            return Err(Error::DimensionMismatch(
                "model and basis lengths differ".into(),
            ));
        }
        let mut diagonal = Vec::with_capacity(basis.size());
        let mut offdiagonal = Vec::with_capacity(basis.size());
        for config in basis.iter() {
            let (diag, flips) = model.row_flips(&config);
            diagonal.push(diag);
            let mut row = Vec::with_capacity(flips.len());
            for (pair, element) in flips {
                let partner = basis
                    .index_of(&config.flipped(&pair))
                    .expect("exchange conserves the sector");
                row.push((partner, element));
            }
            offdiagonal.push(row);
        }
        Ok(Self {
            diagonal,
            offdiagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let mut acc = self.diagonal[i] * v[i];
            for &(j, el) in &self.offdiagonal[i] {
                acc += el * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn matvec_complex(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::from_element(self.dim(), Complex64::ZERO);
        for i in 0..self.dim() {
            let mut acc = self.diagonal[i] * v[i];
            for &(j, el) in &self.offdiagonal[i] {
                acc += el * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal[i];
            for &(j, el) in &self.offdiagonal[i] {
                m[(j, i)] += el;
            }
        }
        m
    }
}

fn check_cap(basis: &SectorBasis, cap: usize) -> Result<()> {
    if basis.size() > cap {
        return Err(Error::OracleCapExceeded {
            size: basis.size(),
            cap,
        });
    }
    Ok(())
}

/// Dense Hamiltonian matrix over the sector, assembled from sparse rows.
pub fn build_hamiltonian(
    model: &ModelSpec,
    basis: &SectorBasis,
    cap: usize,
) -> Result<DMatrix<f64>> {
    check_cap(basis, cap)?;
    Ok(SparseHamiltonian::build(model, basis)?.to_dense())
}

/// Full real-symmetric eigendecomposition, eigenvalues ascending.
pub fn eigen_decomposition(h: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

/// Exact lowest eigenpair of the chain in one `2 S^z_tot` sector,
/// by dense diagonalization up to `cap` states.
pub fn exact_ground_state(
    model: &ModelSpec,
    sector: i32,
    cap: usize,
) -> Result<(f64, DVector<f64>, SectorBasis)> {
    let basis = SectorBasis::new(model.length(), sector)?;
    check_cap(&basis, cap)?;
    let h = build_hamiltonian(model, &basis, cap)?;
    let (values, vectors) = eigen_decomposition(&h);
    Ok((values[0], vectors.into_iter().next().unwrap(), basis))
}

/// Matrix-free Lanczos with full reorthogonalization; returns the lowest
/// eigenpair. Used for ground-state energies beyond the dense range.
pub fn lanczos_ground(
    hamiltonian: &SparseHamiltonian,
    max_iterations: usize,
    tol: f64,
    seed: u64,
) -> Result<(f64, DVector<f64>)> {
    let dim = hamiltonian.dim();
    if dim == 0 {
        return Err(Error::InvalidConfig("empty basis".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
    v /= v.norm();

    let mut vectors: Vec<DVector<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut previous_energy = f64::INFINITY;

    for k in 0..max_iterations.min(dim) {
        let mut w = hamiltonian.matvec(&vectors[k]);
        let alpha = vectors[k].dot(&w);
        alphas.push(alpha);
        w -= alpha * &vectors[k];
        if k > 0 {
            w -= betas[k - 1] * &vectors[k - 1];
        }
        // Full reorthogonalization keeps the basis clean at small dims.
        for u in &vectors {
            let overlap = u.dot(&w);
            w -= overlap * u;
        }
        let beta = w.norm();

        // Current Ritz value from the tridiagonal matrix.
        let m = alphas.len();
        let mut tri = DMatrix::zeros(m, m);
        for i in 0..m {
            tri[(i, i)] = alphas[i];
            if i + 1 < m {
                tri[(i, i + 1)] = betas[i];
                tri[(i + 1, i)] = betas[i];
            }
        }
        let (tvals, tvecs) = eigen_decomposition(&tri);
        let energy = tvals[0];

        let converged = beta < 1e-12 || (previous_energy - energy).abs() < tol;
        if converged || k + 1 == max_iterations.min(dim) {
            let mut ground = DVector::zeros(dim);
            for (i, u) in vectors.iter().enumerate() {
                ground += tvecs[0][i] * u;
            }
            ground /= ground.norm();
            return Ok((energy, ground));
        }
        previous_energy = energy;
        betas.push(beta);
        vectors.push(w / beta);
    }
    unreachable!("loop always returns on the final iteration");
}

/// `S^z_site` applied to a real vector over the basis.
pub fn apply_sz(basis: &SectorBasis, v: &DVector<f64>, site: usize) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| {
        0.5 * basis.config(i).spin_f64(site) * v[i]
    })
}

fn apply_sz_complex(basis: &SectorBasis, v: &DVector<Complex64>, site: usize) -> DVector<Complex64> {
    DVector::from_fn(v.len(), |i, _| {
        0.5 * basis.config(i).spin_f64(site) * v[i]
    })
}

/// Dense complex matrix `z I - H` over the sector.
pub fn shifted_matrix(
    hamiltonian: &SparseHamiltonian,
    z: Complex64,
) -> DMatrix<Complex64> {
    let n = hamiltonian.dim();
    let mut m = DMatrix::from_element(n, n, Complex64::ZERO);
    for i in 0..n {
        m[(i, i)] = z - hamiltonian.diagonal[i];
        for &(j, el) in &hamiltonian.offdiagonal[i] {
            m[(j, i)] -= el;
        }
    }
    m
}

/// Exact correction vector `(z - H)^{-1} S^z_source |psi0>` by direct
/// linear solve; `psi0` should be normalized.
pub fn resolvent_vector(
    hamiltonian: &SparseHamiltonian,
    basis: &SectorBasis,
    psi0: &DVector<f64>,
    z: Complex64,
    source: usize,
) -> Result<DVector<Complex64>> {
    let rhs_real = apply_sz(basis, psi0, source);
    let rhs = DVector::from_fn(rhs_real.len(), |i, _| Complex64::from(rhs_real[i]));
    let lu = shifted_matrix(hamiltonian, z).lu();
    lu.solve(&rhs)
        .ok_or_else(|| Error::DegenerateEstimate("singular shifted solve".into()))
}

/// Exact Green's function `<psi| S^z_i (z-H)^{-1} S^z_j |psi>` for a
/// normalized `psi0`.
pub fn exact_greens(
    model: &ModelSpec,
    basis: &SectorBasis,
    psi0: &DVector<f64>,
    z: Complex64,
    i: usize,
    j: usize,
) -> Result<Complex64> {
    let hamiltonian = SparseHamiltonian::build(model, basis)?;
    let chi = resolvent_vector(&hamiltonian, basis, psi0, z, j)?;
    let bra = apply_sz(basis, psi0, i);
    Ok((0..basis.size()).map(|s| bra[s] * chi[s]).sum())
}

/// Exact site-resolved Green's functions `G_n = <A_n | chi_0(z)>` for all
/// separations `n`, from a single shifted solve with the source at site 0.
pub fn greens_row(
    hamiltonian: &SparseHamiltonian,
    basis: &SectorBasis,
    psi0: &DVector<f64>,
    z: Complex64,
) -> Result<Vec<Complex64>> {
    let chi = resolvent_vector(hamiltonian, basis, psi0, z, 0)?;
    let length = basis.length();
    let mut out = Vec::with_capacity(length);
    for n in 0..length {
        let bra = apply_sz(basis, psi0, n);
        out.push((0..basis.size()).map(|s| bra[s] * chi[s]).sum());
    }
    Ok(out)
}

/// `<psi0| S^z_n S^z_0 |psi0>` for a normalized real ground state.
pub fn static_correlator(basis: &SectorBasis, psi0: &DVector<f64>, n: usize) -> f64 {
    (0..basis.size())
        .map(|s| {
            let c = basis.config(s);
            0.25 * c.spin_f64(n) * c.spin_f64(0) * psi0[s] * psi0[s]
        })
        .sum()
}

/// Pole positions and momentum-resolved spectral weights of the dynamical
/// structure factor: `S(k, omega) = sum_m w_m(k) L_eta(omega - dE_m)` with
/// `w_m(k) = (1/L) sum_n e^{ikn} <psi0|S^z_n|m><m|S^z_0|psi0>`.
#[derive(Debug, Clone)]
pub struct PoleWeights {
    /// Excitation energies `E_m - E_0`, ascending.
    pub delta_e: Vec<f64>,
    pub weights: Vec<Complex64>,
}

impl PoleWeights {
    /// Static structure value `integral of S(k, .) over all frequencies`.
    pub fn static_value(&self) -> f64 {
        self.weights.iter().map(|w| w.re).sum()
    }

    /// Lorentzian mass lying outside `[omega_min, omega_max]`.
    pub fn tail_mass(&self, omega_min: f64, omega_max: f64, eta: f64) -> f64 {
        self.delta_e
            .iter()
            .zip(&self.weights)
            .map(|(&de, w)| {
                let covered = ((omega_max - de).atan2(eta) - (omega_min - de).atan2(eta))
                    / std::f64::consts::PI;
                w.re * (1.0 - covered)
            })
            .sum()
    }

    /// Exact integral of the broadened spectrum over `[omega_min, omega_max]`.
    pub fn banded_mass(&self, omega_min: f64, omega_max: f64, eta: f64) -> f64 {
        self.static_value() - self.tail_mass(omega_min, omega_max, eta)
    }
}

/// Eigenstate expansion of the `k`-resolved spectral weights.
pub fn momentum_pole_weights(
    model: &ModelSpec,
    basis: &SectorBasis,
    psi0: &DVector<f64>,
    k: f64,
) -> Result<PoleWeights> {
    let h = build_hamiltonian(model, basis, DEFAULT_BASIS_CAP)?;
    let (values, vectors) = eigen_decomposition(&h);
    let length = basis.length();
    let e0 = values[0];

    // c[m][n] = <m | S^z_n | psi0>
    let sz_psi: Vec<DVector<f64>> = (0..length).map(|n| apply_sz(basis, psi0, n)).collect();
    let mut delta_e = Vec::with_capacity(values.len());
    let mut weights = Vec::with_capacity(values.len());
    for (m, vec_m) in vectors.iter().enumerate() {
        let c0 = vec_m.dot(&sz_psi[0]);
        let mut fourier = Complex64::ZERO;
        for (n, sz) in sz_psi.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, k * n as f64);
            fourier += phase * vec_m.dot(sz);
        }
        delta_e.push(values[m] - e0);
        weights.push(fourier * c0 / length as f64);
    }
    Ok(PoleWeights { delta_e, weights })
}

/// Direction of a perturbation injected by the harness.
pub enum PerturbDirection<'a> {
    /// Deterministic pseudo-random complex direction.
    Random { seed: u64 },
    /// Along a given (real) eigenstate.
    Eigenstate(&'a DVector<f64>),
}

/// `chi + epsilon * direction` with the direction normalized; used by the
/// error-cancellation measurements.
pub fn perturb_and_project(
    chi: &DVector<Complex64>,
    epsilon: f64,
    direction: PerturbDirection<'_>,
) -> DVector<Complex64> {
    let dir: DVector<Complex64> = match direction {
        PerturbDirection::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            DVector::from_fn(chi.len(), |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            })
        }
        PerturbDirection::Eigenstate(v) => DVector::from_fn(chi.len(), |i, _| v[i].into()),
    };
    let norm = dir.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    chi + dir * Complex64::from(epsilon / norm)
}

/// RBM amplitudes and log-derivative matrix tabulated over a sector basis:
/// the dense-overlap side of the sampled-vs-dense estimator identities.
pub struct DenseRbmView {
    /// `chi(sigma)` per basis state, scaled by `exp(-max Re log chi)`.
    pub amplitudes: DVector<Complex64>,
    /// `O_i(sigma)` per basis state (rows) and flat parameter (columns).
    pub derivatives: DMatrix<Complex64>,
}

pub fn tabulate_rbm(params: &RbmParameters, basis: &SectorBasis) -> Result<DenseRbmView> {
    let logs: Vec<Complex64> = basis
        .iter()
        .map(|c| params.log_psi(&c))
        .collect::<Result<_>>()?;
    let max_re = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let amplitudes = DVector::from_iterator(
        basis.size(),
        logs.iter().map(|&l| (l - max_re).exp()),
    );
    let mut derivatives = DMatrix::from_element(basis.size(), params.flat_len(), Complex64::ZERO);
    for (s, config) in basis.iter().enumerate() {
        let o = params.log_derivatives(&config)?;
        for (p, &v) in o.iter().enumerate() {
            derivatives[(s, p)] = v;
        }
    }
    Ok(DenseRbmView {
        amplitudes,
        derivatives,
    })
}

/// Dense-overlap formulas for the correction-vector solve, evaluated with
/// explicit vectors and the shifted matrix. This is the oracle route: the
/// sampled estimators must reproduce these numbers in enumeration mode.
pub struct DenseCvOracle {
    /// `Q = z I - H`.
    pub q: DMatrix<Complex64>,
    /// Source vector `A = S^z_site psi0` (unnormalized is fine).
    pub a: DVector<Complex64>,
}

impl DenseCvOracle {
    pub fn new(
        hamiltonian: &SparseHamiltonian,
        basis: &SectorBasis,
        z: Complex64,
        psi: &DVector<Complex64>,
        source: usize,
    ) -> Self {
        Self {
            q: shifted_matrix(hamiltonian, z),
            a: apply_sz_complex(basis, psi, source),
        }
    }

    fn inner(x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
        x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `x = <chi|Q*|A><A|Q|chi> / (<chi|Q*Q|chi><A|A>)`.
    pub fn x(&self, chi: &DVector<Complex64>) -> f64 {
        let q_chi = &self.q * chi;
        let overlap = Self::inner(&self.a, &q_chi);
        (overlap.norm_sqr() / (Self::inner(&q_chi, &q_chi).re * Self::inner(&self.a, &self.a).re))
            .clamp(0.0, 1.0)
    }

    /// `d gamma^2 / d alpha_i*` from dense overlaps with
    /// `|d_i chi> = O_i(sigma) chi(sigma)`.
    pub fn gamma_gradient(
        &self,
        chi: &DVector<Complex64>,
        derivatives: &DMatrix<Complex64>,
    ) -> Vec<Complex64> {
        let x = self.x(chi);
        let gamma = x.sqrt().min(1.0).acos();
        let prefactor = if x >= 1.0 - 1e-12 {
            return vec![Complex64::ZERO; derivatives.ncols()];
        } else {
            gamma * (x / (1.0 - x)).sqrt()
        };
        let q_chi = &self.q * chi;
        let qq = Self::inner(&q_chi, &q_chi);
        let qa = Self::inner(&q_chi, &self.a); // <chi|Q*|A>
        let mut out = Vec::with_capacity(derivatives.ncols());
        for p in 0..derivatives.ncols() {
            let d_chi = DVector::from_fn(chi.len(), |s, _| derivatives[(s, p)] * chi[s]);
            let q_dchi = &self.q * &d_chi;
            let term1 = Self::inner(&q_dchi, &q_chi) / qq;
            let term2 = Self::inner(&q_dchi, &self.a) / qa;
            out.push(prefactor * (term1 - term2));
        }
        out
    }

    /// Dense metric `g_ij` from `Q|d_i chi>` overlaps.
    pub fn metric(
        &self,
        chi: &DVector<Complex64>,
        derivatives: &DMatrix<Complex64>,
    ) -> DMatrix<Complex64> {
        let q_chi = &self.q * chi;
        let qq = Self::inner(&q_chi, &q_chi);
        let n = derivatives.ncols();
        let q_dchi: Vec<DVector<Complex64>> = (0..n)
            .map(|p| {
                let d_chi = DVector::from_fn(chi.len(), |s, _| derivatives[(s, p)] * chi[s]);
                &self.q * &d_chi
            })
            .collect();
        let projections: Vec<Complex64> =
            q_dchi.iter().map(|v| Self::inner(v, &q_chi) / qq).collect();
        DMatrix::from_fn(n, n, |i, j| {
            Self::inner(&q_dchi[i], &q_dchi[j]) / qq - projections[i] * projections[j].conj()
        })
    }

    /// `beta = <chi|Q*|A> / <chi|Q*Q|chi>`.
    pub fn beta(&self, chi: &DVector<Complex64>) -> Complex64 {
        let q_chi = &self.q * chi;
        Self::inner(&q_chi, &self.a) / Self::inner(&q_chi, &q_chi).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_site_open_chain_eigenvalues() {
        let model = ModelSpec::new(2, 1.0, 0.0, false).unwrap();
        let basis = SectorBasis::new(2, 0).unwrap();
        let h = build_hamiltonian(&model, &basis, DEFAULT_BASIS_CAP).unwrap();
        let (values, _) = eigen_decomposition(&h);
        assert_relative_eq!(values[0], -0.75, epsilon = 1e-12);
        assert_relative_eq!(values[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn four_site_ring_ground_energy() {
        let model = ModelSpec::heisenberg(4).unwrap();
        let (e0, _, _) = exact_ground_state(&model, 0, DEFAULT_BASIS_CAP).unwrap();
        assert_relative_eq!(e0, -2.0, epsilon = 1e-10);
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let model = ModelSpec::new(8, 1.0, 0.2, true).unwrap();
        let basis = SectorBasis::new(8, 0).unwrap();
        let h = build_hamiltonian(&model, &basis, DEFAULT_BASIS_CAP).unwrap();
        let mut max_residual: f64 = 0.0;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                max_residual = max_residual.max((h[(i, j)] - h[(j, i)]).abs());
            }
        }
        assert!(max_residual < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        let model = ModelSpec::heisenberg(10).unwrap();
        let basis = SectorBasis::new(10, 0).unwrap();
        let sparse = SparseHamiltonian::build(&model, &basis).unwrap();
        let (dense_e0, _, _) = exact_ground_state(&model, 0, DEFAULT_BASIS_CAP).unwrap();
        let (lanczos_e0, vector) = lanczos_ground(&sparse, 200, 1e-12, 7).unwrap();
        assert_relative_eq!(dense_e0, lanczos_e0, epsilon = 1e-9);
        let hv = sparse.matvec(&vector);
        assert!((hv - lanczos_e0 * &vector).norm() < 1e-6);
    }

    #[test]
    fn cap_is_enforced() {
        let model = ModelSpec::heisenberg(8).unwrap();
        let basis = SectorBasis::new(8, 0).unwrap();
        assert!(matches!(
            build_hamiltonian(&model, &basis, 10),
            Err(Error::OracleCapExceeded { size: 70, cap: 10 })
        ));
    }

    #[test]
    fn two_site_pole_greens_value() {
        // Single triplet pole at omega = 1 with weight 1/4:
        // G(E0 + 1 + i eta) = (1/4) / (i eta).
        let model = ModelSpec::new(2, 1.0, 0.0, false).unwrap();
        let basis = SectorBasis::new(2, 0).unwrap();
        let (e0, psi0, _) = exact_ground_state(&model, 0, DEFAULT_BASIS_CAP).unwrap();
        let eta = 0.1;
        let z = Complex64::new(e0 + 1.0, eta);
        let g = exact_greens(&model, &basis, &psi0, z, 0, 0).unwrap();
        let expected = 0.25 / Complex64::new(0.0, eta);
        assert!((g - expected).norm() < 1e-12);
    }

    #[test]
    fn greens_has_negative_imaginary_diagonal() {
        let model = ModelSpec::heisenberg(6).unwrap();
        let basis = SectorBasis::new(6, 0).unwrap();
        let (e0, psi0, _) = exact_ground_state(&model, 0, DEFAULT_BASIS_CAP).unwrap();
        for omega in [0.0, 0.5, 1.0, 2.0, 3.5] {
            let z = Complex64::new(e0 + omega, 0.1);
            let g = exact_greens(&model, &basis, &psi0, z, 2, 2).unwrap();
            assert!(g.im < 0.0, "Im G = {} at omega {omega}", g.im);
        }
    }

    #[test]
    fn large_shift_resolvent_asymptotics() {
        // For |z| >> ||H||, G -> <A_i|A_j> / z to leading order.
        let model = ModelSpec::heisenberg(4).unwrap();
        let basis = SectorBasis::new(4, 0).unwrap();
        let (_, psi0, _) = exact_ground_state(&model, 0, DEFAULT_BASIS_CAP).unwrap();
        let z = Complex64::new(0.0, 1e4);
        let g = exact_greens(&model, &basis, &psi0, z, 0, 0).unwrap();
        let aa = static_correlator(&basis, &psi0, 0);
        assert!((g - aa / z).norm() < 1e-7 * (aa / z).norm() + 1e-12);
    }

    #[test]
    fn pole_weights_integrate_to_static_value() {
        let model = ModelSpec::heisenberg(6).unwrap();
        let basis = SectorBasis::new(6, 0).unwrap();
        let (_, psi0, _) = exact_ground_state(&model, 0, DEFAULT_BASIS_CAP).unwrap();
        for m in 0..6usize {
            let k = 2.0 * std::f64::consts::PI * m as f64 / 6.0;
            let poles = momentum_pole_weights(&model, &basis, &psi0, k).unwrap();
            let direct: f64 = (0..6)
                .map(|n| {
                    let phase = (k * n as f64).cos();
                    phase * static_correlator(&basis, &psi0, n)
                })
                .sum::<f64>()
                / 6.0;
            assert_relative_eq!(poles.static_value(), direct, epsilon = 1e-10);
            let im: f64 = poles.weights.iter().map(|w| w.im).sum();
            assert!(im.abs() < 1e-10);
        }
    }

    #[test]
    fn perturbation_is_scaled_and_normalized() {
        let chi = DVector::from_element(5, Complex64::ONE);
        let same = perturb_and_project(&chi, 0.0, PerturbDirection::Random { seed: 3 });
        assert!((&same - &chi).norm() < 1e-15);
        let moved = perturb_and_project(&chi, 0.1, PerturbDirection::Random { seed: 3 });
        assert_relative_eq!((&moved - &chi).norm(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn resolvent_solves_the_linear_system() {
        let model = ModelSpec::heisenberg(6).unwrap();
        let basis = SectorBasis::new(6, 0).unwrap();
        let sparse = SparseHamiltonian::build(&model, &basis).unwrap();
        let (e0, psi0, _) = exact_ground_state(&model, 0, DEFAULT_BASIS_CAP).unwrap();
        let z = Complex64::new(e0 + 0.7, 0.1);
        let chi = resolvent_vector(&sparse, &basis, &psi0, z, 2).unwrap();
        let residual = z * &chi - sparse.matvec_complex(&chi);
        let rhs_real = apply_sz(&basis, &psi0, 2);
        for s in 0..basis.size() {
            assert!((residual[s] - rhs_real[s]).norm() < 1e-10);
        }
    }
}
