//! Passive states, ergotropy and measurement-assisted (daemonic) ergotropy.
//!
//! A [`Joint`] state always lists its factors as system, ancilla, then any
//! number of unmeasured factors which are traced out.

use crate::error::{Error, Result};
use crate::qcore::{
    bipartite_coefficients, gram_rows, hermitian_eig, hermitian_eigvals, kron_all, partial_trace,
    reduced_state, ComplexMatrix, DensityMatrix, Eigh, PureState, C64, ZERO,
};
use crate::spinops::{spin_operators, Spin};

/// Outcomes below this probability are dropped from outcome averages.
pub const MIN_OUTCOME_PROB: f64 = 1e-12;
const PROJECTOR_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Hamiltonian {
    matrix: ComplexMatrix,
    eig: Eigh,
}

impl Hamiltonian {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let eig = if matrix.is_diagonal(0.0) {
            // exact spectrum; ties keep computational index order
            let d: Vec<f64> = matrix.diag().iter().map(|z| z.re).collect();
            if matrix.diag().iter().any(|z| z.im != 0.0) {
                return Err(Error::NotHermitian(matrix.diag().iter().map(|z| z.im.abs()).fold(0.0, f64::max)));
            }
            let mut order: Vec<usize> = (0..d.len()).collect();
            order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
            let n = d.len();
            Eigh {
                values: order.iter().map(|&k| d[k]).collect(),
                vectors: ComplexMatrix::from_fn(n, n, |i, j| if i == order[j] { C64::new(1.0, 0.0) } else { ZERO }),
            }
        } else {
            hermitian_eig(&matrix)?
        };
        Ok(Self { matrix, eig })
    }

    pub fn from_diag(values: &[f64]) -> Self {
        Self::new(ComplexMatrix::from_real_diag(values)).expect("real diagonal is Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Ascending.
    pub fn energies(&self) -> &[f64] {
        &self.eig.values
    }

    /// Energy eigenvectors as columns, ordered as [`energies`](Self::energies).
    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.eig.vectors
    }

    pub fn energy(&self, rho: &DensityMatrix) -> f64 {
        rho.expectation(&self.matrix)
    }
}

/// `H_S = -J_Sz` for a spin `j`.
pub fn top_system_hamiltonian(spin: Spin) -> Hamiltonian {
    Hamiltonian::new(spin_operators(spin).jz.scale_real(-1.0)).expect("Jz is Hermitian")
}

/// `sign · (1/2) Σ_i σ_iz` over `n_sites` qubits, site 1 most significant.
pub fn collective_z_hamiltonian(n_sites: usize, sign: f64) -> Hamiltonian {
    let d = 1usize << n_sites;
    let diag: Vec<f64> = (0..d)
        .map(|x| sign * 0.5 * (0..n_sites).map(|i| crate::models::site_sign(x, i, n_sites)).sum::<f64>())
        .collect();
    Hamiltonian::from_diag(&diag)
}

/// A complete set of orthogonal projectors on the ancilla factor.
#[derive(Clone, Debug)]
pub struct AncillaMeasurement {
    projectors: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl AncillaMeasurement {
    pub fn new(projectors: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        if projectors.is_empty() {
            return Err(Error::InvalidMeasurement("no projectors".into()));
        }
        if labels.len() != projectors.len() {
            return Err(Error::InvalidMeasurement("one label per projector required".into()));
        }
        let d = projectors[0].rows();
        if projectors.iter().any(|p| !p.is_square() || p.rows() != d) {
            return Err(Error::InvalidMeasurement("projectors must share one square dimension".into()));
        }
        let mut sum = ComplexMatrix::zeros(d, d);
        for (a, pa) in projectors.iter().enumerate() {
            if pa.hermiticity_error() > PROJECTOR_TOL {
                return Err(Error::InvalidMeasurement(format!("projector {a} is not Hermitian")));
            }
            for (b, pb) in projectors.iter().enumerate() {
                let prod = pa.dot(pb);
                let target = if a == b { pa.clone() } else { ComplexMatrix::zeros(d, d) };
                if prod.max_abs_diff(&target) > PROJECTOR_TOL {
                    return Err(Error::InvalidMeasurement(format!("projectors {a} and {b} are not orthogonal idempotents")));
                }
            }
            sum = &sum + pa;
        }
        if sum.max_abs_diff(&ComplexMatrix::identity(d)) > PROJECTOR_TOL {
            return Err(Error::InvalidMeasurement("projectors do not sum to the identity".into()));
        }
        Ok(Self { projectors, labels })
    }

    /// Rank-one projectors onto the computational basis.
    pub fn computational(dim: usize) -> Self {
        let projectors = (0..dim)
            .map(|k| {
                let mut p = ComplexMatrix::zeros(dim, dim);
                p[(k, k)] = C64::new(1.0, 0.0);
                p
            })
            .collect();
        Self { projectors, labels: (0..dim).map(|k| k.to_string()).collect() }
    }

    /// Eigenspace projectors of a Hermitian observable.
    pub fn eigenbasis(observable: &ComplexMatrix) -> Result<Self> {
        let eig = hermitian_eig(observable)?;
        let d = observable.rows();
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (k, &v) in eig.values.iter().enumerate() {
            match groups.last_mut() {
                Some((v0, ks)) if (v - *v0).abs() <= 1e-9 => ks.push(k),
                _ => groups.push((v, vec![k])),
            }
        }
        let projectors = groups
            .iter()
            .map(|(_, ks)| {
                ComplexMatrix::from_fn(d, d, |i, j| ks.iter().map(|&k| eig.vectors[(i, k)] * eig.vectors[(j, k)].conj()).sum())
            })
            .collect();
        let labels = groups.iter().map(|(v, _)| format!("{v}")).collect();
        Self::new(projectors, labels)
    }

    pub fn trivial(dim: usize) -> Self {
        Self { projectors: vec![ComplexMatrix::identity(dim)], labels: vec!["I".into()] }
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].rows()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Computational projectors are applied by slicing.
    fn is_computational(&self) -> bool {
        self.projectors.len() == self.dim()
            && self.projectors.iter().enumerate().all(|(k, p)| p.is_diagonal(0.0) && p[(k, k)] == C64::new(1.0, 0.0))
    }
}

#[derive(Clone, Debug)]
pub enum JointState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

/// A joint state with factor dims `[d_S, d_A, rest…]`.
#[derive(Clone, Debug)]
pub struct Joint {
    state: JointState,
    dims: Vec<usize>,
}

impl Joint {
    pub fn pure(psi: PureState, dims: Vec<usize>) -> Result<Self> {
        Self::validate(psi.dim(), &dims)?;
        Ok(Self { state: JointState::Pure(psi), dims })
    }

    pub fn mixed(rho: DensityMatrix, dims: Vec<usize>) -> Result<Self> {
        Self::validate(rho.dim(), &dims)?;
        Ok(Self { state: JointState::Mixed(rho), dims })
    }

    fn validate(total: usize, dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) || dims.iter().product::<usize>() != total {
            return Err(Error::DimensionMismatch(format!("joint dims {dims:?} for a state of dim {total}")));
        }
        Ok(())
    }

    pub fn state(&self) -> &JointState {
        &self.state
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d_system(&self) -> usize {
        self.dims[0]
    }

    pub fn d_ancilla(&self) -> usize {
        self.dims[1]
    }

    fn d_rest(&self) -> usize {
        self.dims[2..].iter().product()
    }

    /// `ρ_S`
    pub fn system_state(&self) -> DensityMatrix {
        match &self.state {
            JointState::Pure(psi) => reduced_state(psi, &self.dims, &[0]).expect("validated dims"),
            JointState::Mixed(rho) => partial_trace(rho, &self.dims, &[0]).expect("validated dims"),
        }
    }

    fn check(&self, meas: &AncillaMeasurement) -> Result<()> {
        if meas.dim() != self.d_ancilla() {
            return Err(Error::DimensionMismatch(format!(
                "measurement on dim {} but ancilla has dim {}",
                meas.dim(),
                self.d_ancilla()
            )));
        }
        Ok(())
    }
}

/// Post-measurement system state for one ancilla outcome. `state` is `None`
/// (and `probability` zero) for outcomes below [`MIN_OUTCOME_PROB`].
#[derive(Clone, Debug)]
pub struct ConditionalState {
    pub probability: f64,
    pub state: Option<DensityMatrix>,
}

/// For a pure joint state: the unnormalized `d_S × (d_A·d_rest)` factor
/// `M_a` with `p_a ρ_{S|a} = M_a M_a†`, one per outcome.
fn conditional_factors(psi: &PureState, joint: &Joint, meas: &AncillaMeasurement) -> Vec<ComplexMatrix> {
    let (ds, da, dr) = (joint.d_system(), joint.d_ancilla(), joint.d_rest());
    let c = bipartite_coefficients(psi, &[ds, da * dr], &[0]).expect("validated dims");
    if meas.is_computational() {
        return (0..da)
            .map(|a| ComplexMatrix::from_fn(ds, dr, |s, r| c[(s, a * dr + r)]))
            .collect();
    }
    meas.projectors()
        .iter()
        .map(|p| {
            ComplexMatrix::from_fn(ds, da * dr, |s, col| {
                let (a, r) = (col / dr, col % dr);
                (0..da).map(|b| p[(a, b)] * c[(s, b * dr + r)]).sum()
            })
        })
        .collect()
}

pub fn conditional_states(joint: &Joint, meas: &AncillaMeasurement) -> Result<Vec<ConditionalState>> {
    joint.check(meas)?;
    let out = match &joint.state {
        JointState::Pure(psi) => conditional_factors(psi, joint, meas)
            .into_iter()
            .map(|m| {
                let g = gram_rows(&m);
                let p = g.trace().re;
                finish_outcome(p, g)
            })
            .collect(),
        JointState::Mixed(rho) => {
            let (ds, dr) = (joint.d_system(), joint.d_rest());
            meas.projectors()
                .iter()
                .map(|p| {
                    let k = kron_all([&ComplexMatrix::identity(ds), p, &ComplexMatrix::identity(dr)]).expect("dims bounded by joint");
                    let projected = k.dot(rho.matrix()).dot(&k);
                    let pt = partial_trace(&DensityMatrix::from_matrix_unchecked(projected), &[ds, joint.d_ancilla(), dr], &[0])
                        .expect("validated dims");
                    let m = pt.into_matrix();
                    let prob = m.trace().re;
                    finish_outcome(prob, m)
                })
                .collect()
        }
    };
    Ok(out)
}

fn finish_outcome(p: f64, unnormalized: ComplexMatrix) -> ConditionalState {
    if p < MIN_OUTCOME_PROB {
        ConditionalState { probability: 0.0, state: None }
    } else {
        ConditionalState { probability: p, state: Some(DensityMatrix::from_matrix_unchecked(unnormalized.scale_real(1.0 / p))) }
    }
}

fn check_dim(rho: &DensityMatrix, h: &Hamiltonian) -> Result<()> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!("state dim {} vs Hamiltonian dim {}", rho.dim(), h.dim())));
    }
    Ok(())
}

/// `π = Σ_k r_k |ε_k⟩⟨ε_k|` with `r` descending and `ε` ascending.
pub fn passive_state(rho: &DensityMatrix, h: &Hamiltonian) -> Result<DensityMatrix> {
    check_dim(rho, h)?;
    let mut r = rho.spectrum();
    r.reverse();
    let v = h.eigenvectors();
    let d = rho.dim();
    let m = ComplexMatrix::from_fn(d, d, |i, j| (0..d).map(|k| v[(i, k)] * v[(j, k)].conj() * r[k]).sum());
    Ok(DensityMatrix::from_matrix_unchecked(m))
}

/// Pairs descending populations with ascending energies.
fn pair_energy(mut r: Vec<f64>, energies: &[f64]) -> f64 {
    r.sort_by(|a, b| b.total_cmp(a));
    r.iter().zip(energies).map(|(p, e)| p * e).sum()
}

/// `Tr(π H)` from the spectrum of `ρ` alone.
pub fn passive_energy(rho: &DensityMatrix, h: &Hamiltonian) -> Result<f64> {
    check_dim(rho, h)?;
    Ok(pair_energy(rho.spectrum(), h.energies()))
}

/// Passive energy of `M M† / Tr(M M†)`, using the smaller Gram matrix.
fn passive_energy_of_factor(m: &ComplexMatrix, h: &Hamiltonian) -> f64 {
    let g = if m.cols() < m.rows() { gram_rows(&m.adjoint()) } else { gram_rows(m) };
    let p = g.trace().re;
    let r: Vec<f64> = hermitian_eigvals(&g).expect("Gram matrix is Hermitian").into_iter().map(|x| (x / p).max(0.0)).collect();
    pair_energy(r, h.energies())
}

/// `W(ρ, H) = Tr(ρH) - Tr(πH)`; unclamped.
pub fn ergotropy(rho: &DensityMatrix, h: &Hamiltonian) -> Result<f64> {
    let passive = passive_energy(rho, h)?;
    let w = h.energy(rho) - passive;
    debug_assert!(w >= -1e-10, "negative ergotropy {w}");
    Ok(w)
}

/// Everything the known-state experiments report for one joint state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnownStateWork {
    pub energy: f64,
    pub ergotropy: f64,
    pub daemonic: f64,
    pub gain: f64,
}

pub fn known_state_work(joint: &Joint, h_s: &Hamiltonian, meas: &AncillaMeasurement) -> Result<KnownStateWork> {
    joint.check(meas)?;
    let rho_s = joint.system_state();
    check_dim(&rho_s, h_s)?;
    let energy = h_s.energy(&rho_s);
    let ergotropy = energy - passive_energy(&rho_s, h_s)?;
    let conditional_passive: f64 = match &joint.state {
        JointState::Pure(psi) => conditional_factors(psi, joint, meas)
            .iter()
            .map(|m| {
                let p: f64 = m.as_slice().iter().map(|z| z.norm_sqr()).sum();
                if p < MIN_OUTCOME_PROB {
                    0.0
                } else {
                    p * passive_energy_of_factor(m, h_s)
                }
            })
            .sum(),
        JointState::Mixed(_) => {
            let mut acc = 0.0;
            for c in conditional_states(joint, meas)? {
                if let Some(rho) = c.state {
                    acc += c.probability * passive_energy(&rho, h_s)?;
                }
            }
            acc
        }
    };
    let daemonic = energy - conditional_passive;
    Ok(KnownStateWork { energy, ergotropy, daemonic, gain: daemonic - ergotropy })
}

/// `Tr(ρ_S H_S) - Σ_a p_a Tr(π_{S|a} H_S)`
pub fn daemonic_ergotropy(joint: &Joint, h_s: &Hamiltonian, meas: &AncillaMeasurement) -> Result<f64> {
    Ok(known_state_work(joint, h_s, meas)?.daemonic)
}

/// `δW`: daemonic minus plain ergotropy of `ρ_S`.
pub fn work_gain(joint: &Joint, h_s: &Hamiltonian, meas: &AncillaMeasurement) -> Result<f64> {
    Ok(known_state_work(joint, h_s, meas)?.gain)
}
