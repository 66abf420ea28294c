//! Coarse-grained measurements, reconstruction and observational entropy, and
//! the two unknown-state work protocols.
//!
//! A reconstructed state `Σ_i p_i Π_i / V_i` is diagonal in the measured basis,
//! so both protocols only need the basis populations of each conditional state.

use crate::error::{Error, Result};
use crate::qcore::{hermitian_eigvals, ComplexMatrix, DensityMatrix};
use crate::workcore::{conditional_states, AncillaMeasurement, Hamiltonian, Joint};

const BASIS_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CoarseGraining {
    basis: ComplexMatrix,
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
}

impl CoarseGraining {
    /// `basis` columns are the measured states; `cells` partition `0..d`.
    pub fn new(basis: ComplexMatrix, cells: Vec<Vec<usize>>) -> Result<Self> {
        let d = basis.rows();
        if !basis.is_square() || d == 0 {
            return Err(Error::InvalidCoarseGraining("basis must be a non-empty square matrix".into()));
        }
        let gram = basis.adjoint().dot(&basis);
        let err = gram.max_abs_diff(&ComplexMatrix::identity(d));
        if err > BASIS_TOL {
            return Err(Error::InvalidCoarseGraining(format!("basis is not orthonormal (error {err:e})")));
        }
        let mut cell_of = vec![usize::MAX; d];
        for (c, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::InvalidCoarseGraining(format!("cell {c} is empty")));
            }
            for &k in cell {
                if k >= d {
                    return Err(Error::InvalidCoarseGraining(format!("index {k} outside 0..{d}")));
                }
                if cell_of[k] != usize::MAX {
                    return Err(Error::InvalidCoarseGraining(format!("index {k} appears in two cells")));
                }
                cell_of[k] = c;
            }
        }
        if let Some(k) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidCoarseGraining(format!("index {k} is in no cell")));
        }
        Ok(Self { basis, cells, cell_of })
    }

    /// `d/n` consecutive cells of size `n` over the basis ordering.
    pub fn uniform(d: usize, n: usize, basis: ComplexMatrix) -> Result<Self> {
        if basis.rows() != d {
            return Err(Error::DimensionMismatch(format!("basis of dim {} for d = {d}", basis.rows())));
        }
        if n == 0 || d % n != 0 {
            return Err(Error::InvalidCoarseGraining(format!("cell size {n} does not divide {d}")));
        }
        Self::new(basis, (0..d / n).map(|c| (c * n..(c + 1) * n).collect()).collect())
    }

    /// `χ_n` over the energy eigenbasis of `h`, ascending energy.
    pub fn energy_cells(h: &Hamiltonian, n: usize) -> Result<Self> {
        Self::uniform(h.dim(), n, h.eigenvectors().clone())
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn volumes(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    fn check(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!("state dim {} vs coarse-graining dim {}", rho.dim(), self.dim())));
        }
        Ok(())
    }

    /// `⟨b_k|ρ|b_k⟩` for every basis vector.
    pub fn basis_populations(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.check(rho)?;
        let d = self.dim();
        let m = rho.matrix();
        Ok((0..d)
            .map(|k| {
                let b = self.basis.column(k);
                let mb = m.mul_vec(&b);
                b.iter().zip(&mb).map(|(x, y)| (x.conj() * y).re).sum::<f64>().max(0.0)
            })
            .collect())
    }

    fn cell_sums(&self, pops: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|cell| cell.iter().map(|&k| pops[k]).sum()).collect()
    }

    /// Per-basis-vector eigenvalue `p_i / V_i` of the reconstructed state.
    fn spread(&self, cell_probs: &[f64]) -> Vec<f64> {
        self.cell_of.iter().map(|&c| cell_probs[c] / self.cells[c].len() as f64).collect()
    }

    fn entropy_of(&self, cell_probs: &[f64]) -> f64 {
        cell_probs
            .iter()
            .zip(&self.cells)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, cell)| -p * (p / cell.len() as f64).ln())
            .sum()
    }

    fn diag_in_basis(&self, values: &[f64]) -> ComplexMatrix {
        let d = self.dim();
        let b = &self.basis;
        ComplexMatrix::from_fn(d, d, |i, j| (0..d).map(|k| b[(i, k)] * b[(j, k)].conj() * values[k]).sum())
    }
}

pub fn uniform_coarse_graining(d: usize, n: usize, basis: ComplexMatrix) -> Result<CoarseGraining> {
    CoarseGraining::uniform(d, n, basis)
}

/// `p_i = Tr(Π_i ρ)`
pub fn coarse_probabilities(rho: &DensityMatrix, cg: &CoarseGraining) -> Result<Vec<f64>> {
    Ok(cg.cell_sums(&cg.basis_populations(rho)?))
}

/// `ρ^rc = Σ_i p_i Π_i / V_i`
pub fn reconstruct(rho: &DensityMatrix, cg: &CoarseGraining) -> Result<DensityMatrix> {
    let p = coarse_probabilities(rho, cg)?;
    Ok(DensityMatrix::from_matrix_unchecked(cg.diag_in_basis(&cg.spread(&p))))
}

/// `H_χ(ρ) = -Σ_i p_i ln(p_i / V_i)`
pub fn observational_entropy(rho: &DensityMatrix, cg: &CoarseGraining) -> Result<f64> {
    Ok(cg.entropy_of(&coarse_probabilities(rho, cg)?))
}

/// `F(ρ^rc, ρ)`. With `σ = ρ^rc` diagonal in the measured basis,
/// `√σ ρ √σ` is formed there directly.
pub fn reconstruction_fidelity(rho: &DensityMatrix, cg: &CoarseGraining) -> Result<f64> {
    let p = coarse_probabilities(rho, cg)?;
    let s: Vec<f64> = cg.spread(&p).into_iter().map(f64::sqrt).collect();
    let b = cg.basis();
    let rb = b.adjoint().dot(rho.matrix()).dot(b);
    let d = cg.dim();
    let x = ComplexMatrix::from_fn(d, d, |i, j| rb[(i, j)] * (s[i] * s[j]));
    let x = ComplexMatrix::from_fn(d, d, |i, j| (x[(i, j)] + x[(j, i)].conj()) * 0.5);
    let root: f64 = hermitian_eigvals(&x)?.into_iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

fn sorted_desc_with_index(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

fn passive_energy_of_spectrum(values: &[f64], energies: &[f64]) -> f64 {
    sorted_desc_with_index(values).iter().zip(energies).map(|(&k, e)| values[k] * e).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolWork {
    pub work: f64,
    pub oe: f64,
}

/// Everything the unknown-state experiment reports for one joint state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnknownStateWork {
    pub energy: f64,
    /// Reconstruct each conditional state, then extract.
    pub protocol1: ProtocolWork,
    /// Average the reconstructions, then extract once.
    pub protocol2: ProtocolWork,
    /// OE of the most probable outcome's conditional state.
    pub oe_most_probable: f64,
    /// Protocol-1 unitaries applied to the true conditional states.
    pub applied_work: f64,
    /// `Σ_a p_a F(ρ^rc_{S|a}, ρ_{S|a})`
    pub fidelity: f64,
}

fn check_joint(joint: &Joint, h_s: &Hamiltonian, cg: &CoarseGraining) -> Result<()> {
    if h_s.dim() != joint.d_system() || cg.dim() != joint.d_system() {
        return Err(Error::DimensionMismatch(format!(
            "system dim {} vs Hamiltonian dim {} and coarse-graining dim {}",
            joint.d_system(),
            h_s.dim(),
            cg.dim()
        )));
    }
    Ok(())
}

pub fn unknown_state_work(
    joint: &Joint,
    h_s: &Hamiltonian,
    meas: &AncillaMeasurement,
    cg: &CoarseGraining,
    with_fidelity: bool,
) -> Result<UnknownStateWork> {
    check_joint(joint, h_s, cg)?;
    let energies = h_s.energies();
    let d = cg.dim();
    let mut energy = 0.0;
    let mut passive1 = 0.0;
    let mut applied = 0.0;
    let mut oe1 = 0.0;
    let mut fid = 0.0;
    let mut best = (-1.0, 0.0);
    let mut avg_pops = vec![0.0; d];
    for c in conditional_states(joint, meas)? {
        let Some(rho) = c.state else { continue };
        let p = c.probability;
        let pops = cg.basis_populations(&rho)?;
        let cells = cg.cell_sums(&pops);
        let q = cg.spread(&cells);
        let order = sorted_desc_with_index(&q);
        energy += p * h_s.energy(&rho);
        passive1 += p * order.iter().zip(energies).map(|(&k, e)| q[k] * e).sum::<f64>();
        applied += p * order.iter().zip(energies).map(|(&k, e)| pops[k] * e).sum::<f64>();
        let oe = cg.entropy_of(&cells);
        oe1 += p * oe;
        if p > best.0 {
            best = (p, oe);
        }
        if with_fidelity {
            fid += p * reconstruction_fidelity(&rho, cg)?;
        }
        for (a, x) in avg_pops.iter_mut().zip(&pops) {
            *a += p * x;
        }
    }
    let avg_cells = cg.cell_sums(&avg_pops);
    let passive2 = passive_energy_of_spectrum(&cg.spread(&avg_cells), energies);
    Ok(UnknownStateWork {
        energy,
        protocol1: ProtocolWork { work: energy - passive1, oe: oe1 },
        protocol2: ProtocolWork { work: energy - passive2, oe: cg.entropy_of(&avg_cells) },
        oe_most_probable: best.1,
        applied_work: energy - applied,
        fidelity: if with_fidelity { fid } else { f64::NAN },
    })
}

/// `W^rc = Tr(ρ_S H_S) - Σ_a p_a Tr(π^rc_{S|a} H_S)`, with the outcome-averaged OE.
pub fn protocol1_work(joint: &Joint, h_s: &Hamiltonian, meas: &AncillaMeasurement, cg: &CoarseGraining) -> Result<ProtocolWork> {
    Ok(unknown_state_work(joint, h_s, meas, cg, false)?.protocol1)
}

/// `W̄^rc = Tr(ρ_S H_S) - Tr(π^rc_S H_S)`, with the OE of the averaged reconstruction.
pub fn protocol2_work(joint: &Joint, h_s: &Hamiltonian, meas: &AncillaMeasurement, cg: &CoarseGraining) -> Result<ProtocolWork> {
    Ok(unknown_state_work(joint, h_s, meas, cg, false)?.protocol2)
}

/// Energy after the protocol-1 unitary for each outcome is applied to the true
/// conditional state. Ties inside a cell map to energies in basis order.
pub fn protocol1_applied_work(joint: &Joint, h_s: &Hamiltonian, meas: &AncillaMeasurement, cg: &CoarseGraining) -> Result<f64> {
    Ok(unknown_state_work(joint, h_s, meas, cg, false)?.applied_work)
}
