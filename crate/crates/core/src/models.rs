//! Period-1 Floquet operators for the kicked top and the kicked Ising chain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{kron_all, permute_factors, ComplexMatrix, PureState, MAX_DIM};
use crate::spinops::{diagonal_phase, kick_site_unitary, rotation_y, Spin, MAX_CHAIN};

const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorRole {
    System,
    Ancilla,
    Auxiliary,
}

/// A one-period unitary together with its tensor-factor structure.
///
/// `symmetry`, when present, is a unitary commuting with `u` used to split
/// the spectrum into sectors.
#[derive(Clone, Debug)]
pub struct FloquetOperator {
    u: ComplexMatrix,
    factor_dims: Vec<usize>,
    labels: Vec<FactorRole>,
    symmetry: Option<ComplexMatrix>,
}

impl FloquetOperator {
    pub fn new(u: ComplexMatrix, factor_dims: Vec<usize>, labels: Vec<FactorRole>) -> Result<Self> {
        if factor_dims.len() != labels.len() || factor_dims.is_empty() {
            return Err(Error::DimensionMismatch("one role label per factor required".into()));
        }
        let prod: usize = factor_dims.iter().product();
        if !u.is_square() || u.rows() != prod {
            return Err(Error::DimensionMismatch(format!(
                "factor dims {factor_dims:?} do not match a {}x{} operator",
                u.rows(),
                u.cols()
            )));
        }
        let err = u.unitarity_error();
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self { u, factor_dims, labels, symmetry: None })
    }

    pub fn with_symmetry(mut self, symmetry: ComplexMatrix) -> Result<Self> {
        if symmetry.rows() != self.dim() || !symmetry.is_square() {
            return Err(Error::DimensionMismatch("symmetry operator dimension".into()));
        }
        let comm = self.u.commutator(&symmetry).max_abs();
        if comm > 1e-9 {
            return Err(Error::InvalidState(format!("symmetry does not commute with U ({comm:e})")));
        }
        self.symmetry = Some(symmetry);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.u.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn labels(&self) -> &[FactorRole] {
        &self.labels
    }

    pub fn symmetry(&self) -> Option<&ComplexMatrix> {
        self.symmetry.as_ref()
    }

    /// Product of the dims of every factor with `role` (1 if none).
    pub fn role_dim(&self, role: FactorRole) -> usize {
        self.factor_dims.iter().zip(&self.labels).filter(|(_, &l)| l == role).map(|(&d, _)| d).product()
    }

    /// `[d_S, d_A, d_B]`
    pub fn canonical_dims(&self) -> [usize; 3] {
        [
            self.role_dim(FactorRole::System),
            self.role_dim(FactorRole::Ancilla),
            self.role_dim(FactorRole::Auxiliary),
        ]
    }

    /// Factor indices ordered system, ancilla, auxiliary (stable within a role).
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.labels.len());
        for role in [FactorRole::System, FactorRole::Ancilla, FactorRole::Auxiliary] {
            order.extend((0..self.labels.len()).filter(|&i| self.labels[i] == role));
        }
        order
    }

    /// Reorders a state in the operator's native factor order into S ⊗ A ⊗ B.
    pub fn to_canonical(&self, psi: &PureState) -> Result<PureState> {
        permute_factors(psi, &self.factor_dims, &self.canonical_order())
    }

    /// Inverse of [`to_canonical`](Self::to_canonical).
    pub fn from_canonical(&self, psi: &PureState) -> Result<PureState> {
        let order = self.canonical_order();
        let canon_dims: Vec<usize> = order.iter().map(|&o| self.factor_dims[o]).collect();
        let mut inverse = vec![0; order.len()];
        for (k, &o) in order.iter().enumerate() {
            inverse[o] = k;
        }
        permute_factors(psi, &canon_dims, &inverse)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickedTopParams {
    pub j_system: Spin,
    pub j_ancilla: Spin,
    /// Present only for the tripartite variant.
    pub j_aux: Option<Spin>,
    pub kappa: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for KickedTopParams {
    fn default() -> Self {
        Self {
            j_system: Spin::from_twice(19),
            j_ancilla: Spin::from_twice(2),
            j_aux: None,
            kappa: 0.0,
            alpha: PI / 2.0,
            c1: 1.0,
            c2: 0.0,
        }
    }
}

impl KickedTopParams {
    pub fn tripartite(kappa: f64, c1: f64, c2: f64) -> Self {
        Self { j_aux: Some(Spin::from_twice(2)), kappa, c1, c2, ..Self::default() }
    }
}

fn check_cap(dim: usize) -> Result<()> {
    if dim > MAX_DIM {
        return Err(Error::DimensionOverflow { dim, max: MAX_DIM });
    }
    Ok(())
}

/// `Σ_f w_f m_f` over every joint Dicke index, row-major.
fn weighted_m_sums(spins: &[(Spin, f64)]) -> Vec<f64> {
    let mut sums = vec![0.0];
    for &(s, w) in spins {
        let m = s.m_values();
        sums = sums.iter().flat_map(|&acc| m.iter().map(move |&mk| acc + w * mk)).collect();
    }
    sums
}

fn kicked_top_operator(spins: &[(Spin, f64)], kappa: f64, alpha: f64, labels: Vec<FactorRole>) -> Result<FloquetOperator> {
    if !kappa.is_finite() || !alpha.is_finite() {
        return Err(Error::config("kappa", "kick strength and precession angle must be finite"));
    }
    let dims: Vec<usize> = spins.iter().map(|(s, _)| s.dim()).collect();
    check_cap(dims.iter().product())?;
    let j_total: f64 = spins.iter().map(|(s, _)| s.value()).sum();
    if j_total == 0.0 {
        return Err(Error::InvalidSpin("total spin j must be positive".into()));
    }
    let torsion: Vec<f64> = weighted_m_sums(spins).into_iter().map(|x| x * x).collect();
    let d = diagonal_phase(&torsion, kappa / (2.0 * j_total));
    let rotations: Vec<ComplexMatrix> = spins.iter().map(|&(s, _)| rotation_y(s, alpha)).collect();
    let r = kron_all(&rotations)?;
    // D is diagonal: U = D·R scales rows of R
    let diag = d.diag();
    let n = r.rows();
    let u = ComplexMatrix::from_fn(n, n, |i, j| diag[i] * r[(i, j)]);
    let parity: Vec<ComplexMatrix> = spins.iter().map(|&(s, _)| rotation_y(s, PI)).collect();
    FloquetOperator::new(u, dims, labels)?.with_symmetry(kron_all(&parity)?)
}

/// `U = exp(-i κ/(2j) (J_Sz + J_Az)²) · exp(-i α (J_Sy + J_Ay))`, `j = j_S + j_A`.
pub fn build_kicked_top(params: &KickedTopParams) -> Result<FloquetOperator> {
    if params.j_aux.is_some() {
        return Err(Error::config("j_aux", "bipartite kicked top takes no auxiliary spin"));
    }
    kicked_top_operator(
        &[(params.j_system, 1.0), (params.j_ancilla, 1.0)],
        params.kappa,
        params.alpha,
        vec![FactorRole::System, FactorRole::Ancilla],
    )
}

/// Torsion exponent `(J_Sz + c1 J_Az + c2 J_Bz)²` with `j = j_S + j_A + j_B`;
/// all three spins precess by the same `α`.
pub fn build_kicked_top_tripartite(params: &KickedTopParams) -> Result<FloquetOperator> {
    let aux = params.j_aux.ok_or_else(|| Error::config("j_aux", "tripartite kicked top needs an auxiliary spin"))?;
    kicked_top_operator(
        &[(params.j_system, 1.0), (params.j_ancilla, params.c1), (aux, params.c2)],
        params.kappa,
        params.alpha,
        vec![FactorRole::System, FactorRole::Ancilla, FactorRole::Auxiliary],
    )
}

/// Default tilts `{7,7,8,8,8,8,7,7}·π/32`.
pub fn default_tilts() -> Vec<f64> {
    [7.0, 7.0, 8.0, 8.0, 8.0, 8.0, 7.0, 7.0].iter().map(|t| t * PI / 32.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub length: usize,
    pub coupling: f64,
    pub m_strength: f64,
    pub tilts: Vec<f64>,
    /// 1-based sites forming the measured ancilla.
    pub ancilla_sites: Vec<usize>,
    /// 1-based sites forming the unmeasured auxiliary (tripartite only).
    pub aux_sites: Vec<usize>,
    /// Weights `(c1, c2)` on the first and last bonds.
    pub edge_couplings: Option<(f64, f64)>,
}

impl Default for IsingParams {
    fn default() -> Self {
        Self {
            length: 8,
            coupling: 0.8,
            m_strength: 0.0,
            tilts: default_tilts(),
            ancilla_sites: vec![1, 8],
            aux_sites: Vec::new(),
            edge_couplings: None,
        }
    }
}

impl IsingParams {
    /// A = site 1, B = site L, S = the interior; bond (1,2) carries `C·c1`,
    /// bond (L-1,L) carries `C·c2`.
    pub fn tripartite(m_strength: f64, c1: f64, c2: f64) -> Self {
        let base = Self::default();
        let l = base.length;
        Self { m_strength, ancilla_sites: vec![1], aux_sites: vec![l], edge_couplings: Some((c1, c2)), ..base }
    }

    pub fn bond_weights(&self) -> Vec<f64> {
        let n = self.length.saturating_sub(1);
        let mut g = vec![1.0; n];
        if let Some((c1, c2)) = self.edge_couplings {
            if n >= 1 {
                g[0] = c1;
                g[n - 1] = c2;
            }
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.length;
        if l == 0 || l > MAX_CHAIN {
            return Err(Error::config("length", format!("chain length {l} not in 1..={MAX_CHAIN}")));
        }
        if self.tilts.len() != l {
            return Err(Error::config("tilts", format!("{} tilts for {l} sites", self.tilts.len())));
        }
        for &s in self.ancilla_sites.iter().chain(&self.aux_sites) {
            if s == 0 || s > l {
                return Err(Error::config("ancilla_sites", format!("site {s} not in 1..={l}")));
            }
        }
        let mut all: Vec<usize> = self.ancilla_sites.iter().chain(&self.aux_sites).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("ancilla_sites", "ancilla and auxiliary sites must be distinct"));
        }
        if all.len() >= l {
            return Err(Error::config("ancilla_sites", "no sites left for the system"));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<FactorRole> {
        (1..=self.length)
            .map(|s| {
                if self.ancilla_sites.contains(&s) {
                    FactorRole::Ancilla
                } else if self.aux_sites.contains(&s) {
                    FactorRole::Auxiliary
                } else {
                    FactorRole::System
                }
            })
            .collect()
    }
}

/// `σ_iz` eigenvalue (+1 for bit 0) of site `i` (0-based from the most
/// significant end) in basis index `x`.
pub(crate) fn site_sign(x: usize, site0: usize, chain_len: usize) -> f64 {
    if (x >> (chain_len - 1 - site0)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Site-reversal permutation `|s_1 … s_L⟩ → |s_L … s_1⟩`.
pub fn reflection_operator(chain_len: usize) -> ComplexMatrix {
    let d = 1usize << chain_len;
    let mut p = ComplexMatrix::zeros(d, d);
    for x in 0..d {
        let mut y = 0usize;
        for b in 0..chain_len {
            if (x >> b) & 1 == 1 {
                y |= 1 << (chain_len - 1 - b);
            }
        }
        p[(y, x)] = crate::qcore::ONE;
    }
    p
}

fn is_palindrome(v: &[f64]) -> bool {
    v.iter().zip(v.iter().rev()).all(|(a, b)| (a - b).abs() <= 1e-15)
}

/// `U = e^{-iH_free/2} e^{-iH_kick} e^{-iH_free/2}` with open boundaries.
pub fn build_kicked_ising(params: &IsingParams) -> Result<FloquetOperator> {
    params.validate()?;
    let l = params.length;
    let d = 1usize << l;
    let g = params.bond_weights();
    let free: Vec<f64> = (0..d)
        .map(|x| {
            params.coupling * (0..l - 1).map(|i| g[i] * site_sign(x, i, l) * site_sign(x, i + 1, l)).sum::<f64>()
        })
        .collect();
    let half = diagonal_phase(&free, 0.5).diag();
    let kicks: Vec<ComplexMatrix> = params.tilts.iter().map(|&t| kick_site_unitary(params.m_strength, t)).collect();
    let k = kron_all(&kicks)?;
    let u = ComplexMatrix::from_fn(d, d, |a, b| half[a] * k[(a, b)] * half[b]);
    let op = FloquetOperator::new(u, vec![2; l], params.labels())?;
    if is_palindrome(&params.tilts) && is_palindrome(&g) {
        op.with_symmetry(reflection_operator(l))
    } else {
        Ok(op)
    }
}

/// `t` successive applications of the Floquet operator.
pub fn evolve(state: &PureState, u: &FloquetOperator, t: usize) -> Result<PureState> {
    if state.dim() != u.dim() {
        return Err(Error::DimensionMismatch(format!("state dim {} vs operator dim {}", state.dim(), u.dim())));
    }
    let mut amps = state.amplitudes().to_vec();
    for _ in 0..t {
        amps = u.matrix().mul_vec(&amps);
    }
    Ok(PureState::from_vec_unchecked(amps))
}
