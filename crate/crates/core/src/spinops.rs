//! Angular-momentum and Pauli operators, and the closed-form exponentials
//! the Floquet models are assembled from.
//!
//! Spin matrices live in the Dicke basis `|j, m⟩` ordered `m = j, j-1, …, -j`,
//! so `Jz = diag(j, …, -j)` and index `k` carries `m = j - k`.

use crate::error::{Error, Result};
use crate::qcore::{hermitian_eig, kron, ComplexMatrix, C64, ONE, ZERO};

/// Largest spin-1/2 chain [`embed_site`] will build.
pub const MAX_CHAIN: usize = 12;

/// A spin quantum number `j`, stored as the integer `2j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin(u32);

impl Spin {
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 0.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(format!("{j} is not a non-negative half-integer")));
        }
        Ok(Self(twice.round() as u32))
    }

    pub const fn from_twice(twice_j: u32) -> Self {
        Self(twice_j)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    /// `m = j, j-1, …, -j`
    pub fn m_values(self) -> Vec<f64> {
        let j = self.value();
        (0..self.dim()).map(|k| j - k as f64).collect()
    }
}

impl serde::Serialize for Spin {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> serde::Deserialize<'de> for Spin {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let j = f64::deserialize(deserializer)?;
        Spin::new(j).map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for Spin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub spin: Spin,
    pub jz: ComplexMatrix,
    pub jy: ComplexMatrix,
    pub jplus: ComplexMatrix,
    pub jminus: ComplexMatrix,
}

impl SpinOperators {
    pub fn jx(&self) -> ComplexMatrix {
        (&self.jplus + &self.jminus).scale_real(0.5)
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }
}

pub fn spin_operators(spin: Spin) -> SpinOperators {
    let j = spin.value();
    let d = spin.dim();
    let m = spin.m_values();
    let jz = ComplexMatrix::from_real_diag(&m);
    let mut jplus = ComplexMatrix::zeros(d, d);
    for k in 1..d {
        // J+ |j, m_k⟩ = √(j(j+1) - m_k(m_k+1)) |j, m_k + 1⟩, and m_k + 1 sits at k - 1
        jplus[(k - 1, k)] = C64::new((j * (j + 1.0) - m[k] * (m[k] + 1.0)).sqrt(), 0.0);
    }
    let jminus = jplus.adjoint();
    let jy = (&jplus - &jminus).scale(C64::new(0.0, -0.5));
    SpinOperators { spin, jz, jy, jplus, jminus }
}

/// `exp(-i α Jy)` via the eigendecomposition of `Jy`.
pub fn rotation_y(spin: Spin, alpha: f64) -> ComplexMatrix {
    if spin.dim() == 1 {
        return ComplexMatrix::identity(1);
    }
    let ops = spin_operators(spin);
    let eig = hermitian_eig(&ops.jy).expect("Jy is Hermitian");
    let d = spin.dim();
    let phases: Vec<C64> = eig.values.iter().map(|&v| C64::from_polar(1.0, -alpha * v)).collect();
    let v = &eig.vectors;
    ComplexMatrix::from_fn(d, d, |i, k| (0..d).map(|l| v[(i, l)] * phases[l] * v[(k, l)].conj()).sum())
}

/// `diag(exp(-i · prefactor · values_k))`
pub fn diagonal_phase(values: &[f64], prefactor: f64) -> ComplexMatrix {
    let phases: Vec<C64> = values.iter().map(|&v| C64::from_polar(1.0, -prefactor * v)).collect();
    ComplexMatrix::from_diag(&phases)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_vec(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&[1.0, -1.0])
}

/// `exp(-i m (cos θ σx + sin θ σz)) = cos m · I - i sin m (cos θ σx + sin θ σz)`.
pub fn kick_site_unitary(m_strength: f64, theta: f64) -> ComplexMatrix {
    let (s, c) = m_strength.sin_cos();
    let (st, ct) = theta.sin_cos();
    let mi = C64::new(0.0, -s);
    ComplexMatrix::from_vec(
        2,
        2,
        vec![C64::new(c, 0.0) + mi * st, mi * ct, mi * ct, C64::new(c, 0.0) - mi * st],
    )
    .unwrap()
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` at 1-based `site`; site 1 is the most
/// significant factor.
pub fn embed_site(op: &ComplexMatrix, site: usize, chain_len: usize) -> Result<ComplexMatrix> {
    if op.rows() != 2 || op.cols() != 2 {
        return Err(Error::DimensionMismatch(format!("site operator must be 2x2, got {}x{}", op.rows(), op.cols())));
    }
    if chain_len == 0 || chain_len > MAX_CHAIN {
        return Err(Error::OutOfRange(format!("chain length {chain_len} not in 1..={MAX_CHAIN}")));
    }
    if site == 0 || site > chain_len {
        return Err(Error::OutOfRange(format!("site {site} not in 1..={chain_len}")));
    }
    let left = ComplexMatrix::identity(1 << (site - 1));
    let right = ComplexMatrix::identity(1 << (chain_len - site));
    kron(&kron(&left, op)?, &right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn factorial(n: i64) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Wigner small-d matrix element `d^j_{m' m}(β)` by the explicit sum.
    fn wigner_d(j: f64, mp: f64, m: f64, beta: f64) -> f64 {
        let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
        let pre = (factorial((j + mp) as i64) * factorial((j - mp) as i64) * factorial((j + m) as i64) * factorial((j - m) as i64)).sqrt();
        let mut acc = 0.0;
        for k in 0..=(2.0 * j) as i64 {
            let a = (j + m) as i64 - k;
            let b = k;
            let cc = (j - mp) as i64 - k;
            let dd = (mp - m) as i64 + k;
            if a < 0 || cc < 0 || dd < 0 {
                continue;
            }
            let sign = if dd % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * c.powi((2.0 * j) as i32 + (m - mp) as i32 - 2 * k as i32) * s.powi((mp - m) as i32 + 2 * k as i32)
                / (factorial(a) * factorial(b) * factorial(cc) * factorial(dd));
        }
        pre * acc
    }

    #[test]
    fn spin_half_matches_pauli() {
        let ops = spin_operators(Spin::new(0.5).unwrap());
        assert_eq!(ops.jz, ComplexMatrix::from_real_diag(&[0.5, -0.5]));
        assert!(ops.jy.max_abs_diff(&pauli_y().scale_real(0.5)) < 1e-15);
        assert!(ops.jx().max_abs_diff(&pauli_x().scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn spin_one_matrices() {
        let ops = spin_operators(Spin::new(1.0).unwrap());
        assert_eq!(ops.jz, ComplexMatrix::from_real_diag(&[1.0, 0.0, -1.0]));
        let r2 = 2f64.sqrt();
        assert!((ops.jplus[(0, 1)].re - r2).abs() < 1e-15);
        assert!((ops.jplus[(1, 2)].re - r2).abs() < 1e-15);
        assert_eq!(ops.jplus[(1, 0)], ZERO);
    }

    #[test]
    fn ladder_commutators_and_casimir() {
        for twice in [1u32, 2, 3, 19] {
            let ops = spin_operators(Spin::from_twice(twice));
            let cp = ops.jz.commutator(&ops.jplus);
            let cm = ops.jz.commutator(&ops.jminus);
            assert!(cp.max_abs_diff(&ops.jplus) < 1e-10);
            assert!(cm.max_abs_diff(&ops.jminus.scale_real(-1.0)) < 1e-10);
            assert!(ops.jy.hermiticity_error() < 1e-12);
            let jx = ops.jx();
            let cas = &(&jx.dot(&jx) + &ops.jy.dot(&ops.jy)) + &ops.jz.dot(&ops.jz);
            let j = ops.spin.value();
            assert!(cas.max_abs_diff(&ComplexMatrix::identity(ops.dim()).scale_real(j * (j + 1.0))) < 1e-9);
        }
    }

    #[test]
    fn rejects_non_half_integer() {
        assert!(Spin::new(0.3).is_err());
        assert!(Spin::new(-1.0).is_err());
        assert_eq!(Spin::new(9.5).unwrap().dim(), 20);
        assert_eq!(Spin::new(9.5).unwrap().to_string(), "19/2");
    }

    #[test]
    fn rotation_half_angle_qubit() {
        let u = rotation_y(Spin::new(0.5).unwrap(), PI / 2.0);
        let s = FRAC_1_SQRT_2;
        let expected = ComplexMatrix::from_vec(2, 2, vec![C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn rotation_identity_inverse_and_unitarity() {
        for twice in [0u32, 1, 2, 5, 19] {
            let s = Spin::from_twice(twice);
            assert!(rotation_y(s, 0.0).max_abs_diff(&ComplexMatrix::identity(s.dim())) < 1e-12);
            let u = rotation_y(s, 0.7);
            assert!(u.unitarity_error() < 1e-10);
            assert!(u.dot(&rotation_y(s, -0.7)).max_abs_diff(&ComplexMatrix::identity(s.dim())) < 1e-10);
        }
    }

    #[test]
    fn rotation_matches_wigner_d() {
        for (twice, beta) in [(2u32, PI / 2.0), (3, 0.9), (4, 2.3)] {
            let s = Spin::from_twice(twice);
            let u = rotation_y(s, beta);
            let m = s.m_values();
            for (a, &mp) in m.iter().enumerate() {
                for (b, &mm) in m.iter().enumerate() {
                    let d = wigner_d(s.value(), mp, mm, beta);
                    assert!((u[(a, b)] - C64::new(d, 0.0)).norm() < 1e-12, "j={s} ({mp},{mm})");
                }
            }
        }
        // j = 1 at β = π/2: the ¼/½-valued pattern
        let u = rotation_y(Spin::from_twice(2), PI / 2.0);
        assert!((u[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((u[(0, 1)].re + FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(u[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn diagonal_phase_cases() {
        assert_eq!(diagonal_phase(&[1.0, 2.0, 3.0], 0.0), ComplexMatrix::identity(3));
        let d = diagonal_phase(&[1.0, 4.0], PI);
        assert!(d.max_abs_diff(&ComplexMatrix::from_real_diag(&[-1.0, 1.0])) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vals: Vec<f64> = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
        for z in diagonal_phase(&vals, rng.random_range(-3.0..3.0)).diag() {
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn kick_unitary_cases() {
        let x = kick_site_unitary(PI / 2.0, 0.0);
        assert!(x.max_abs_diff(&pauli_x().scale(C64::new(0.0, -1.0))) < 1e-15);
        let m = 0.37;
        let z = kick_site_unitary(m, PI / 2.0);
        let expected = ComplexMatrix::from_diag(&[C64::from_polar(1.0, -m), C64::from_polar(1.0, m)]);
        assert!(z.max_abs_diff(&expected) < 1e-15);
        let full = kick_site_unitary(PI, 0.4);
        assert!(full.max_abs_diff(&ComplexMatrix::identity(2).scale_real(-1.0)) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (m, t) = (rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let u = kick_site_unitary(m, t);
            assert!(u.unitarity_error() < 1e-10);
            assert!(u.max_abs_diff(&kick_site_unitary(m + 2.0 * PI, t)) < 1e-12);
        }
    }

    #[test]
    fn embed_site_placement_and_commutation() {
        assert_eq!(embed_site(&pauli_z(), 1, 1).unwrap(), pauli_z());
        assert_eq!(embed_site(&pauli_z(), 2, 2).unwrap(), ComplexMatrix::from_real_diag(&[1.0, -1.0, 1.0, -1.0]));
        assert!(embed_site(&pauli_z(), 0, 3).is_err());
        assert!(embed_site(&pauli_z(), 4, 3).is_err());
        assert!(embed_site(&pauli_z(), 1, 13).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = kick_site_unitary(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
            let b = kick_site_unitary(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
            let (i, mut j) = (rng.random_range(1..=4), rng.random_range(1..=4));
            if i == j {
                j = i % 4 + 1;
            }
            let ea = embed_site(&a, i, 4).unwrap();
            let eb = embed_site(&b, j, 4).unwrap();
            assert!(ea.commutator(&eb).max_abs() < 1e-14);
        }
    }
}
