//! Entanglement and spectral chaos diagnostics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::models::FloquetOperator;
use crate::qcore::{hermitian_eig, ComplexMatrix, DensityMatrix, C64};

const MODULUS_TOL: f64 = 1e-9;
const MIN_SPACING: f64 = 1e-12;

/// `1 - Tr ρ²`
pub fn linear_entropy(rho: &DensityMatrix) -> f64 {
    1.0 - rho.purity()
}

/// Haar average of the linear entropy of a `d_s`-dim reduction of a random
/// pure state on `d_s · d_a` dimensions.
pub fn s_rmt(d_s: usize, d_a: usize) -> f64 {
    let (s, a) = (d_s as f64, d_a as f64);
    1.0 - (s + a) / (1.0 + s * a)
}

/// Sorted spectrum. Eigenphases carry `period = Some(2π)` and are in `(-π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSample {
    pub values: Vec<f64>,
    pub period: Option<f64>,
    pub dim: usize,
    /// Symmetry eigenvalue of the sector, if resolved.
    pub sector: Option<C64>,
}

impl SpectralSample {
    pub fn from_phases(mut phases: Vec<f64>) -> Self {
        for p in phases.iter_mut() {
            *p = wrap_phase(*p);
        }
        phases.sort_by(f64::total_cmp);
        let dim = phases.len();
        Self { values: phases, period: Some(2.0 * PI), dim, sector: None }
    }

    /// Real levels without wrap-around (e.g. a Hermitian spectrum).
    pub fn from_levels(mut levels: Vec<f64>) -> Self {
        levels.sort_by(f64::total_cmp);
        let dim = levels.len();
        Self { values: levels, period: None, dim, sector: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn wrap_phase(p: f64) -> f64 {
    let mut x = p.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Eigenvalues of a unitary matrix from its complex Schur form.
pub fn unitary_eigenvalues(u: &ComplexMatrix) -> Result<Vec<C64>> {
    let err = u.unitarity_error();
    if err > 1e-9 {
        return Err(Error::NotUnitary(err));
    }
    let n = u.rows();
    if n == 1 {
        return Ok(vec![u[(0, 0)]]);
    }
    let schur = nalgebra::Schur::try_new(u.to_nalgebra(), f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
    let (_, t) = schur.unpack();
    let vals: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let worst = vals.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    if worst > MODULUS_TOL {
        return Err(Error::NotUnitary(worst));
    }
    Ok(vals)
}

pub fn eigenphases_of(u: &ComplexMatrix) -> Result<SpectralSample> {
    Ok(SpectralSample::from_phases(unitary_eigenvalues(u)?.iter().map(|z| z.arg()).collect()))
}

/// Full spectrum of one Floquet period.
pub fn eigenphases(u: &FloquetOperator) -> Result<SpectralSample> {
    eigenphases_of(u.matrix())
}

/// One sample per eigenvalue sector of the attached symmetry, or the full
/// spectrum when there is none.
pub fn sector_eigenphases(u: &FloquetOperator) -> Result<Vec<SpectralSample>> {
    let Some(p) = u.symmetry() else {
        return Ok(vec![eigenphases(u)?]);
    };
    let um = u.matrix();
    let d = um.rows();
    // a Hermitian function of P that separates its eigenvalues
    let re = (p + &p.adjoint()).scale_real(0.5);
    let im = (p - &p.adjoint()).scale(C64::new(0.0, -0.5));
    let eig = hermitian_eig(&(&re + &im.scale_real(0.618_033_988_749_895)))?;
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (k, &v) in eig.values.iter().enumerate() {
        match groups.last_mut() {
            Some((v0, ks)) if (v - *v0).abs() < 1e-6 => ks.push(k),
            _ => groups.push((v, vec![k])),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (_, ks) in groups {
        let v = ComplexMatrix::from_fn(d, ks.len(), |i, j| eig.vectors[(i, ks[j])]);
        let block = v.adjoint().dot(um).dot(&v);
        let leak = um.dot(&v).max_abs_diff(&v.dot(&block));
        if leak > 1e-8 {
            return Err(Error::Degenerate(format!("symmetry sector not invariant (leak {leak:e})")));
        }
        let label = v.column(0);
        let pv = p.mul_vec(&label);
        let lambda: C64 = label.iter().zip(&pv).map(|(a, b)| a.conj() * b).sum();
        let mut s = eigenphases_of(&block)?;
        s.sector = Some(lambda);
        out.push(s);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacingStats {
    pub mean: f64,
    /// Ratios that entered the mean.
    pub used: usize,
    /// Spacings below the degeneracy threshold.
    pub degenerate: usize,
}

fn spacings(sample: &SpectralSample) -> Vec<f64> {
    let v = &sample.values;
    let mut s: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(period) = sample.period {
        s.push(v[0] + period - v[v.len() - 1]);
    }
    s
}

/// Sum and count of consecutive-spacing ratios `min/max`, circular for phases.
pub fn spacing_ratio_stats(sample: &SpectralSample) -> Result<SpacingStats> {
    if sample.len() < 10 {
        return Err(Error::OutOfRange(format!("spacing ratio needs at least 10 levels, got {}", sample.len())));
    }
    let s = spacings(sample);
    let degenerate = s.iter().filter(|&&x| x < MIN_SPACING).count();
    let pairs = if sample.period.is_some() { s.len() } else { s.len() - 1 };
    let mut sum = 0.0;
    let mut used = 0;
    for i in 0..pairs {
        let (a, b) = (s[i], s[(i + 1) % s.len()]);
        if a < MIN_SPACING || b < MIN_SPACING {
            continue;
        }
        sum += a.min(b) / a.max(b);
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate("every spacing is degenerate".into()));
    }
    Ok(SpacingStats { mean: sum / used as f64, used, degenerate })
}

pub fn mean_spacing_ratio(sample: &SpectralSample) -> Result<f64> {
    Ok(spacing_ratio_stats(sample)?.mean)
}

/// Ratio mean pooled over several samples (e.g. symmetry sectors), each
/// ratio weighted equally. Samples shorter than 10 levels are skipped.
pub fn pooled_spacing_ratio(samples: &[SpectralSample]) -> Result<SpacingStats> {
    let mut sum = 0.0;
    let mut used = 0;
    let mut degenerate = 0;
    for s in samples.iter().filter(|s| s.len() >= 10) {
        let st = match spacing_ratio_stats(s) {
            Err(Error::Degenerate(_)) => continue,
            r => r?,
        };
        sum += st.mean * st.used as f64;
        used += st.used;
        degenerate += st.degenerate;
    }
    if used == 0 {
        return Err(Error::Degenerate("no sample has usable spacings".into()));
    }
    Ok(SpacingStats { mean: sum / used as f64, used, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_kicked_ising, build_kicked_top, IsingParams, KickedTopParams};
    use crate::qcore::{haar_state, haar_unitary, reduced_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn linear_entropy_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(linear_entropy(&haar_state(5, &mut rng).to_density()).abs() < 1e-12);
        assert!((linear_entropy(&DensityMatrix::maximally_mixed(4)) - 0.75).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        let bell = crate::qcore::PureState::new(vec![C64::new(s, 0.0), z, z, C64::new(s, 0.0)]).unwrap();
        assert!((linear_entropy(&reduced_state(&bell, &[2, 2], &[0]).unwrap()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn s_rmt_values() {
        assert!((s_rmt(20, 3) - 0.622_950_8).abs() < 1e-7);
        assert!((s_rmt(64, 4) - 0.735_408_5).abs() < 1e-7);
        assert!((s_rmt(2, 2) - 0.2).abs() < 1e-15);
        for ds in 2..30 {
            for da in 2..30 {
                assert!(s_rmt(ds, da) < 1.0 - 1.0 / ds.min(da) as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn haar_average_matches_s_rmt() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4000;
        let mean: f64 = (0..n)
            .map(|_| linear_entropy(&reduced_state(&haar_state(12, &mut rng), &[4, 3], &[0]).unwrap()))
            .sum::<f64>()
            / n as f64;
        assert!((mean - s_rmt(4, 3)).abs() < 0.01, "{mean}");
    }

    #[test]
    fn schmidt_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (da, db) in [(3, 3), (4, 2)] {
            let psi = haar_state(da * db, &mut rng);
            let a = reduced_state(&psi, &[da, db], &[0]).unwrap();
            let b = reduced_state(&psi, &[da, db], &[1]).unwrap();
            assert!((linear_entropy(&a) - linear_entropy(&b)).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenphase_examples() {
        let id = eigenphases_of(&ComplexMatrix::identity(4)).unwrap();
        assert!(id.values.iter().all(|p| p.abs() < 1e-14));
        let diag = ComplexMatrix::from_diag(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)]);
        let s = eigenphases_of(&diag).unwrap();
        let want = [0.0, PI / 2.0, PI];
        assert!(s.values.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), "{:?}", s.values);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = haar_unitary(30, &mut rng);
        let s = eigenphases_of(&u).unwrap();
        assert_eq!(s.len(), 30);
        assert!(s.values.iter().all(|&p| p > -PI && p <= PI));
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
        // a phase check through the trace
        let tr: C64 = s.values.iter().map(|&p| C64::from_polar(1.0, p)).sum();
        assert!((tr - u.trace()).norm() < 1e-9);
        assert!(eigenphases_of(&ComplexMatrix::from_real_diag(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn picket_fence() {
        let n = 50;
        let s = SpectralSample::from_phases((0..n).map(|k| -PI + 2.0 * PI * (k as f64 + 0.5) / n as f64).collect());
        assert!((mean_spacing_ratio(&s).unwrap() - 1.0).abs() < 1e-9);
        assert!(mean_spacing_ratio(&SpectralSample::from_phases(vec![0.0; 5])).is_err());
    }

    #[test]
    fn degenerate_spacings_are_flagged() {
        let mut v: Vec<f64> = (0..20).map(|k| k as f64 * 0.3 - 3.0).collect();
        v.push(v[4]);
        let st = spacing_ratio_stats(&SpectralSample::from_phases(v)).unwrap();
        assert_eq!(st.degenerate, 1);
        assert_eq!(st.used, 19);
    }

    #[test]
    fn poisson_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phases: Vec<f64> = (0..100_000).map(|_| rng.random_range(-PI..PI)).collect();
        let r = mean_spacing_ratio(&SpectralSample::from_phases(phases)).unwrap();
        assert!((r - (2.0 * 2f64.ln() - 1.0)).abs() < 0.005, "{r}");
    }

    #[test]
    fn goe_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100;
        let mut acc = 0.0;
        for _ in 0..200 {
            let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.sample(StandardNormal);
                    let x = if i == j { x * 2f64.sqrt() } else { x };
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
            let levels: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
            acc += mean_spacing_ratio(&SpectralSample::from_levels(levels)).unwrap();
        }
        let r = acc / 200.0;
        assert!((r - 0.531).abs() < 0.01, "{r}");
    }

    #[test]
    fn global_phase_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = haar_unitary(40, &mut rng);
        let r0 = mean_spacing_ratio(&eigenphases_of(&u).unwrap()).unwrap();
        for phi in [0.3, 1.7, -2.9] {
            let r = mean_spacing_ratio(&eigenphases_of(&u.scale(C64::from_polar(1.0, phi))).unwrap()).unwrap();
            assert!((r - r0).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetry_sectors_partition_the_spectrum() {
        let top = build_kicked_top(&KickedTopParams { kappa: 3.0, ..Default::default() }).unwrap();
        let sectors = sector_eigenphases(&top).unwrap();
        assert_eq!(sectors.len(), 2);
        let mut all: Vec<f64> = sectors.iter().flat_map(|s| s.values.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        let full = eigenphases(&top).unwrap();
        assert!(all.iter().zip(&full.values).all(|(a, b)| (a - b).abs() < 1e-8));
        let ising = build_kicked_ising(&IsingParams { length: 6, tilts: vec![0.7; 6], ancilla_sites: vec![1, 6], ..Default::default() }).unwrap();
        let sectors = sector_eigenphases(&ising).unwrap();
        assert_eq!(sectors.iter().map(|s| s.len()).sum::<usize>(), 64);
        assert_eq!(sectors.len(), 2);
    }
}
