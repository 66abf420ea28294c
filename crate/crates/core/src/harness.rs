//! Seeded ensemble sweeps over the kick strength and their regressions.
//!
//! Every ensemble member draws its initial state from a generator keyed on
//! `(master seed, member index)` only, so all grid points see the same initial
//! states and results never depend on worker count or grid order.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaosdiag::{eigenphases, linear_entropy, pooled_spacing_ratio, sector_eigenphases, spacing_ratio_stats};
use crate::coarsegrain::{unknown_state_work, CoarseGraining, UnknownStateWork};
use crate::error::{Error, Result};
use crate::models::{
    build_kicked_ising, build_kicked_top, build_kicked_top_tripartite, default_tilts, evolve, reflection_operator,
    FloquetOperator, IsingParams, KickedTopParams,
};
use crate::qcore::{haar_state, kron_vec, PureState};
use crate::spinops::Spin;
use crate::workcore::{collective_z_hamiltonian, known_state_work, top_system_hamiltonian, AncillaMeasurement, Hamiltonian, Joint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    KickedTop,
    KickedIsing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Known,
    Tripartite,
    Unknown,
    CoarseScan,
    AncillaScaling,
    Spectral,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Known => "known",
            Experiment::Tripartite => "tripartite",
            Experiment::Unknown => "unknown",
            Experiment::CoarseScan => "coarse-scan",
            Experiment::AncillaScaling => "ancilla-scaling",
            Experiment::Spectral => "spectral",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "both")]
    Both,
}

impl Protocol {
    fn first(self) -> bool {
        matches!(self, Protocol::One | Protocol::Both)
    }

    fn second(self) -> bool {
        matches!(self, Protocol::Two | Protocol::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub model: Model,
    pub experiment: Experiment,
    /// κ or M values; `None` picks the per-experiment default.
    pub grid: Option<Vec<f64>>,
    pub ensemble: usize,
    pub time_steps: usize,
    pub coarse_n: usize,
    /// Cell sizes for `coarse-scan`; `None` means every divisor of `d_S`.
    pub coarse_grid: Option<Vec<usize>>,
    pub protocol: Protocol,
    /// Tripartite couplings; both `None` runs `(1,0)` and `(0,1)`.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub seed: u64,
    pub j_system: f64,
    pub j_ancilla: f64,
    pub j_aux: f64,
    /// Ancilla spins for `ancilla-scaling`.
    pub ancilla_spins: Vec<f64>,
    pub alpha: f64,
    pub chain_length: usize,
    pub ising_coupling: f64,
    pub tilts: Option<Vec<f64>>,
    /// 1-based; `None` means both chain ends.
    pub ancilla_sites: Option<Vec<usize>>,
    /// Sign of the collective J_z used as the Ising system Hamiltonian.
    pub ising_hs_sign: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            model: Model::KickedTop,
            experiment: Experiment::Known,
            grid: None,
            ensemble: 1000,
            time_steps: 3,
            coarse_n: 2,
            coarse_grid: None,
            protocol: Protocol::Both,
            c1: None,
            c2: None,
            seed: 0,
            j_system: 9.5,
            j_ancilla: 1.0,
            j_aux: 1.0,
            ancilla_spins: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            alpha: PI / 2.0,
            chain_length: 8,
            ising_coupling: 0.8,
            tilts: None,
            ancilla_sites: None,
            ising_hs_sign: -1.0,
        }
    }
}

/// `count` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..count).map(|k| min + (max - min) * k as f64 / (count - 1) as f64).collect(),
    }
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|k| n % k == 0).collect()
}

impl SweepConfig {
    pub fn resolved_grid(&self) -> Vec<f64> {
        if let Some(g) = &self.grid {
            return g.clone();
        }
        match (self.experiment, self.model) {
            (Experiment::AncillaScaling, _) => vec![7.0],
            (Experiment::CoarseScan, Model::KickedTop) => vec![0.5, 1.0, 7.0],
            (Experiment::CoarseScan, Model::KickedIsing) => vec![PI / 20.0, PI / 4.0],
            (_, Model::KickedTop) => linspace(0.0, 7.0, 29),
            (_, Model::KickedIsing) => linspace(0.0, PI, 41),
        }
    }

    pub fn resolved_coarse_grid(&self) -> Result<Vec<usize>> {
        Ok(match &self.coarse_grid {
            Some(g) => g.clone(),
            None => divisors(self.system_dim()?),
        })
    }

    fn spin(key: &str, j: f64) -> Result<Spin> {
        Spin::new(j).map_err(|e| Error::config(key, e.to_string()))
    }

    fn ising_tilts(&self) -> Vec<f64> {
        match &self.tilts {
            Some(t) => t.clone(),
            None if self.chain_length == 8 => default_tilts(),
            None => vec![PI / 4.0; self.chain_length],
        }
    }

    pub fn ising_params(&self, m: f64) -> IsingParams {
        let l = self.chain_length;
        IsingParams {
            length: l,
            coupling: self.ising_coupling,
            m_strength: m,
            tilts: self.ising_tilts(),
            ancilla_sites: self.ancilla_sites.clone().unwrap_or_else(|| vec![1, l]),
            aux_sites: Vec::new(),
            edge_couplings: None,
        }
    }

    pub fn ising_tripartite_params(&self, m: f64, c1: f64, c2: f64) -> IsingParams {
        let l = self.chain_length;
        IsingParams { ancilla_sites: vec![1], aux_sites: vec![l], edge_couplings: Some((c1, c2)), ..self.ising_params(m) }
    }

    pub fn top_params(&self, kappa: f64) -> Result<KickedTopParams> {
        Ok(KickedTopParams {
            j_system: Self::spin("j_system", self.j_system)?,
            j_ancilla: Self::spin("j_ancilla", self.j_ancilla)?,
            j_aux: None,
            kappa,
            alpha: self.alpha,
            c1: 1.0,
            c2: 0.0,
        })
    }

    /// Coupling configurations for the tripartite experiment.
    pub fn couplings(&self) -> Vec<(f64, f64)> {
        match (self.c1, self.c2) {
            (None, None) => vec![(1.0, 0.0), (0.0, 1.0)],
            (c1, c2) => vec![(c1.unwrap_or(1.0), c2.unwrap_or(0.0))],
        }
    }

    /// Build the operator for one grid point (and coupling pair, if tripartite).
    pub fn floquet(&self, param: f64, couplings: Option<(f64, f64)>) -> Result<FloquetOperator> {
        match (self.model, couplings) {
            (Model::KickedTop, None) => build_kicked_top(&self.top_params(param)?),
            (Model::KickedTop, Some((c1, c2))) => build_kicked_top_tripartite(&KickedTopParams {
                j_aux: Some(Self::spin("j_aux", self.j_aux)?),
                c1,
                c2,
                ..self.top_params(param)?
            }),
            (Model::KickedIsing, None) => build_kicked_ising(&self.ising_params(param)),
            (Model::KickedIsing, Some((c1, c2))) => build_kicked_ising(&self.ising_tripartite_params(param, c1, c2)),
        }
    }

    fn tripartite(&self) -> bool {
        self.experiment == Experiment::Tripartite
    }

    pub fn system_dim(&self) -> Result<usize> {
        Ok(match self.model {
            Model::KickedTop => Self::spin("j_system", self.j_system)?.dim(),
            Model::KickedIsing => {
                let taken = if self.tripartite() { 2 } else { self.ancilla_sites.as_ref().map_or(2, Vec::len) };
                1usize << self.chain_length.saturating_sub(taken)
            }
        })
    }

    pub fn system_hamiltonian(&self) -> Result<Hamiltonian> {
        Ok(match self.model {
            Model::KickedTop => top_system_hamiltonian(Self::spin("j_system", self.j_system)?),
            Model::KickedIsing => collective_z_hamiltonian(self.system_dim()?.trailing_zeros() as usize, self.ising_hs_sign),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.resolved_grid();
        if grid.is_empty() {
            return Err(Error::config("grid", "parameter grid is empty"));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("grid", "parameter grid has non-finite values"));
        }
        if self.ensemble == 0 {
            return Err(Error::config("ensemble", "ensemble size must be at least 1"));
        }
        if self.ising_hs_sign != 1.0 && self.ising_hs_sign != -1.0 {
            return Err(Error::config("ising_hs_sign", "must be 1 or -1"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::config("alpha", "must be finite"));
        }
        for (key, v) in [("c1", self.c1), ("c2", self.c2)] {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(Error::config(key, "must be finite"));
            }
        }
        let d_s = self.system_dim()?;
        match self.model {
            Model::KickedTop => {
                Self::spin("j_ancilla", self.j_ancilla)?;
                if self.tripartite() {
                    Self::spin("j_aux", self.j_aux)?;
                }
            }
            Model::KickedIsing => {
                if self.experiment == Experiment::AncillaScaling {
                    return Err(Error::config("model", "ancilla-scaling is defined for the kicked top only"));
                }
                if !self.ising_coupling.is_finite() {
                    return Err(Error::config("ising_coupling", "must be finite"));
                }
                self.ising_params(0.0).validate()?;
                if self.tripartite() {
                    self.ising_tripartite_params(0.0, 1.0, 0.0).validate()?;
                }
            }
        }
        match self.experiment {
            Experiment::Unknown => {
                if self.coarse_n == 0 || d_s % self.coarse_n != 0 {
                    return Err(Error::config("coarse_n", format!("cell size {} does not divide d_S = {d_s}", self.coarse_n)));
                }
            }
            Experiment::CoarseScan => {
                let g = self.resolved_coarse_grid()?;
                if g.is_empty() {
                    return Err(Error::config("coarse_grid", "no cell sizes"));
                }
                if let Some(&n) = g.iter().find(|&&n| n == 0 || d_s % n != 0) {
                    return Err(Error::config("coarse_grid", format!("cell size {n} does not divide d_S = {d_s}")));
                }
            }
            Experiment::AncillaScaling => {
                if self.ancilla_spins.is_empty() {
                    return Err(Error::config("ancilla_spins", "no ancilla spins"));
                }
                for &j in &self.ancilla_spins {
                    Self::spin("ancilla_spins", j)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    /// Mean and standard error (sample deviation over `√N`), summed in order.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

/// One grid point of one experiment. Observables an experiment does not
/// compute stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub d_ancilla: Option<usize>,
    pub coarse_n: Option<usize>,
    pub s_lin: Option<Stat>,
    pub work: Option<Stat>,
    pub daemonic: Option<Stat>,
    pub gain: Option<Stat>,
    pub w_rc: Option<Stat>,
    pub w_bar: Option<Stat>,
    pub oe1: Option<Stat>,
    pub oe2: Option<Stat>,
    pub oe1_top: Option<Stat>,
    pub w_applied: Option<Stat>,
    pub fidelity: Option<f64>,
    pub r_full: Option<f64>,
    pub r_sector: Option<f64>,
    pub levels: Option<usize>,
    pub ensemble: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedRegression {
    pub name: String,
    pub x: String,
    pub y: String,
    #[serde(flatten)]
    pub fit: RegressionResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub regressions: Vec<NamedRegression>,
}

/// Ordinary least squares `y ≈ slope·x + intercept` with Pearson `r`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} x values vs {} y values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::OutOfRange(format!("regression needs at least 3 points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("x has zero variance".into()));
    }
    let slope = sxy / sxx;
    let r = if syy > 0.0 { (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0) } else { 0.0 };
    Ok(RegressionResult { slope, intercept: my - slope * mx, r, n: x.len() })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(linear_fit(x, y)?.r)
}

/// Average ranks, ties sharing the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&ranks(x), &ranks(y))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one ensemble member.
pub fn member_rng(master: u64, member: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(master) ^ member as u64))
}

/// `⊗_f |ψ_f⟩` with each factor Haar random, drawn in factor order.
pub fn sample_product_state<R: rand::Rng + ?Sized>(dims: &[usize], rng: &mut R) -> PureState {
    let mut amps = vec![crate::qcore::C64::new(1.0, 0.0)];
    for &d in dims {
        amps = kron_vec(&amps, haar_state(d, rng).amplitudes());
    }
    PureState::normalized(amps).expect("product of unit vectors")
}

/// Evaluate `f(point, member)` for every pair in parallel; results come back
/// grouped by point in member order.
fn ensemble<T: Send>(points: usize, members: usize, f: impl Fn(usize, usize) -> Result<T> + Sync) -> Result<Vec<Vec<T>>> {
    let flat: Vec<T> = (0..points * members).into_par_iter().map(|k| f(k / members, k % members)).collect::<Result<_>>()?;
    let mut it = flat.into_iter();
    Ok((0..points).map(|_| it.by_ref().take(members).collect()).collect())
}

fn build_all(cfg: &SweepConfig, jobs: &[(f64, Option<(f64, f64)>)]) -> Result<Vec<FloquetOperator>> {
    jobs.par_iter().map(|&(p, c)| cfg.floquet(p, c)).collect()
}

/// Draw a canonical `S ⊗ A (⊗ B)` product state, evolve it in the operator's
/// native order, and return it canonical again.
fn evolve_canonical(u: &FloquetOperator, canonical: &PureState, t: usize) -> Result<PureState> {
    let native = u.from_canonical(canonical)?;
    u.to_canonical(&evolve(&native, u, t)?)
}

fn joint_dims(u: &FloquetOperator) -> Vec<usize> {
    let [s, a, b] = u.canonical_dims();
    if b > 1 {
        vec![s, a, b]
    } else {
        vec![s, a]
    }
}

#[derive(Clone, Copy)]
struct KnownSample {
    s_lin: f64,
    work: f64,
    daemonic: f64,
    gain: f64,
}

fn known_sample(u: &FloquetOperator, psi0: &PureState, cfg: &SweepConfig, h: &Hamiltonian) -> Result<KnownSample> {
    let dims = joint_dims(u);
    let joint = Joint::pure(evolve_canonical(u, psi0, cfg.time_steps)?, dims.clone())?;
    let k = known_state_work(&joint, h, &AncillaMeasurement::computational(dims[1]))?;
    Ok(KnownSample { s_lin: linear_entropy(&joint.system_state()), work: k.ergotropy, daemonic: k.daemonic, gain: k.gain })
}

fn known_record(param: f64, cfg: &SweepConfig, samples: &[KnownSample]) -> SweepRecord {
    let col = |f: fn(&KnownSample) -> f64| Some(Stat::of(&samples.iter().map(f).collect::<Vec<_>>()));
    SweepRecord {
        param,
        s_lin: col(|s| s.s_lin),
        work: col(|s| s.work),
        daemonic: col(|s| s.daemonic),
        gain: col(|s| s.gain),
        ensemble: samples.len(),
        seed: cfg.seed,
        ..Default::default()
    }
}

fn expect(cfg: &SweepConfig, e: Experiment) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != e {
        return Err(Error::config("experiment", format!("expected `{}`, got `{}`", e.name(), cfg.experiment.name())));
    }
    Ok(())
}

/// Entanglement, ergotropy and daemonic gain of `ρ_S` after `t` kicks.
pub fn run_known_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    expect(cfg, Experiment::Known)?;
    let grid = cfg.resolved_grid();
    let jobs: Vec<_> = grid.iter().map(|&p| (p, None)).collect();
    let ops = build_all(cfg, &jobs)?;
    let h = cfg.system_hamiltonian()?;
    let dims = joint_dims(&ops[0]);
    let samples = ensemble(grid.len(), cfg.ensemble, |p, m| {
        let psi0 = sample_product_state(&dims, &mut member_rng(cfg.seed, m));
        known_sample(&ops[p], &psi0, cfg, &h)
    })?;
    Ok(grid.iter().zip(&samples).map(|(&p, s)| known_record(p, cfg, s)).collect())
}

/// `δW` against `log d_A` at fixed κ, one fit per κ.
pub fn run_ancilla_scaling(cfg: &SweepConfig) -> Result<SweepOutput> {
    expect(cfg, Experiment::AncillaScaling)?;
    let grid = cfg.resolved_grid();
    let mut jobs = Vec::new();
    for &kappa in &grid {
        for &ja in &cfg.ancilla_spins {
            jobs.push((kappa, ja));
        }
    }
    let ops: Vec<FloquetOperator> = jobs
        .par_iter()
        .map(|&(kappa, ja)| build_kicked_top(&KickedTopParams { j_ancilla: SweepConfig::spin("ancilla_spins", ja)?, ..cfg.top_params(kappa)? }))
        .collect::<Result<_>>()?;
    let h = cfg.system_hamiltonian()?;
    let samples = ensemble(jobs.len(), cfg.ensemble, |p, m| {
        let dims = joint_dims(&ops[p]);
        let psi0 = sample_product_state(&dims, &mut member_rng(cfg.seed, m));
        known_sample(&ops[p], &psi0, cfg, &h)
    })?;
    let mut records = Vec::new();
    let mut regressions = Vec::new();
    for (gi, &kappa) in grid.iter().enumerate() {
        let n = cfg.ancilla_spins.len();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..n {
            let idx = gi * n + k;
            let mut rec = known_record(kappa, cfg, &samples[idx]);
            let da = ops[idx].canonical_dims()[1];
            rec.d_ancilla = Some(da);
            xs.push((da as f64).ln());
            ys.push(rec.gain.unwrap().mean);
            records.push(rec);
        }
        if let Ok(fit) = linear_fit(&xs, &ys) {
            regressions.push(NamedRegression { name: format!("kappa={kappa}"), x: "ln_d_A".into(), y: "dW_mean".into(), fit });
        }
    }
    Ok(SweepOutput { records, regressions })
}

/// Swap of the two drawn ancilla states plus the matching mirror on S: the
/// image of a member under the symmetry exchanging `(c1, c2) ↔ (c2, c1)`.
fn mirror_member(cfg: &SweepConfig, psi_s: &PureState, phi1: &PureState, phi2: &PureState) -> Result<PureState> {
    let s = match cfg.model {
        Model::KickedTop => psi_s.clone(),
        Model::KickedIsing => psi_s.apply(&reflection_operator(cfg.chain_length - 2))?,
    };
    s.kron(phi2)?.kron(phi1)
}

/// S–A–B geometry: entanglement and gain from measuring A with B traced out.
/// When `d_A = d_B` each member is averaged with its mirror image.
pub fn run_tripartite_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    expect(cfg, Experiment::Tripartite)?;
    let grid = cfg.resolved_grid();
    let couplings = cfg.couplings();
    let jobs: Vec<(f64, Option<(f64, f64)>)> =
        couplings.iter().flat_map(|&c| grid.iter().map(move |&p| (p, Some(c)))).collect();
    let ops = build_all(cfg, &jobs)?;
    let h = cfg.system_hamiltonian()?;
    let [ds, da, db] = ops[0].canonical_dims();
    let samples = ensemble(jobs.len(), cfg.ensemble, |p, m| {
        let mut rng = member_rng(cfg.seed, m);
        let psi_s = haar_state(ds, &mut rng);
        let phi1 = haar_state(da, &mut rng);
        let phi2 = haar_state(db, &mut rng);
        let direct = known_sample(&ops[p], &psi_s.kron(&phi1)?.kron(&phi2)?, cfg, &h)?;
        if da != db {
            return Ok(direct);
        }
        let mirrored = known_sample(&ops[p], &mirror_member(cfg, &psi_s, &phi1, &phi2)?, cfg, &h)?;
        Ok(KnownSample {
            s_lin: 0.5 * (direct.s_lin + mirrored.s_lin),
            work: 0.5 * (direct.work + mirrored.work),
            daemonic: 0.5 * (direct.daemonic + mirrored.daemonic),
            gain: 0.5 * (direct.gain + mirrored.gain),
        })
    })?;
    Ok(jobs
        .iter()
        .zip(&samples)
        .map(|(&(p, c), s)| {
            let (c1, c2) = c.expect("tripartite jobs carry couplings");
            SweepRecord { c1: Some(c1), c2: Some(c2), ..known_record(p, cfg, s) }
        })
        .collect())
}

fn unknown_record(param: f64, cfg: &SweepConfig, samples: &[UnknownStateWork]) -> SweepRecord {
    let col = |f: fn(&UnknownStateWork) -> f64| Some(Stat::of(&samples.iter().map(f).collect::<Vec<_>>()));
    let (one, two) = (cfg.protocol.first(), cfg.protocol.second());
    SweepRecord {
        param,
        w_rc: col(|s| s.protocol1.work).filter(|_| one),
        oe1: col(|s| s.protocol1.oe).filter(|_| one),
        oe1_top: col(|s| s.oe_most_probable).filter(|_| one),
        w_applied: col(|s| s.applied_work).filter(|_| one),
        w_bar: col(|s| s.protocol2.work).filter(|_| two),
        oe2: col(|s| s.protocol2.oe).filter(|_| two),
        fidelity: Some(samples.iter().map(|s| s.fidelity).sum::<f64>() / samples.len() as f64),
        ensemble: samples.len(),
        seed: cfg.seed,
        ..Default::default()
    }
}

fn unknown_samples(cfg: &SweepConfig, grid: &[f64], cells: &[CoarseGraining]) -> Result<Vec<Vec<Vec<UnknownStateWork>>>> {
    let jobs: Vec<_> = grid.iter().map(|&p| (p, None)).collect();
    let ops = build_all(cfg, &jobs)?;
    let h = cfg.system_hamiltonian()?;
    let dims = joint_dims(&ops[0]);
    let meas = AncillaMeasurement::computational(dims[1]);
    ensemble(grid.len(), cfg.ensemble, |p, m| {
        let psi0 = sample_product_state(&dims, &mut member_rng(cfg.seed, m));
        let joint = Joint::pure(evolve_canonical(&ops[p], &psi0, cfg.time_steps)?, dims.clone())?;
        cells.iter().map(|cg| unknown_state_work(&joint, &h, &meas, cg, true)).collect()
    })
}

/// Both coarse-grained protocols at cell size `coarse_n`, with work-vs-OE fits.
pub fn run_unknown_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    expect(cfg, Experiment::Unknown)?;
    let grid = cfg.resolved_grid();
    let cg = CoarseGraining::energy_cells(&cfg.system_hamiltonian()?, cfg.coarse_n)?;
    let samples = unknown_samples(cfg, &grid, std::slice::from_ref(&cg))?;
    let records: Vec<SweepRecord> = grid
        .iter()
        .zip(&samples)
        .map(|(&p, s)| {
            let flat: Vec<UnknownStateWork> = s.iter().map(|v| v[0]).collect();
            SweepRecord { coarse_n: Some(cfg.coarse_n), ..unknown_record(p, cfg, &flat) }
        })
        .collect();
    let mut regressions = Vec::new();
    let series = |f: fn(&SweepRecord) -> Option<Stat>| -> Option<Vec<f64>> { records.iter().map(|r| f(r).map(|s| s.mean)).collect() };
    if let (Some(x), Some(y)) = (series(|r| r.oe1), series(|r| r.w_rc)) {
        if let Ok(fit) = linear_fit(&x, &y) {
            regressions.push(NamedRegression { name: "protocol-1".into(), x: "OE1_mean".into(), y: "Wrc_mean".into(), fit });
        }
    }
    if let (Some(x), Some(y)) = (series(|r| r.oe2), series(|r| r.w_bar)) {
        if let Ok(fit) = linear_fit(&x, &y) {
            regressions.push(NamedRegression { name: "protocol-2".into(), x: "OE2_mean".into(), y: "Wbar_mean".into(), fit });
        }
    }
    Ok(SweepOutput { records, regressions })
}

/// Both protocols against the cell size at each κ, with fits against `ln(1/n)`.
pub fn run_coarse_scan(cfg: &SweepConfig) -> Result<SweepOutput> {
    expect(cfg, Experiment::CoarseScan)?;
    let grid = cfg.resolved_grid();
    let ns = cfg.resolved_coarse_grid()?;
    let h = cfg.system_hamiltonian()?;
    let cells: Vec<CoarseGraining> = ns.iter().map(|&n| CoarseGraining::energy_cells(&h, n)).collect::<Result<_>>()?;
    let samples = unknown_samples(cfg, &grid, &cells)?;
    let mut records = Vec::new();
    let mut regressions = Vec::new();
    for (&p, per_member) in grid.iter().zip(&samples) {
        let start = records.len();
        for (k, &n) in ns.iter().enumerate() {
            let flat: Vec<UnknownStateWork> = per_member.iter().map(|v| v[k]).collect();
            records.push(SweepRecord { coarse_n: Some(n), ..unknown_record(p, cfg, &flat) });
        }
        let x: Vec<f64> = ns.iter().map(|&n| -(n as f64).ln()).collect();
        for (name, y, f) in [
            ("protocol-2", "Wbar_mean", (|r: &SweepRecord| r.w_bar) as fn(&SweepRecord) -> Option<Stat>),
            ("protocol-1", "Wrc_mean", |r: &SweepRecord| r.w_rc),
        ] {
            let ys: Option<Vec<f64>> = records[start..].iter().map(|r| f(r).map(|s| s.mean)).collect();
            if let Some(ys) = ys {
                if let Ok(fit) = linear_fit(&x, &ys) {
                    regressions.push(NamedRegression { name: format!("{name} kappa={p}"), x: "ln_1_over_n".into(), y: y.into(), fit });
                }
            }
        }
    }
    Ok(SweepOutput { records, regressions })
}

/// Mean spacing ratio of the Floquet spectrum, full and symmetry-resolved.
pub fn run_spectral(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    expect(cfg, Experiment::Spectral)?;
    let grid = cfg.resolved_grid();
    grid.par_iter()
        .map(|&p| {
            let u = cfg.floquet(p, None)?;
            // fully degenerate spectra (e.g. a diagonal U) leave the cell empty
            let tolerate = |r: Result<crate::chaosdiag::SpacingStats>| match r {
                Ok(st) => Ok(Some(st.mean)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            };
            let full = tolerate(spacing_ratio_stats(&eigenphases(&u)?))?;
            let sectors = tolerate(pooled_spacing_ratio(&sector_eigenphases(&u)?))?;
            Ok(SweepRecord {
                param: p,
                r_full: full,
                r_sector: sectors,
                levels: Some(u.dim()),
                ensemble: 0,
                seed: cfg.seed,
                ..Default::default()
            })
        })
        .collect()
}

pub fn run(cfg: &SweepConfig) -> Result<SweepOutput> {
    let plain = |records| SweepOutput { records, regressions: Vec::new() };
    match cfg.experiment {
        Experiment::Known => run_known_sweep(cfg).map(plain),
        Experiment::Tripartite => run_tripartite_sweep(cfg).map(plain),
        Experiment::Unknown => run_unknown_sweep(cfg),
        Experiment::CoarseScan => run_coarse_scan(cfg),
        Experiment::AncillaScaling => run_ancilla_scaling(cfg),
        Experiment::Spectral => run_spectral(cfg).map(plain),
    }
}

/// [`run`] on a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &SweepConfig, threads: usize) -> Result<SweepOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    pool.install(|| run(cfg))
}
