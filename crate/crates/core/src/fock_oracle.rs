//! Master-equation oracles for the detector probabilities.
//!
//! Two fixed-step RK4 integrators:
//!
//! * the single-photon Fock-state hierarchy at the atomic level: four 2×2
//!   blocks `ρ_nm`, `n, m ∈ {0, 1}`, driven by the adiabatically eliminated
//!   Raman dissipators and coupled through the incoming photon's mode;
//! * the coherently driven atom–cavity master equation (truncated cavity
//!   Fock space), used for the weak-coherent probe.
//!
//! Atomic basis is `{|g⟩, |e⟩}` with `σ₊ = |e⟩⟨g|`; the detector starts
//! population inverted with `P_g(0) = 1/(1+e^{μ_σ})`.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::source::BathParams;

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest admissible `fastest rate × step`.
pub const MAX_RATE_STEP: f64 = 0.05;
/// Tolerance on the hierarchy block invariants.
pub const HIERARCHY_TOL: f64 = 1e-8;
/// Trace tolerance for the cavity master equation.
pub const CAVITY_TRACE_TOL: f64 = 1e-7;
/// Hermiticity tolerance for the cavity master equation.
pub const CAVITY_HERMITIAN_TOL: f64 = 1e-8;
/// Largest admissible population of the top cavity level.
pub const TRUNCATION_TOL: f64 = 1e-6;

/// Uniform integration grid over `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub steps: usize,
    /// Keep every `record_every`-th point in the returned trajectory.
    pub record_every: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, steps: usize) -> Self {
        TimeGrid { t_max, steps, record_every: 1 }
    }

    pub fn recording_every(self, record_every: usize) -> Self {
        TimeGrid { record_every: record_every.max(1), ..self }
    }

    pub fn step(&self) -> f64 {
        self.t_max / self.steps as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() || self.steps == 0 {
            return Err(Error::Config(format!(
                "invalid time grid: t_max={}, steps={}",
                self.t_max, self.steps
            )));
        }
        Ok(())
    }

    fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..=self.steps).map(move |i| i as f64 * h)
    }
}

/// Smallest step count with `rate × step ≤ MAX_RATE_STEP` for a horizon.
pub fn steps_for_rate(t_max: f64, fastest_rate: f64) -> usize {
    ((t_max * fastest_rate / MAX_RATE_STEP).ceil() as usize).max(1)
}

fn check_step(grid: &TimeGrid, fastest_rate: f64) -> Result<()> {
    let r = fastest_rate * grid.step();
    if r > MAX_RATE_STEP {
        return Err(Error::Config(format!(
            "step {} too coarse: fastest rate {fastest_rate} x step = {r} > {MAX_RATE_STEP}; use at least {} steps",
            grid.step(),
            steps_for_rate(grid.t_max, fastest_rate)
        )));
    }
    Ok(())
}

fn finite_nbar(bath: BathParams) -> Result<f64> {
    let n = bath.nbar();
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Error::domain("infinite temperature (mu = 0) is not supported by the oracles"))
    }
}

fn check_physical(eta: f64, kappa: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// Classic fixed-step RK4 over a flat complex state.
struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![ZERO; n],
            k2: vec![ZERO; n],
            k3: vec![ZERO; n],
            k4: vec![ZERO; n],
            tmp: vec![ZERO; n],
        }
    }

    fn step<F>(&mut self, rhs: &mut F, t: f64, h: f64, y: &mut [C64])
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        rhs(t, y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k1[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k2[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k3[i] * h;
        }
        rhs(t + h, &self.tmp, &mut self.k4);
        let w = h / 6.0;
        for i in 0..y.len() {
            y[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
        }
    }
}

/// Worst-case deviations from the state invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InvariantReport {
    pub trace: f64,
    pub hermiticity: f64,
    /// `‖ρ₁₀ − ρ₀₁†‖` (hierarchy only).
    pub conjugate_blocks: f64,
    /// Population of the highest cavity level (cavity only).
    pub top_level_population: f64,
}

impl InvariantReport {
    fn merge(&mut self, other: InvariantReport) {
        self.trace = self.trace.max(other.trace);
        self.hermiticity = self.hermiticity.max(other.hermiticity);
        self.conjugate_blocks = self.conjugate_blocks.max(other.conjugate_blocks);
        self.top_level_population = self.top_level_population.max(other.top_level_population);
    }
}

/// A state whose invariants can be audited.
pub trait CheckInvariants {
    fn invariants(&self) -> InvariantReport;
}

/// Evaluate all type invariants of an oracle state.
pub fn check_block_invariants<S: CheckInvariants>(state: &S) -> InvariantReport {
    state.invariants()
}

// --- single-photon Fock hierarchy -------------------------------------------------

type Block = [[C64; 2]; 2];

const G: usize = 0;
const E: usize = 1;

/// The four atomic blocks of the single-photon hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct FockHierarchyState {
    pub rho00: Block,
    pub rho01: Block,
    pub rho10: Block,
    pub rho11: Block,
}

impl FockHierarchyState {
    /// Diagonal blocks in the sensor's inverted equilibrium, off-diagonal blocks zero.
    pub fn initial(bath: BathParams) -> Self {
        let p = bath.floor();
        let diag = [[C64::new(p, 0.0), ZERO], [ZERO, C64::new(1.0 - p, 0.0)]];
        FockHierarchyState {
            rho00: diag,
            rho01: [[ZERO; 2]; 2],
            rho10: [[ZERO; 2]; 2],
            rho11: diag,
        }
    }

    /// Detection probability `⟨g|ρ₁₁|g⟩`.
    pub fn p_g(&self) -> f64 {
        self.rho11[G][G].re
    }

    /// `⟨σ₋⟩₀₁ = Tr(σ₋ ρ₀₁)`.
    pub fn sigma_minus_01(&self) -> C64 {
        self.rho01[E][G]
    }

    fn to_flat(&self) -> [C64; 16] {
        let mut out = [ZERO; 16];
        for (b, blk) in [&self.rho00, &self.rho01, &self.rho10, &self.rho11].into_iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    out[4 * b + 2 * i + j] = blk[i][j];
                }
            }
        }
        out
    }

    fn from_flat(y: &[C64]) -> Self {
        let blk = |b: usize| [[y[4 * b], y[4 * b + 1]], [y[4 * b + 2], y[4 * b + 3]]];
        FockHierarchyState {
            rho00: blk(0),
            rho01: blk(1),
            rho10: blk(2),
            rho11: blk(3),
        }
    }
}

fn block_trace_dev(b: &Block) -> f64 {
    (b[G][G] + b[E][E] - 1.0).norm()
}

fn block_hermiticity(b: &Block) -> f64 {
    let mut w: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            w = w.max((b[i][j] - b[j][i].conj()).norm());
        }
    }
    w
}

impl CheckInvariants for FockHierarchyState {
    fn invariants(&self) -> InvariantReport {
        let mut conj: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                conj = conj.max((self.rho10[i][j] - self.rho01[j][i].conj()).norm());
            }
        }
        InvariantReport {
            trace: block_trace_dev(&self.rho00).max(block_trace_dev(&self.rho11)),
            hermiticity: block_hermiticity(&self.rho00).max(block_hermiticity(&self.rho11)),
            conjugate_blocks: conj,
            top_level_population: 0.0,
        }
    }
}

/// One recorded point of a hierarchy trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyPoint {
    pub t: f64,
    pub p_g: f64,
    pub sigma_minus_01: C64,
}

#[derive(Debug, Clone)]
pub struct HierarchyTrajectory {
    pub points: Vec<HierarchyPoint>,
    pub final_state: FockHierarchyState,
    pub worst: InvariantReport,
}

impl HierarchyTrajectory {
    pub fn final_p_g(&self) -> f64 {
        self.final_state.p_g()
    }

    /// Write `t,p_g,re_sigma_minus_01,im_sigma_minus_01` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,p_g,re_sigma_minus_01,im_sigma_minus_01")?;
        for p in &self.points {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                p.t, p.p_g, p.sigma_minus_01.re, p.sigma_minus_01.im
            )?;
        }
        Ok(())
    }
}

/// Add `rate·D[σ₊]ρ + rate_dn·D[σ₋]ρ` for a (not necessarily Hermitian) block.
fn add_atomic_dissipator(up: f64, dn: f64, r: &[C64], out: &mut [C64]) {
    // r laid out as [gg, ge, eg, ee]
    let (gg, ge, eg, ee) = (r[0], r[1], r[2], r[3]);
    let half = 0.5 * (up + dn);
    out[0] += -gg * up + ee * dn;
    out[3] += gg * up - ee * dn;
    out[1] -= ge * half;
    out[2] -= eg * half;
}

/// `[σ₊, r]` for a block laid out as [gg, ge, eg, ee].
fn comm_sp_left(r: &[C64]) -> [C64; 4] {
    let (gg, ge, _eg, ee) = (r[0], r[1], r[2], r[3]);
    // σ₊r = [[0,0],[gg,ge]], rσ₊ = [[ge,0],[ee,0]]
    [-ge, ZERO, gg - ee, ge]
}

/// `[r, σ₋]` for a block laid out as [gg, ge, eg, ee].
fn comm_sm_right(r: &[C64]) -> [C64; 4] {
    let (gg, _ge, eg, ee) = (r[0], r[1], r[2], r[3]);
    // rσ₋ = [[0,gg],[0,eg]], σ₋r = [[eg,ee],[0,0]]
    [-eg, gg - ee, ZERO, eg]
}

/// Integrate the single-photon atomic Fock hierarchy
///
/// `dρ_nm/dt = L ρ_nm + (2i√η/√κ)(√n ξV*[ρ_{n−1,m}, σ₋] − √m ξ*V[σ₊, ρ_{n,m−1}])`
///
/// with `L = 4(n̄+1)|V|²/κ D[σ₊] + 4n̄|V|²/κ D[σ₋]`. `control` is the full
/// control amplitude `V(t)`, `signal` the photon's mode `ξ(t)`.
pub fn integrate_fock_hierarchy<V, X>(
    control: V,
    signal: X,
    eta: f64,
    kappa: f64,
    bath: BathParams,
    grid: TimeGrid,
) -> Result<HierarchyTrajectory>
where
    V: Fn(f64) -> C64,
    X: Fn(f64) -> C64,
{
    check_physical(eta, kappa)?;
    grid.validate()?;
    let nbar = finite_nbar(bath)?;
    let coupling = 2.0 * (eta / kappa).sqrt();

    let fastest = grid
        .times()
        .map(|t| {
            let (v, x) = (control(t), signal(t));
            (4.0 * (2.0 * nbar + 1.0) * v.norm_sqr() / kappa).max(coupling * v.norm() * x.norm())
        })
        .fold(0.0, f64::max);
    check_step(&grid, fastest)?;

    let c = C64::new(0.0, coupling);
    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let v = control(t);
        let x = signal(t);
        let iv = v.norm_sqr();
        let up = 4.0 * (nbar + 1.0) * iv / kappa;
        let dn = 4.0 * nbar * iv / kappa;
        dy.fill(ZERO);
        for b in 0..4 {
            add_atomic_dissipator(up, dn, &y[4 * b..4 * b + 4], &mut dy[4 * b..4 * b + 4]);
        }
        let a = c * x * v.conj(); // coefficient of [ρ_{n−1,m}, σ₋]
        let bcoef = c * x.conj() * v; // coefficient of [σ₊, ρ_{n,m−1}]
        let r00 = &y[0..4];
        let r01 = &y[4..8];
        let r10 = &y[8..12];
        let s00 = comm_sp_left(r00);
        let m00 = comm_sm_right(r00);
        let m01 = comm_sm_right(r01);
        let s10 = comm_sp_left(r10);
        for k in 0..4 {
            dy[4 + k] -= bcoef * s00[k];
            dy[8 + k] += a * m00[k];
            dy[12 + k] += a * m01[k] - bcoef * s10[k];
        }
    };

    let mut y = FockHierarchyState::initial(bath).to_flat();
    let mut rk = Rk4::new(16);
    let h = grid.step();
    let mut worst = InvariantReport::default();
    let mut points = Vec::with_capacity(grid.steps / grid.record_every + 2);
    let record = |t: f64, s: &FockHierarchyState, pts: &mut Vec<HierarchyPoint>| {
        pts.push(HierarchyPoint { t, p_g: s.p_g(), sigma_minus_01: s.sigma_minus_01() });
    };
    record(0.0, &FockHierarchyState::from_flat(&y), &mut points);
    for i in 0..grid.steps {
        let t = i as f64 * h;
        rk.step(&mut rhs, t, h, &mut y);
        let state = FockHierarchyState::from_flat(&y);
        let rep = state.invariants();
        if rep.trace > HIERARCHY_TOL || rep.hermiticity > HIERARCHY_TOL || rep.conjugate_blocks > HIERARCHY_TOL {
            return Err(Error::Integration(format!(
                "hierarchy invariants violated at t = {}: {rep:?}",
                t + h
            )));
        }
        worst.merge(rep);
        if (i + 1) % grid.record_every == 0 || i + 1 == grid.steps {
            record((i + 1) as f64 * h, &state, &mut points);
        }
    }
    Ok(HierarchyTrajectory {
        points,
        final_state: FockHierarchyState::from_flat(&y),
        worst,
    })
}

// --- coherently driven atom–cavity master equation -------------------------------

/// Joint atom ⊗ cavity density matrix, cavity truncated at `n_max` photons.
/// Basis index `s·(n_max+1) + n` with `s = 0` for `|g⟩`, `1` for `|e⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityMEState {
    pub n_max: usize,
    pub rho: Vec<C64>,
}

impl CavityMEState {
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Thermal cavity (truncated and renormalized) ⊗ inverted atom.
    pub fn initial(bath: BathParams, n_max: usize) -> Self {
        let levels = n_max + 1;
        let d = 2 * levels;
        let boltz: Vec<f64> = (0..levels)
            .map(|n| if bath.is_zero_temperature() { if n == 0 { 1.0 } else { 0.0 } } else { (-bath.mu() * n as f64).exp() })
            .collect();
        let z: f64 = boltz.iter().sum();
        let pg = bath.floor();
        let mut rho = vec![ZERO; d * d];
        for n in 0..levels {
            let pn = boltz[n] / z;
            rho[n * d + n] = C64::new(pg * pn, 0.0);
            let e = levels + n;
            rho[e * d + e] = C64::new((1.0 - pg) * pn, 0.0);
        }
        CavityMEState { n_max, rho }
    }

    pub fn p_g(&self) -> f64 {
        let d = self.dim();
        (0..=self.n_max).map(|n| self.rho[n * d + n].re).sum()
    }

    pub fn photon_number(&self) -> f64 {
        let d = self.dim();
        let levels = self.n_max + 1;
        (0..d).map(|i| (i % levels) as f64 * self.rho[i * d + i].re).sum()
    }

    pub fn top_level_population(&self) -> f64 {
        let d = self.dim();
        let top = self.n_max;
        let levels = self.n_max + 1;
        self.rho[top * d + top].re + self.rho[(levels + top) * d + levels + top].re
    }
}

impl CheckInvariants for CavityMEState {
    fn invariants(&self) -> InvariantReport {
        let d = self.dim();
        let tr: C64 = (0..d).map(|i| self.rho[i * d + i]).sum();
        let mut herm: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                herm = herm.max((self.rho[i * d + j] - self.rho[j * d + i].conj()).norm());
            }
        }
        InvariantReport {
            trace: (tr - 1.0).norm(),
            hermiticity: herm,
            conjugate_blocks: 0.0,
            top_level_population: self.top_level_population(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityPoint {
    pub t: f64,
    pub p_g: f64,
    pub photon_number: f64,
}

#[derive(Debug, Clone)]
pub struct CavityTrajectory {
    pub points: Vec<CavityPoint>,
    pub final_state: CavityMEState,
    pub worst: InvariantReport,
}

impl CavityTrajectory {
    pub fn final_p_g(&self) -> f64 {
        self.final_state.p_g()
    }
}

/// Integrate the atom–cavity master equation with a coherent input pulse:
///
/// `dρ/dt = −i[H_s, ρ] + κ(n̄+1)D[a]ρ + κn̄D[a†]ρ + √(ηκ)[ξ*a − ξa†, ρ]`,
/// `H_s = V a†σ₊ + V* σ₋ a`.
///
/// Fails if the top cavity level ever holds more than [`TRUNCATION_TOL`]
/// population.
pub fn integrate_driven_cavity_me<V, X>(
    control: V,
    signal: X,
    eta: f64,
    kappa: f64,
    bath: BathParams,
    n_max: usize,
    grid: TimeGrid,
) -> Result<CavityTrajectory>
where
    V: Fn(f64) -> C64,
    X: Fn(f64) -> C64,
{
    check_physical(eta, kappa)?;
    grid.validate()?;
    if n_max < 1 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let nbar = finite_nbar(bath)?;
    let levels = n_max + 1;
    let d = 2 * levels;
    let drive = (eta * kappa).sqrt();
    let sqrt_n: Vec<f64> = (0..=levels).map(|n| (n as f64).sqrt()).collect();
    let bound = sqrt_n[levels];

    let fastest = grid
        .times()
        .map(|t| {
            let (v, x) = (control(t), signal(t));
            (kappa * (2.0 * nbar + 1.0))
                .max(2.0 * v.norm() * bound)
                .max(2.0 * drive * x.norm() * bound)
        })
        .fold(0.0, f64::max);
    check_step(&grid, fastest)?;

    let idx = |s: usize, n: usize| s * levels + n;
    // diagonal of G: −κ(n̄+1)/2 · n − κn̄/2 · (aa†)_nn, with (aa†)_NN = 0 after truncation
    let diag: Vec<f64> = (0..d)
        .map(|i| {
            let n = i % levels;
            let aad = if n < n_max { (n + 1) as f64 } else { 0.0 };
            -0.5 * kappa * (nbar + 1.0) * n as f64 - 0.5 * kappa * nbar * aad
        })
        .collect();
    let down = kappa * (nbar + 1.0);
    let up = kappa * nbar;

    // sparse off-diagonal entries of G: (row, col, value)
    let mut off: Vec<(usize, usize, C64)> = Vec::with_capacity(4 * d);
    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let v = control(t);
        let x = signal(t);
        off.clear();
        let mi = C64::new(0.0, -1.0);
        for n in 0..n_max {
            let s = sqrt_n[n + 1];
            // −i H: H[(e,n+1),(g,n)] = V√(n+1), H[(g,n),(e,n+1)] = V*√(n+1)
            off.push((idx(E, n + 1), idx(G, n), mi * v * s));
            off.push((idx(G, n), idx(E, n + 1), mi * v.conj() * s));
            for sp in [G, E] {
                // √(ηκ)(ξ* a − ξ a†)
                off.push((idx(sp, n), idx(sp, n + 1), x.conj() * (drive * s)));
                off.push((idx(sp, n + 1), idx(sp, n), -x * (drive * s)));
            }
        }
        // Gρ + ρG†, written out so a non-Hermitian ρ is propagated faithfully
        for i in 0..d {
            for j in 0..d {
                dy[i * d + j] = y[i * d + j] * (diag[i] + diag[j]);
            }
        }
        for &(i, k, g) in off.iter() {
            let (src, dst) = (k * d, i * d);
            for j in 0..d {
                dy[dst + j] += g * y[src + j];
            }
            let gc = g.conj();
            for r in 0..d {
                dy[r * d + i] += y[r * d + k] * gc;
            }
        }
        for si in [G, E] {
            for ni in 0..levels {
                for sj in [G, E] {
                    for nj in 0..levels {
                        let mut acc = ZERO;
                        if ni < n_max && nj < n_max {
                            acc += y[idx(si, ni + 1) * d + idx(sj, nj + 1)] * (down * sqrt_n[ni + 1] * sqrt_n[nj + 1]);
                        }
                        if ni > 0 && nj > 0 && up > 0.0 {
                            acc += y[idx(si, ni - 1) * d + idx(sj, nj - 1)] * (up * sqrt_n[ni] * sqrt_n[nj]);
                        }
                        dy[idx(si, ni) * d + idx(sj, nj)] += acc;
                    }
                }
            }
        }
    };

    let mut state = CavityMEState::initial(bath, n_max);
    let mut rk = Rk4::new(d * d);
    let h = grid.step();
    let mut worst = state.invariants();
    let mut points = Vec::with_capacity(grid.steps / grid.record_every + 2);
    points.push(CavityPoint { t: 0.0, p_g: state.p_g(), photon_number: state.photon_number() });
    for i in 0..grid.steps {
        let t = i as f64 * h;
        rk.step(&mut rhs, t, h, &mut state.rho);
        let top = state.top_level_population();
        if top > TRUNCATION_TOL {
            return Err(Error::Integration(format!(
                "top cavity level population {top:.3e} exceeds {TRUNCATION_TOL:.0e} at t = {}; increase n_max (currently {n_max})",
                t + h
            )));
        }
        let last = i + 1 == grid.steps;
        if (i + 1) % grid.record_every == 0 || last {
            let rep = state.invariants();
            if rep.trace > CAVITY_TRACE_TOL || rep.hermiticity > CAVITY_HERMITIAN_TOL {
                return Err(Error::Integration(format!(
                    "cavity master equation invariants violated at t = {}: {rep:?}",
                    t + h
                )));
            }
            worst.merge(rep);
            points.push(CavityPoint { t: t + h, p_g: state.p_g(), photon_number: state.photon_number() });
        }
    }
    Ok(CavityTrajectory { points, final_state: state, worst })
}
