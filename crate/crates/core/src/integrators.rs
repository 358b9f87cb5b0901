//! Six single-step time discretisations of the semi-discrete problem
//! `M du/dt + A u = l(t)`, sharing assembled mass and stiffness operators.
//!
//! The core driver is [`sweep_scheme`], which advances the scheme while
//! keeping only a small window of states and hands each step to a callback;
//! [`run_scheme`] collects the whole trajectory on top of it.

use crate::error::Result;
use crate::fem1d::{
    assemble_load, assemble_mass, assemble_stiffness, BandedFactor, BandedMatrix, MassMode,
    NodalVector, SpatialMesh, TriDiagFactor, TriDiagMatrix,
};
use crate::problem::{Problem, TimeMesh};
use crate::scalar::Real;
use std::sync::Arc;

/// Identifier of a time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    BackwardEuler,
    CrankNicolson,
    ExtrapolatedEuler,
    Bdf2,
    LobattoIiic,
    Sdirk2,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::BackwardEuler,
        SchemeId::CrankNicolson,
        SchemeId::ExtrapolatedEuler,
        SchemeId::Bdf2,
        SchemeId::LobattoIiic,
        SchemeId::Sdirk2,
    ];

    /// Command-line name.
    pub fn cli_name(&self) -> &'static str {
        match self {
            SchemeId::BackwardEuler => "euler",
            SchemeId::CrankNicolson => "cn",
            SchemeId::ExtrapolatedEuler => "exeuler",
            SchemeId::Bdf2 => "bdf2",
            SchemeId::LobattoIiic => "lobatto3c",
            SchemeId::Sdirk2 => "sdirk2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.cli_name() == s)
    }

    /// Human-readable label for table captions.
    pub fn label(&self) -> &'static str {
        match self {
            SchemeId::BackwardEuler => "backward Euler",
            SchemeId::CrankNicolson => "Crank-Nicolson",
            SchemeId::ExtrapolatedEuler => "extrapolated Euler",
            SchemeId::Bdf2 => "BDF-2",
            SchemeId::LobattoIiic => "Lobatto IIIC",
            SchemeId::Sdirk2 => "SDIRK",
        }
    }
}

/// Diagonal Butcher coefficient of the two-stage SDIRK method,
/// `(2 - sqrt 2) / 2` (distinct from the kernel decay rate `gamma`).
pub fn sdirk_gamma<S: Real>() -> S {
    (S::two() - S::two().sqrt()) * S::half()
}

/// Per-run options shared by the steppers.
#[derive(Debug, Clone, Copy)]
pub struct SchemeOptions {
    /// Replace the source by its piecewise-linear-in-time interpolant in the
    /// SDIRK stage loads. Required for the closed-form reconstruction.
    pub sdirk_interpolated_source: bool,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            sdirk_interpolated_source: true,
        }
    }
}

/// Assembled spatial operators for one problem/mesh pair.
pub struct DiscreteSystem<S: Real> {
    pub mesh: SpatialMesh<S>,
    pub mass_mode: MassMode,
    pub mass: TriDiagMatrix<S>,
    pub stiffness: TriDiagMatrix<S>,
}

impl<S: Real> DiscreteSystem<S> {
    pub fn new(p: &Problem<S>, mesh: SpatialMesh<S>, mass_mode: MassMode) -> Self {
        let mass = assemble_mass(&mesh, mass_mode);
        let stiffness = assemble_stiffness(p, &mesh);
        DiscreteSystem {
            mesh,
            mass_mode,
            mass,
            stiffness,
        }
    }

    /// Quadrature load vector of the source at time `t`.
    pub fn load(&self, p: &Problem<S>, t: S) -> NodalVector<S> {
        assemble_load(&self.mesh, |x| p.source(x, t))
    }
}

/// Discrete initial state: nodal interpolant of the initial datum.
pub fn initial_state<S: Real>(p: &Problem<S>, mesh: &SpatialMesh<S>) -> NodalVector<S> {
    NodalVector::interpolate(mesh, |x| p.initial(x))
}

/// Stage values of the current step, borrowed from the sweep window.
pub enum StageRecord<'a, S: Real> {
    None,
    Extrapolated {
        v: &'a NodalVector<S>,
        v_prev: &'a NodalVector<S>,
        w_half: &'a NodalVector<S>,
        w: &'a NodalVector<S>,
    },
    Lobatto { v: &'a NodalVector<S> },
    Sdirk {
        k1: &'a NodalVector<S>,
        k2: &'a NodalVector<S>,
    },
}

/// Everything a per-step observer may need at step `j`.
pub struct StepRecord<'a, S: Real> {
    pub scheme: SchemeId,
    pub j: usize,
    pub t_prev: S,
    pub t: S,
    pub tau: S,
    /// Equals `tau` on the first step.
    pub tau_prev: S,
    pub u: &'a NodalVector<S>,
    pub u_prev: &'a NodalVector<S>,
    pub u_prev2: Option<&'a NodalVector<S>>,
    pub stages: StageRecord<'a, S>,
    pub options: SchemeOptions,
}

/// Owned per-step stage data, aligned with steps `1..=M`.
pub enum SchemeStages<S: Real> {
    None,
    /// One-step Euler sequence `v`, half-step values `w_half` and two-step
    /// Euler sequence `w`.
    Extrapolated {
        v: Vec<NodalVector<S>>,
        w_half: Vec<NodalVector<S>>,
        w: Vec<NodalVector<S>>,
    },
    /// First stage value of each step.
    Lobatto { v: Vec<NodalVector<S>> },
    /// Stage slopes of each step.
    Sdirk {
        k1: Vec<NodalVector<S>>,
        k2: Vec<NodalVector<S>>,
    },
}

/// Swept trajectory of one scheme over a time mesh.
pub struct Trajectory<S: Real> {
    pub scheme: SchemeId,
    pub time_mesh: TimeMesh<S>,
    pub states: Vec<NodalVector<S>>,
    pub stages: SchemeStages<S>,
    pub options: SchemeOptions,
}

impl<S: Real> Trajectory<S> {
    /// Borrowed view of step `j` in the form the reconstruction consumes.
    pub fn step_record(&self, j: usize) -> StepRecord<'_, S> {
        assert!(j >= 1 && j <= self.time_mesh.steps());
        let tau = self.time_mesh.tau(j);
        let tau_prev = if j >= 2 { self.time_mesh.tau(j - 1) } else { tau };
        let stages = match &self.stages {
            SchemeStages::None => StageRecord::None,
            SchemeStages::Extrapolated { v, w_half, w } => StageRecord::Extrapolated {
                v: &v[j - 1],
                v_prev: if j == 1 { &self.states[0] } else { &v[j - 2] },
                w_half: &w_half[j - 1],
                w: &w[j - 1],
            },
            SchemeStages::Lobatto { v } => StageRecord::Lobatto { v: &v[j - 1] },
            SchemeStages::Sdirk { k1, k2 } => StageRecord::Sdirk {
                k1: &k1[j - 1],
                k2: &k2[j - 1],
            },
        };
        StepRecord {
            scheme: self.scheme,
            j,
            t_prev: self.time_mesh.node(j - 1),
            t: self.time_mesh.node(j),
            tau,
            tau_prev,
            u: &self.states[j],
            u_prev: &self.states[j - 1],
            u_prev2: if j >= 2 { Some(&self.states[j - 2]) } else { None },
            stages,
            options: self.options,
        }
    }
}

fn mass_plus_stiff<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiff: &TriDiagMatrix<S>,
    c: S,
) -> TriDiagMatrix<S> {
    TriDiagMatrix::lin_comb(mass, S::one(), stiff, c)
}

/// One backward Euler step: `(M + tau A) u = M u_prev + tau l(t_j)`.
pub fn step_backward_euler<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> Result<NodalVector<S>> {
    let lhs = mass_plus_stiff(mass, stiffness, tau).factor()?;
    Ok(be_apply(&lhs, mass, tau, u_prev, load_end))
}

fn be_apply<S: Real>(
    lhs: &TriDiagFactor<S>,
    mass: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> NodalVector<S> {
    let rhs = mass.matvec(u_prev).scaled_add(tau, load_end);
    lhs.solve(&rhs)
}

/// One Crank-Nicolson step:
/// `(M + tau/2 A) u = (M - tau/2 A) u_prev + tau (l^{j-1} + l^j) / 2`.
pub fn step_crank_nicolson<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_start: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> Result<NodalVector<S>> {
    let lhs = mass_plus_stiff(mass, stiffness, tau * S::half()).factor()?;
    Ok(cn_apply(
        &lhs, mass, stiffness, tau, u_prev, load_start, load_end,
    ))
}

fn cn_apply<S: Real>(
    lhs: &TriDiagFactor<S>,
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_start: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> NodalVector<S> {
    let half_tau = tau * S::half();
    let rhs = mass_plus_stiff(mass, stiffness, -half_tau)
        .matvec(u_prev)
        .scaled_add(half_tau, load_start)
        .scaled_add(half_tau, load_end);
    lhs.solve(&rhs)
}

/// Output of one extrapolated-Euler step.
pub struct ExtrapolatedStep<S: Real> {
    pub u: NodalVector<S>,
    pub v: NodalVector<S>,
    pub w_half: NodalVector<S>,
    pub w: NodalVector<S>,
}

/// One extrapolation step: a full backward Euler step for `v`, two half
/// steps for `w`, combination `u = 2w - v`. The `v` and `w` sequences evolve
/// independently from the shared initial state.
pub fn step_extrapolated_euler<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    v_prev: &NodalVector<S>,
    w_prev: &NodalVector<S>,
    load_mid: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> Result<ExtrapolatedStep<S>> {
    let full = mass_plus_stiff(mass, stiffness, tau).factor()?;
    let half = mass_plus_stiff(mass, stiffness, tau * S::half()).factor()?;
    Ok(exeuler_apply(
        &full, &half, mass, tau, v_prev, w_prev, load_mid, load_end,
    ))
}

#[allow(clippy::too_many_arguments)]
fn exeuler_apply<S: Real>(
    full: &TriDiagFactor<S>,
    half: &TriDiagFactor<S>,
    mass: &TriDiagMatrix<S>,
    tau: S,
    v_prev: &NodalVector<S>,
    w_prev: &NodalVector<S>,
    load_mid: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> ExtrapolatedStep<S> {
    let half_tau = tau * S::half();
    let v = be_apply(full, mass, tau, v_prev, load_end);
    let w_half = be_apply(half, mass, half_tau, w_prev, load_mid);
    let w = be_apply(half, mass, half_tau, &w_half, load_end);
    let u = w.scale(S::two()).scaled_add(-S::one(), &v);
    ExtrapolatedStep { u, v, w_half, w }
}

/// Variable-step BDF-2 coefficients `alpha_j`, `beta_j` of
/// `D_t u^j = alpha_j d_t u^j + beta_j d_t u^{j-1}`.
pub fn bdf2_coefficients<S: Real>(tau: S, tau_prev: S) -> (S, S) {
    let denom = tau + tau_prev;
    ((S::two() * tau + tau_prev) / denom, -tau / denom)
}

/// One BDF-2 step (`j >= 2`):
/// `(alpha/tau M + A) u = l^j + M (alpha/tau u^{j-1} - beta (u^{j-1} - u^{j-2}) / tau_prev)`.
pub fn step_bdf2<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    tau_prev: S,
    u_prev: &NodalVector<S>,
    u_prev2: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> Result<NodalVector<S>> {
    let (alpha, _) = bdf2_coefficients(tau, tau_prev);
    let lhs = TriDiagMatrix::lin_comb(mass, alpha / tau, stiffness, S::one()).factor()?;
    Ok(bdf2_apply(
        &lhs, mass, tau, tau_prev, u_prev, u_prev2, load_end,
    ))
}

fn bdf2_apply<S: Real>(
    lhs: &TriDiagFactor<S>,
    mass: &TriDiagMatrix<S>,
    tau: S,
    tau_prev: S,
    u_prev: &NodalVector<S>,
    u_prev2: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> NodalVector<S> {
    let (alpha, beta) = bdf2_coefficients(tau, tau_prev);
    let hist = u_prev
        .scale(alpha / tau)
        .scaled_add(-beta / tau_prev, &u_prev.scaled_add(-S::one(), u_prev2));
    let rhs = mass.matvec(&hist).scaled_add(S::one(), load_end);
    lhs.solve(&rhs)
}

/// Assembles the coupled two-stage system of the Lobatto IIIC step as a
/// banded matrix over interleaved unknowns `[v_0, u_0, v_1, u_1, ...]`.
fn lobatto_matrix<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
) -> BandedMatrix<S> {
    let n = mass.size();
    let mut banded = BandedMatrix::zeros(2 * n, 3, 3);
    let half = S::half();
    // Stage equation rows: (M/tau + A/2) v - (A/2) u = r_a
    //                      (A/2) v + (M/tau + A/2) u = r_b
    let mut put = |i: usize, k: usize, m_ik: S, a_ik: S| {
        banded.add(2 * i, 2 * k, m_ik / tau + half * a_ik);
        banded.add(2 * i, 2 * k + 1, -half * a_ik);
        banded.add(2 * i + 1, 2 * k, half * a_ik);
        banded.add(2 * i + 1, 2 * k + 1, m_ik / tau + half * a_ik);
    };
    for i in 0..n {
        put(i, i, mass.diag[i], stiffness.diag[i]);
        if i > 0 {
            put(i, i - 1, mass.sub[i - 1], stiffness.sub[i - 1]);
        }
        if i + 1 < n {
            put(i, i + 1, mass.sup[i], stiffness.sup[i]);
        }
    }
    banded
}

fn lobatto_rhs<S: Real>(
    mass: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_start: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> Vec<S> {
    let n = mass.size();
    let mu = mass.matvec(u_prev);
    let half = S::half();
    let mut rhs = vec![S::zero(); 2 * n];
    for i in 0..n {
        let base = mu.as_slice()[i] / tau;
        let ls = load_start.as_slice()[i];
        let le = load_end.as_slice()[i];
        rhs[2 * i] = half * (ls - le) + base;
        rhs[2 * i + 1] = half * (ls + le) + base;
    }
    rhs
}

fn split_interleaved<S: Real>(z: &[S]) -> (NodalVector<S>, NodalVector<S>) {
    let n = z.len() / 2;
    let mut v = vec![S::zero(); n];
    let mut u = vec![S::zero(); n];
    for i in 0..n {
        v[i] = z[2 * i];
        u[i] = z[2 * i + 1];
    }
    (NodalVector::from_values(u), NodalVector::from_values(v))
}

/// One Lobatto IIIC step; returns `(u^j, v^j)` where `v` is the first stage
/// value. Both stage equations are solved as one coupled banded system.
pub fn step_lobatto_iiic<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_start: &NodalVector<S>,
    load_end: &NodalVector<S>,
) -> Result<(NodalVector<S>, NodalVector<S>)> {
    let factor = lobatto_matrix(mass, stiffness, tau).factor()?;
    let rhs = lobatto_rhs(mass, tau, u_prev, load_start, load_end);
    Ok(split_interleaved(&factor.solve(&rhs)))
}

/// Output of one SDIRK step.
pub struct SdirkStep<S: Real> {
    pub u: NodalVector<S>,
    pub k1: NodalVector<S>,
    pub k2: NodalVector<S>,
}

/// One two-stage SDIRK step: two sequential solves with `(M + gamma tau A)`,
/// then `u = u_prev + tau (k1 + k2) / 2`. The stage loads correspond to the
/// source at `t_{j-1} + gamma tau` and `t_j - gamma tau` (or the interpolated
/// source there).
pub fn step_sdirk2<S: Real>(
    mass: &TriDiagMatrix<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_stage1: &NodalVector<S>,
    load_stage2: &NodalVector<S>,
) -> Result<SdirkStep<S>> {
    let lhs = mass_plus_stiff(mass, stiffness, sdirk_gamma::<S>() * tau).factor()?;
    Ok(sdirk_apply(
        &lhs,
        stiffness,
        tau,
        u_prev,
        load_stage1,
        load_stage2,
    ))
}

fn sdirk_apply<S: Real>(
    lhs: &TriDiagFactor<S>,
    stiffness: &TriDiagMatrix<S>,
    tau: S,
    u_prev: &NodalVector<S>,
    load_stage1: &NodalVector<S>,
    load_stage2: &NodalVector<S>,
) -> SdirkStep<S> {
    let gamma = sdirk_gamma::<S>();
    let au = stiffness.matvec(u_prev);
    let rhs1 = load_stage1.scaled_add(-S::one(), &au);
    let k1 = lhs.solve(&rhs1);
    let coupling = (S::one() - S::two() * gamma) * tau;
    let rhs2 = load_stage2
        .scaled_add(-S::one(), &au)
        .scaled_add(-coupling, &stiffness.matvec(&k1));
    let k2 = lhs.solve(&rhs2);
    let u = u_prev.scaled_add(tau * S::half(), &k1.scaled_add(S::one(), &k2));
    SdirkStep { u, k1, k2 }
}

/// Factored step matrices, shared across steps of equal size.
#[derive(Clone)]
enum CachedFactors<S: Real> {
    Single(Arc<TriDiagFactor<S>>),
    Pair(Arc<TriDiagFactor<S>>, Arc<TriDiagFactor<S>>),
    Banded(Arc<BandedFactor<S>>),
}

impl<S: Real> CachedFactors<S> {
    fn build(scheme: SchemeId, sys: &DiscreteSystem<S>, tau: S, tau_prev: S) -> Result<Self> {
        let m = &sys.mass;
        let a = &sys.stiffness;
        Ok(match scheme {
            SchemeId::BackwardEuler => {
                CachedFactors::Single(Arc::new(mass_plus_stiff(m, a, tau).factor()?))
            }
            SchemeId::CrankNicolson => {
                CachedFactors::Single(Arc::new(mass_plus_stiff(m, a, tau * S::half()).factor()?))
            }
            SchemeId::ExtrapolatedEuler => CachedFactors::Pair(
                Arc::new(mass_plus_stiff(m, a, tau).factor()?),
                Arc::new(mass_plus_stiff(m, a, tau * S::half()).factor()?),
            ),
            SchemeId::Bdf2 => {
                let (alpha, _) = bdf2_coefficients(tau, tau_prev);
                CachedFactors::Single(Arc::new(
                    TriDiagMatrix::lin_comb(m, alpha / tau, a, S::one()).factor()?,
                ))
            }
            SchemeId::LobattoIiic => {
                CachedFactors::Banded(Arc::new(lobatto_matrix(m, a, tau).factor()?))
            }
            SchemeId::Sdirk2 => CachedFactors::Single(Arc::new(
                mass_plus_stiff(m, a, sdirk_gamma::<S>() * tau).factor()?,
            )),
        })
    }

    fn primary(&self) -> &TriDiagFactor<S> {
        match self {
            CachedFactors::Single(f) => f,
            CachedFactors::Pair(full, _) => full,
            CachedFactors::Banded(_) => unreachable!("banded factor used as tridiagonal"),
        }
    }
}

/// Advances the scheme over the whole time mesh, starting from the nodal
/// interpolant of the initial datum, invoking `on_step` once per step with a
/// borrowed window of the new state, its predecessors and stage values.
/// Keeps O(1) states in memory; step matrices are factored once per distinct
/// step size. Returns the final state.
pub fn sweep_scheme<S: Real>(
    scheme: SchemeId,
    p: &Problem<S>,
    sys: &DiscreteSystem<S>,
    tm: &TimeMesh<S>,
    opts: &SchemeOptions,
    mut on_step: impl FnMut(&StepRecord<'_, S>) -> Result<()>,
) -> Result<NodalVector<S>> {
    let m = tm.steps();
    let mut u_prev2: Option<NodalVector<S>> = None;
    let mut u_prev = initial_state(p, &sys.mesh);
    // Stage windows: the extrapolation sequences restart only at t = 0.
    let mut v_prev = u_prev.clone();
    let mut w_prev = u_prev.clone();

    let mut cached: Option<(S, S, CachedFactors<S>)> = None;
    let mut load_prev = sys.load(p, tm.node(0));

    for j in 1..=m {
        let tau = tm.tau(j);
        let tau_prev = if j >= 2 { tm.tau(j - 1) } else { tau };
        let t_prev = tm.node(j - 1);
        let t = tm.node(j);
        let load_end = sys.load(p, t);

        let factors = match &cached {
            Some((ct, cp, f)) if *ct == tau && *cp == tau_prev => f.clone(),
            _ => {
                let f = CachedFactors::build(scheme, sys, tau, tau_prev)?;
                cached = Some((tau, tau_prev, f.clone()));
                f
            }
        };

        // Compute the new state and this step's stage values.
        let mut stage_ex: Option<ExtrapolatedStep<S>> = None;
        let mut stage_lob: Option<NodalVector<S>> = None;
        let mut stage_sdirk: Option<(NodalVector<S>, NodalVector<S>)> = None;
        let u = match scheme {
            SchemeId::BackwardEuler => {
                be_apply(factors.primary(), &sys.mass, tau, &u_prev, &load_end)
            }
            SchemeId::CrankNicolson => cn_apply(
                factors.primary(),
                &sys.mass,
                &sys.stiffness,
                tau,
                &u_prev,
                &load_prev,
                &load_end,
            ),
            SchemeId::Bdf2 => {
                if j == 1 {
                    // Leading backward Euler step; its matrix differs from the
                    // interior BDF-2 matrix, so it is factored outside the cache.
                    let lhs = mass_plus_stiff(&sys.mass, &sys.stiffness, tau).factor()?;
                    be_apply(&lhs, &sys.mass, tau, &u_prev, &load_end)
                } else {
                    bdf2_apply(
                        factors.primary(),
                        &sys.mass,
                        tau,
                        tau_prev,
                        &u_prev,
                        u_prev2.as_ref().expect("two states of history"),
                        &load_end,
                    )
                }
            }
            SchemeId::ExtrapolatedEuler => {
                let CachedFactors::Pair(full, half) = &factors else {
                    unreachable!()
                };
                let load_mid = sys.load(p, t_prev + tau * S::half());
                let step = exeuler_apply(
                    full, half, &sys.mass, tau, &v_prev, &w_prev, &load_mid, &load_end,
                );
                let u = step.u.clone();
                stage_ex = Some(step);
                u
            }
            SchemeId::LobattoIiic => {
                let CachedFactors::Banded(factor) = &factors else {
                    unreachable!()
                };
                let rhs = lobatto_rhs(&sys.mass, tau, &u_prev, &load_prev, &load_end);
                let (u, v) = split_interleaved(&factor.solve(&rhs));
                stage_lob = Some(v);
                u
            }
            SchemeId::Sdirk2 => {
                let gamma = sdirk_gamma::<S>();
                let (l1, l2) = if opts.sdirk_interpolated_source {
                    (
                        load_prev
                            .scale(S::one() - gamma)
                            .scaled_add(gamma, &load_end),
                        load_prev
                            .scale(gamma)
                            .scaled_add(S::one() - gamma, &load_end),
                    )
                } else {
                    (sys.load(p, t_prev + gamma * tau), sys.load(p, t - gamma * tau))
                };
                let step = sdirk_apply(
                    factors.primary(),
                    &sys.stiffness,
                    tau,
                    &u_prev,
                    &l1,
                    &l2,
                );
                let u = step.u.clone();
                stage_sdirk = Some((step.k1, step.k2));
                u
            }
        };

        let stages = match scheme {
            SchemeId::ExtrapolatedEuler => {
                let step = stage_ex.as_ref().unwrap();
                StageRecord::Extrapolated {
                    v: &step.v,
                    v_prev: &v_prev,
                    w_half: &step.w_half,
                    w: &step.w,
                }
            }
            SchemeId::LobattoIiic => StageRecord::Lobatto {
                v: stage_lob.as_ref().unwrap(),
            },
            SchemeId::Sdirk2 => {
                let (k1, k2) = stage_sdirk.as_ref().unwrap();
                StageRecord::Sdirk { k1, k2 }
            }
            _ => StageRecord::None,
        };
        on_step(&StepRecord {
            scheme,
            j,
            t_prev,
            t,
            tau,
            tau_prev,
            u: &u,
            u_prev: &u_prev,
            u_prev2: u_prev2.as_ref(),
            stages,
            options: *opts,
        })?;

        // Shift the window.
        if let Some(step) = stage_ex {
            v_prev = step.v;
            w_prev = step.w;
        }
        u_prev2 = Some(std::mem::replace(&mut u_prev, u));
        load_prev = load_end;
    }
    Ok(u_prev)
}

/// Sweeps the scheme and materialises the full trajectory (all states plus
/// per-step stage data).
pub fn run_scheme<S: Real>(
    scheme: SchemeId,
    p: &Problem<S>,
    sys: &DiscreteSystem<S>,
    tm: &TimeMesh<S>,
    opts: &SchemeOptions,
) -> Result<Trajectory<S>> {
    let m = tm.steps();
    let mut states = Vec::with_capacity(m + 1);
    states.push(initial_state(p, &sys.mesh));
    let mut stages = match scheme {
        SchemeId::ExtrapolatedEuler => SchemeStages::Extrapolated {
            v: Vec::with_capacity(m),
            w_half: Vec::with_capacity(m),
            w: Vec::with_capacity(m),
        },
        SchemeId::LobattoIiic => SchemeStages::Lobatto {
            v: Vec::with_capacity(m),
        },
        SchemeId::Sdirk2 => SchemeStages::Sdirk {
            k1: Vec::with_capacity(m),
            k2: Vec::with_capacity(m),
        },
        _ => SchemeStages::None,
    };

    sweep_scheme(scheme, p, sys, tm, opts, |record| {
        states.push(record.u.clone());
        match (&mut stages, &record.stages) {
            (SchemeStages::None, StageRecord::None) => {}
            (
                SchemeStages::Extrapolated { v, w_half, w },
                StageRecord::Extrapolated {
                    v: sv,
                    w_half: swh,
                    w: sw,
                    ..
                },
            ) => {
                v.push((*sv).clone());
                w_half.push((*swh).clone());
                w.push((*sw).clone());
            }
            (SchemeStages::Lobatto { v }, StageRecord::Lobatto { v: sv }) => {
                v.push((*sv).clone());
            }
            (SchemeStages::Sdirk { k1, k2 }, StageRecord::Sdirk { k1: s1, k2: s2 }) => {
                k1.push((*s1).clone());
                k2.push((*s2).clone());
            }
            _ => unreachable!("stage storage matches scheme"),
        }
        Ok(())
    })?;

    Ok(Trajectory {
        scheme,
        time_mesh: tm.clone(),
        states,
        stages,
        options: *opts,
    })
}
