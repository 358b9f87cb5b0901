//! Discrete elliptic defects `psi^j`, their difference quotients, the step
//! residuals `Psi^j`, and the per-level elliptic error estimates that feed
//! the final-time bound.

use crate::elliptic::EllipticEstimator;
use crate::error::{Error, Result};
use crate::fem1d::NodalVector;
use crate::integrators::{
    sdirk_gamma, DiscreteSystem, SchemeId, StageRecord, StepRecord, Trajectory,
};
use crate::problem::Problem;
use crate::scalar::Real;

/// Post-processed reconstruction data of a trajectory.
///
/// `psi[j]` is the discrete defect at level `j`, `delta_psi[j-1] = d_t psi^j`,
/// `big_psi[j-1] = (psi^j + psi^{j-1})/2 + d_t u_h^j`, and `eta_ell[j]` /
/// `eta_ell_delta[j-1]` are the elliptic estimates of the reconstruction
/// error and of its difference quotient.
pub struct ReconstructionData<S: Real> {
    pub psi: Vec<NodalVector<S>>,
    pub delta_psi: Vec<NodalVector<S>>,
    pub big_psi: Vec<NodalVector<S>>,
    pub eta_ell: Vec<S>,
    pub eta_ell_delta: Vec<S>,
}

/// Defect from the variational definition: `psi = M^{-1} (A u - load(f(., t)))`.
///
/// Used for `j = 0` on every scheme, and whenever no closed form applies.
pub fn psi_general<S: Real>(
    p: &Problem<S>,
    sys: &DiscreteSystem<S>,
    u: &NodalVector<S>,
    t: S,
) -> Result<NodalVector<S>> {
    let load = sys.load(p, t);
    let rhs = sys.stiffness.matvec(u).scaled_add(-S::one(), &load);
    sys.mass.solve(&rhs)
}

/// Defect of one step from the scheme's own update, avoiding the mass solve.
///
/// Requires `psi^{j-1}` (the Crank-Nicolson relation is a two-term
/// recursion); for SDIRK the stage loads must have been built from the
/// interpolated source.
pub fn psi_closed_form_step<S: Real>(
    record: &StepRecord<'_, S>,
    psi_prev: &NodalVector<S>,
) -> Result<NodalVector<S>> {
    let tau = record.tau;
    let delta_u = record.u.difference_quotient(record.u_prev, tau);
    match (record.scheme, &record.stages) {
        (SchemeId::BackwardEuler, _) => Ok(delta_u.scale(-S::one())),
        (SchemeId::CrankNicolson, _) => {
            // (psi^j + psi^{j-1})/2 = -d_t u^j.
            Ok(delta_u.scale(-S::two()).scaled_add(-S::one(), psi_prev))
        }
        (SchemeId::Bdf2, _) => {
            if record.j == 1 {
                // Leading backward Euler step; second difference set to zero.
                Ok(delta_u.scale(-S::one()))
            } else {
                let u_prev2 = record.u_prev2.ok_or(Error::MissingStages {
                    scheme: record.scheme.label(),
                })?;
                let delta_u_prev = record.u_prev.difference_quotient(u_prev2, record.tau_prev);
                let second = delta_u
                    .scaled_add(-S::one(), &delta_u_prev)
                    .scale(S::one() / (tau + record.tau_prev));
                Ok(delta_u.scale(-S::one()).scaled_add(-tau, &second))
            }
        }
        (SchemeId::ExtrapolatedEuler, StageRecord::Extrapolated { v, v_prev, w_half, w }) => {
            let dw = w.difference_quotient(w_half, tau);
            let dv = v.difference_quotient(v_prev, tau);
            Ok(dw.scale(-S::of(4.0)).scaled_add(S::one(), &dv))
        }
        (SchemeId::LobattoIiic, StageRecord::Lobatto { v }) => {
            Ok(v.difference_quotient(record.u, tau))
        }
        (SchemeId::Sdirk2, StageRecord::Sdirk { k1, k2 }) => {
            if !record.options.sdirk_interpolated_source {
                return Err(Error::invalid(
                    "psi closed form",
                    "SDIRK without the interpolated source has no closed form",
                ));
            }
            let two_gamma = S::two() * sdirk_gamma::<S>();
            let diff = k1.scaled_add(-S::one(), k2);
            Ok(diff.scale(S::one() / two_gamma).scaled_add(-S::one(), k1))
        }
        _ => Err(Error::MissingStages {
            scheme: record.scheme.label(),
        }),
    }
}

/// Defect of step `j` of a materialised trajectory.
pub fn psi_closed_form<S: Real>(
    traj: &Trajectory<S>,
    j: usize,
    psi_prev: &NodalVector<S>,
) -> Result<NodalVector<S>> {
    psi_closed_form_step(&traj.step_record(j), psi_prev)
}

/// Step residual from its definition, `(psi^j + psi^{j-1})/2 + d_t u_h^j`.
pub fn big_psi_general<S: Real>(
    psi_j: &NodalVector<S>,
    psi_prev: &NodalVector<S>,
    delta_u: &NodalVector<S>,
) -> NodalVector<S> {
    psi_j
        .scaled_add(S::one(), psi_prev)
        .scale(S::half())
        .scaled_add(S::one(), delta_u)
}

/// Step residual of one step, cross-checked against the scheme-specific
/// closed form where one exists. Crank-Nicolson returns the exact zero
/// vector (its defining relation makes the residual vanish identically).
pub fn big_psi_step<S: Real>(
    record: &StepRecord<'_, S>,
    psi_j: &NodalVector<S>,
    psi_prev: &NodalVector<S>,
    delta_psi_j: &NodalVector<S>,
) -> NodalVector<S> {
    let tau = record.tau;
    let delta_u = record.u.difference_quotient(record.u_prev, tau);
    let general = big_psi_general(psi_j, psi_prev, &delta_u);
    let closed: Option<NodalVector<S>> = match record.scheme {
        SchemeId::BackwardEuler => Some(delta_psi_j.scale(-tau * S::half())),
        SchemeId::CrankNicolson => Some(NodalVector::zeros(psi_j.len())),
        SchemeId::Bdf2 => {
            let second = match record.u_prev2 {
                Some(u_prev2) if record.j >= 2 => {
                    let delta_u_prev = record.u_prev.difference_quotient(u_prev2, record.tau_prev);
                    delta_u
                        .scaled_add(-S::one(), &delta_u_prev)
                        .scale(S::one() / (tau + record.tau_prev))
                }
                _ => NodalVector::zeros(psi_j.len()),
            };
            Some(delta_psi_j.scale(-tau * S::half()).scaled_add(-tau, &second))
        }
        _ => None,
    };
    if let Some(closed) = closed {
        let gap = general.scaled_add(-S::one(), &closed).nodal_max_abs();
        let scale = S::one() + psi_j.nodal_max_abs() + psi_prev.nodal_max_abs();
        let tol = (S::of(1e-9) * scale).max(S::epsilon() * S::of(100.0) * scale);
        assert!(
            gap <= tol,
            "step residual closed form disagrees with the definition: gap {gap:e}"
        );
        if record.scheme == SchemeId::CrankNicolson {
            return closed;
        }
    }
    general
}

/// Builds defects, difference quotients, step residuals and elliptic
/// estimates for a whole trajectory.
pub fn build_reconstruction<S: Real>(
    p: &Problem<S>,
    sys: &DiscreteSystem<S>,
    traj: &Trajectory<S>,
    estimator: &dyn EllipticEstimator<S>,
) -> Result<ReconstructionData<S>> {
    let m = traj.time_mesh.steps();
    let use_closed_form =
        traj.scheme != SchemeId::Sdirk2 || traj.options.sdirk_interpolated_source;

    let mut psi = Vec::with_capacity(m + 1);
    psi.push(psi_general(p, sys, &traj.states[0], traj.time_mesh.node(0))?);
    for j in 1..=m {
        let psi_prev = psi.last().expect("previous defect");
        let next = if use_closed_form {
            psi_closed_form(traj, j, psi_prev)?
        } else {
            psi_general(p, sys, &traj.states[j], traj.time_mesh.node(j))?
        };
        psi.push(next);
    }

    let mut delta_psi = Vec::with_capacity(m);
    let mut big_psi = Vec::with_capacity(m);
    for j in 1..=m {
        let tau = traj.time_mesh.tau(j);
        let dpsi = psi[j].difference_quotient(&psi[j - 1], tau);
        let bpsi = big_psi_step(&traj.step_record(j), &psi[j], &psi[j - 1], &dpsi);
        delta_psi.push(dpsi);
        big_psi.push(bpsi);
    }

    let mut eta_ell = Vec::with_capacity(m + 1);
    for (j, psi_j) in psi.iter().enumerate() {
        let t = traj.time_mesh.node(j);
        eta_ell.push(level_estimate(p, sys, estimator, &traj.states[j], psi_j, t)?);
    }

    let mut eta_ell_delta = Vec::with_capacity(m);
    for j in 1..=m {
        let tau = traj.time_mesh.tau(j);
        let delta_u = traj.states[j].difference_quotient(&traj.states[j - 1], tau);
        eta_ell_delta.push(level_delta_estimate(
            p,
            sys,
            estimator,
            &delta_u,
            &delta_psi[j - 1],
            traj.time_mesh.node(j - 1),
            traj.time_mesh.node(j),
        )?);
    }

    Ok(ReconstructionData {
        psi,
        delta_psi,
        big_psi,
        eta_ell,
        eta_ell_delta,
    })
}

/// `eta_ell^j = eta(u_h^j, f^j + psi^j)`.
pub fn level_estimate<S: Real>(
    p: &Problem<S>,
    sys: &DiscreteSystem<S>,
    estimator: &dyn EllipticEstimator<S>,
    u: &NodalVector<S>,
    psi: &NodalVector<S>,
    t: S,
) -> Result<S> {
    let mesh = &sys.mesh;
    let est = estimator.estimate(p, mesh, u, &|x| p.source(x, t) + psi.eval(mesh, x))?;
    Ok(est.eta)
}

/// `eta_{ell,d}^j = eta(d_t u_h^j, d_t f^j + d_t psi^j)` with the source
/// quotient formed from exact point evaluations.
pub fn level_delta_estimate<S: Real>(
    p: &Problem<S>,
    sys: &DiscreteSystem<S>,
    estimator: &dyn EllipticEstimator<S>,
    delta_u: &NodalVector<S>,
    delta_psi: &NodalVector<S>,
    t_prev: S,
    t: S,
) -> Result<S> {
    let mesh = &sys.mesh;
    let tau = t - t_prev;
    let est = estimator.estimate(p, mesh, delta_u, &|x| {
        (p.source(x, t) - p.source(x, t_prev)) / tau + delta_psi.eval(mesh, x)
    })?;
    Ok(est.eta)
}
