//! Study harness: streaming estimator runs, the Richardson-extrapolated
//! reference solution, final-time error measurement and convergence tables.

use crate::elliptic::IntervalBoundEstimator;
use crate::error::{Error, Result};
use crate::estimator::{
    assemble_report, eta_delta_psi_and_big_psi, eta_f, eta_init, eta_ell_mk, scan_split_index,
    weights, EstimatorReport,
};
use crate::fem1d::{MassMode, NodalVector, SpatialMesh, DEFAULT_SUP_SAMPLES};
use crate::integrators::{
    initial_state, sweep_scheme, DiscreteSystem, SchemeId, SchemeOptions,
};
use crate::problem::{GreenBounds, Problem, TimeMesh};
use crate::reconstruction::{
    big_psi_step, level_delta_estimate, level_estimate, psi_closed_form_step, psi_general,
};
use crate::scalar::Real;

/// Choice of the split index of the elliptic component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    Fixed(usize),
    /// Evaluate every admissible split index and keep the smallest bound.
    ScanMin,
}

/// Element count of the reference solver's coupling `h = tau`:
/// `(b - a) / tau` elements.
fn reference_elements<S: Real>(p: &Problem<S>, m: usize) -> usize {
    let tau = p.final_time() / S::of_usize(m);
    (p.domain_width() / tau)
        .round()
        .to_usize()
        .unwrap_or(2)
        .max(2)
}

/// One complete run: sweep, reconstruction and final-time bound, computed in
/// a streaming fashion (O(mesh) memory, independent of the step count).
pub struct SingleRun<S: Real> {
    pub scheme: SchemeId,
    pub mesh: SpatialMesh<S>,
    pub time_mesh: TimeMesh<S>,
    pub final_state: NodalVector<S>,
    pub report: EstimatorReport<S>,
}

/// Runs one scheme at resolution `M`, meaning `M` mesh intervals in space
/// and in time (the convention of the benchmark tables), and assembles the
/// final-time bound.
pub fn run_estimate<S: Real>(
    p: &Problem<S>,
    gb: &GreenBounds<S>,
    scheme: SchemeId,
    m: usize,
    split: SplitChoice,
    mass_mode: MassMode,
    opts: &SchemeOptions,
) -> Result<SingleRun<S>> {
    let mesh = SpatialMesh::uniform(p.domain_left(), p.domain_right(), m);
    let tm = TimeMesh::uniform(p.final_time(), m);
    run_estimate_on(p, gb, scheme, &mesh, &tm, split, mass_mode, opts)
}

/// As [`run_estimate`], on caller-supplied meshes.
#[allow(clippy::too_many_arguments)]
pub fn run_estimate_on<S: Real>(
    p: &Problem<S>,
    gb: &GreenBounds<S>,
    scheme: SchemeId,
    mesh: &SpatialMesh<S>,
    tm: &TimeMesh<S>,
    split: SplitChoice,
    mass_mode: MassMode,
    opts: &SchemeOptions,
) -> Result<SingleRun<S>> {
    let m = tm.steps();
    if let SplitChoice::Fixed(k) = split {
        if k > m.saturating_sub(1) {
            return Err(Error::SplitIndexOutOfRange { k, max: m - 1 });
        }
    }
    let estimator = IntervalBoundEstimator::default();
    let sys = DiscreteSystem::new(p, mesh.clone(), mass_mode);
    let use_closed_form = scheme != SchemeId::Sdirk2 || opts.sdirk_interpolated_source;

    let u0 = initial_state(p, &sys.mesh);
    let mut psi_prev = psi_general(p, &sys, &u0, tm.node(0))?;
    let mut eta_ell_levels = Vec::with_capacity(m + 1);
    eta_ell_levels.push(level_estimate(
        p,
        &sys,
        &estimator,
        &u0,
        &psi_prev,
        tm.node(0),
    )?);
    let mut eta_ell_delta_levels = Vec::with_capacity(m);
    let mut dpsi_norms = Vec::with_capacity(m);
    let mut bpsi_norms = Vec::with_capacity(m);

    let final_state = sweep_scheme(scheme, p, &sys, tm, opts, |record| {
        let psi_j = if use_closed_form {
            psi_closed_form_step(record, &psi_prev)?
        } else {
            psi_general(p, &sys, record.u, record.t)?
        };
        let dpsi = psi_j.difference_quotient(&psi_prev, record.tau);
        let bpsi = big_psi_step(record, &psi_j, &psi_prev, &dpsi);
        dpsi_norms.push(dpsi.nodal_max_abs());
        bpsi_norms.push(bpsi.nodal_max_abs());
        eta_ell_levels.push(level_estimate(
            p,
            &sys,
            &estimator,
            record.u,
            &psi_j,
            record.t,
        )?);
        let delta_u = record.u.difference_quotient(record.u_prev, record.tau);
        eta_ell_delta_levels.push(level_delta_estimate(
            p,
            &sys,
            &estimator,
            &delta_u,
            &dpsi,
            record.t_prev,
            record.t,
        )?);
        psi_prev = psi_j;
        Ok(())
    })?;

    let w = weights(gb, tm);
    let k = match split {
        SplitChoice::Fixed(k) => k,
        SplitChoice::ScanMin => {
            scan_split_index(gb, tm, &w, &eta_ell_levels, &eta_ell_delta_levels).0
        }
    };
    let init = eta_init(gb, tm, p, &sys.mesh, &u0, DEFAULT_SUP_SAMPLES);
    let ell = eta_ell_mk(gb, tm, &w, k, &eta_ell_levels, &eta_ell_delta_levels)?;
    let f = eta_f(gb, tm, p, &sys.mesh, &w, DEFAULT_SUP_SAMPLES);
    let (dpsi, bpsi) = eta_delta_psi_and_big_psi(gb, tm, &w, &dpsi_norms, &bpsi_norms);
    let report = assemble_report(
        tm,
        &w,
        &eta_ell_levels,
        &eta_ell_delta_levels,
        k,
        init,
        ell,
        f,
        dpsi,
        bpsi,
    );
    Ok(SingleRun {
        scheme,
        mesh: sys.mesh,
        time_mesh: tm.clone(),
        final_state,
        report,
    })
}

/// High-accuracy final-time solution: Crank-Nicolson on meshes refined by
/// `refinement` and `refinement/2` relative to the finest study resolution,
/// Richardson-extrapolated (the orders combine to at least three). Evaluable
/// anywhere by P1 interpolation on the finer mesh.
pub struct Reference<S: Real> {
    mesh: SpatialMesh<S>,
    values: NodalVector<S>,
    /// Max-norm distance of the two levels divided by three: the size of the
    /// Richardson correction, a proxy for the remaining reference error.
    pub richardson_gap: S,
}

impl<S: Real> Reference<S> {
    pub fn eval(&self, x: S) -> S {
        self.values.eval(&self.mesh, x)
    }

    /// Measurements below roughly ten times this floor are polluted by the
    /// reference's own error.
    pub fn pollution_floor(&self) -> S {
        self.richardson_gap
    }
}

fn cn_final<S: Real>(
    p: &Problem<S>,
    m: usize,
    mass_mode: MassMode,
) -> Result<(SpatialMesh<S>, NodalVector<S>)> {
    let mesh = SpatialMesh::uniform(p.domain_left(), p.domain_right(), reference_elements(p, m));
    let tm = TimeMesh::uniform(p.final_time(), m);
    let sys = DiscreteSystem::new(p, mesh, mass_mode);
    let u = sweep_scheme(
        SchemeId::CrankNicolson,
        p,
        &sys,
        &tm,
        &SchemeOptions::default(),
        |_| Ok(()),
    )?;
    Ok((sys.mesh, u))
}

/// Builds the reference for a study whose finest resolution is `base_m`.
/// `refinement` must be even and at least 4.
pub fn reference_solution<S: Real>(
    p: &Problem<S>,
    base_m: usize,
    refinement: usize,
    mass_mode: MassMode,
) -> Result<Reference<S>> {
    if refinement < 4 || !refinement.is_multiple_of(2) {
        return Err(Error::invalid(
            "reference refinement",
            "must be even and at least 4",
        ));
    }
    let (coarse_mesh, coarse) = cn_final(p, base_m * refinement / 2, mass_mode)?;
    let (fine_mesh, fine) = cn_final(p, base_m * refinement, mass_mode)?;

    let n = fine_mesh.n_interior();
    let mut values = vec![S::zero(); n];
    let mut gap = S::zero();
    let third = S::one() / S::of(3.0);
    for i in 1..=n {
        let x = fine_mesh.node(i);
        let uf = fine.node_value(i);
        let uc = coarse.eval(&coarse_mesh, x);
        values[i - 1] = (S::of(4.0) * uf - uc) * third;
        gap = gap.max((uf - uc).abs());
    }
    Ok(Reference {
        mesh: fine_mesh,
        values: NodalVector::from_values(values),
        richardson_gap: gap * third,
    })
}

/// Final-time error `e_M`: the difference to the reference sampled at eight
/// points per study element (`r h / 7`, `r = 0..=7`).
pub fn measure_error<S: Real>(
    u_final: &NodalVector<S>,
    mesh: &SpatialMesh<S>,
    reference: &Reference<S>,
) -> S {
    let mut sup = S::zero();
    for e in 0..mesh.n_elements() {
        let xl = mesh.node(e);
        let h = mesh.h(e);
        for r in 0..=DEFAULT_SUP_SAMPLES {
            let x = xl + h * S::of_usize(r) / S::of_usize(DEFAULT_SUP_SAMPLES);
            sup = sup.max((reference.eval(x) - u_final.eval(mesh, x)).abs());
        }
    }
    sup
}

/// Configuration of a convergence study.
pub struct StudyConfig {
    pub scheme: SchemeId,
    pub m_list: Vec<usize>,
    pub k: usize,
    pub mass_mode: MassMode,
    pub options: SchemeOptions,
    pub ref_refinement: usize,
}

impl StudyConfig {
    pub fn new(scheme: SchemeId, m_list: Vec<usize>) -> Self {
        StudyConfig {
            scheme,
            m_list,
            k: 0,
            mass_mode: MassMode::Consistent,
            options: SchemeOptions::default(),
            ref_refinement: 8,
        }
    }
}

/// One table row: resolution, measured error, order, bound and efficiency,
/// plus the bound's component decomposition.
#[derive(Debug, Clone)]
pub struct ConvergenceRow<S: Real> {
    pub m: usize,
    pub e_m: S,
    /// Order against the previous row, present when that row ran at `m/2`.
    pub p_m: Option<S>,
    pub eta: S,
    pub chi: S,
    pub eta_init: S,
    pub eta_f: S,
    pub eta_ell_mk: S,
    pub eta_big_psi: S,
    pub eta_delta_psi: S,
}

/// Runs the scheme across `m_list`, measures against a shared reference and
/// tabulates error, order, bound and efficiency. Rows are computed
/// concurrently and merged in list order.
pub fn convergence_study<S: Real>(
    p: &Problem<S>,
    gb: &GreenBounds<S>,
    cfg: &StudyConfig,
) -> Result<Vec<ConvergenceRow<S>>> {
    if cfg.m_list.is_empty() {
        return Ok(Vec::new());
    }
    let base_m = *cfg.m_list.last().unwrap();
    let reference = reference_solution(p, base_m, cfg.ref_refinement, cfg.mass_mode)?;
    convergence_study_against(p, gb, cfg, &reference)
}

/// As [`convergence_study`], measuring against a caller-supplied reference.
pub fn convergence_study_against<S: Real>(
    p: &Problem<S>,
    gb: &GreenBounds<S>,
    cfg: &StudyConfig,
    reference: &Reference<S>,
) -> Result<Vec<ConvergenceRow<S>>> {
    if cfg.m_list.is_empty() {
        return Ok(Vec::new());
    }
    if !cfg.m_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(
            "study resolutions",
            "must be strictly increasing",
        ));
    }
    let min_m = *cfg.m_list.first().unwrap();
    if cfg.k > min_m - 1 {
        return Err(Error::SplitIndexOutOfRange {
            k: cfg.k,
            max: min_m - 1,
        });
    }

    let results: Vec<Result<(S, EstimatorReport<S>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .m_list
            .iter()
            .map(|&m| {
                scope.spawn(move || {
                    let run = run_estimate(
                        p,
                        gb,
                        cfg.scheme,
                        m,
                        SplitChoice::Fixed(cfg.k),
                        cfg.mass_mode,
                        &cfg.options,
                    )?;
                    let e_m = measure_error(&run.final_state, &run.mesh, reference);
                    Ok((e_m, run.report))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("study row panicked"))
            .collect()
    });

    let mut rows = Vec::with_capacity(cfg.m_list.len());
    let mut prev: Option<(usize, S)> = None;
    for (&m, result) in cfg.m_list.iter().zip(results) {
        let (e_m, report) = result?;
        let p_m = prev
            .filter(|(pm, _)| pm * 2 == m)
            .map(|(_, pe): (usize, S)| (pe.ln() - e_m.ln()) / S::two().ln());
        rows.push(ConvergenceRow {
            m,
            e_m,
            p_m,
            eta: report.total,
            chi: e_m / report.total,
            eta_init: report.eta_init,
            eta_f: report.eta_f,
            eta_ell_mk: report.eta_ell_mk,
            eta_big_psi: report.eta_big_psi,
            eta_delta_psi: report.eta_delta_psi,
        });
        prev = Some((m, e_m));
    }
    Ok(rows)
}
