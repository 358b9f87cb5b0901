//! CSV and markdown emitters for convergence tables and per-run reports.
//!
//! CSV cells use `.` decimals and scientific notation with four significant
//! digits; every file starts with a header row. Output is a pure function of
//! the rows, so reruns produce byte-identical files.

use crate::estimator::EstimatorReport;
use crate::integrators::SchemeId;
use crate::scalar::Real;
use crate::study::ConvergenceRow;
use std::fmt::Write;

fn sci<S: Real>(v: S) -> String {
    if v.is_infinite() {
        return "inf".to_string();
    }
    format!("{v:.3e}")
}

fn order_str<S: Real>(p: Option<S>) -> String {
    p.map(|v| format!("{v:.2}")).unwrap_or_default()
}

/// Efficiency rendered as `1/n` with nearest rounding.
pub fn chi_fraction<S: Real>(chi: S) -> String {
    if chi <= S::zero() {
        return String::from("0");
    }
    let inv = (S::one() / chi).round();
    format!("1/{}", inv.to_u64().unwrap_or(0))
}

/// Orders of a component column between consecutive mesh-doubling rows.
fn column_orders<S: Real>(rows: &[ConvergenceRow<S>], get: impl Fn(&ConvergenceRow<S>) -> S) -> Vec<Option<S>> {
    let mut orders = vec![None; rows.len()];
    for i in 1..rows.len() {
        if rows[i - 1].m * 2 == rows[i].m {
            let prev = get(&rows[i - 1]);
            let cur = get(&rows[i]);
            if prev > S::zero() && cur > S::zero() {
                orders[i] = Some((prev / cur).log2());
            }
        }
    }
    orders
}

/// Error/order/bound/efficiency table, CSV.
pub fn table1_csv<S: Real>(rows: &[ConvergenceRow<S>]) -> String {
    let mut out = String::from("M,e_M,p_M,eta_M0,chi_M,chi_M_frac\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.m,
            sci(row.e_m),
            order_str(row.p_m),
            sci(row.eta),
            sci(row.chi),
            chi_fraction(row.chi),
        );
    }
    out
}

/// Error/order/bound/efficiency table, markdown.
pub fn table1_markdown<S: Real>(scheme: SchemeId, rows: &[ConvergenceRow<S>]) -> String {
    let mut out = format!(
        "Final-time error and guaranteed bound, {}\n\n| M | e_M | p_M | eta^(M,0) | chi_M |\n|---:|---:|---:|---:|---:|\n",
        scheme.label()
    );
    for row in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            row.m,
            sci(row.e_m),
            order_str(row.p_m),
            sci(row.eta),
            chi_fraction(row.chi),
        );
    }
    out
}

const COMPONENTS: [&str; 5] = ["eta_init", "eta_f", "eta_ell_M0", "eta_Psi", "eta_dpsi"];

fn component_getters<S: Real>() -> [fn(&ConvergenceRow<S>) -> S; 5] {
    [
        |r| r.eta_init,
        |r| r.eta_f,
        |r| r.eta_ell_mk,
        |r| r.eta_big_psi,
        |r| r.eta_delta_psi,
    ]
}

/// Component breakdown table, CSV: each component column followed by its
/// measured order column.
pub fn table2_csv<S: Real>(rows: &[ConvergenceRow<S>]) -> String {
    let mut out = String::from("M");
    for name in COMPONENTS {
        let _ = write!(out, ",{name},p_{name}");
    }
    out.push('\n');
    let getters = component_getters::<S>();
    let orders: Vec<Vec<Option<S>>> = getters.iter().map(|g| column_orders(rows, g)).collect();
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(out, "{}", row.m);
        for (g, ord) in getters.iter().zip(&orders) {
            let _ = write!(out, ",{},{}", sci(g(row)), order_str(ord[i]));
        }
        out.push('\n');
    }
    out
}

/// Component breakdown table, markdown, measured orders in parentheses.
pub fn table2_markdown<S: Real>(scheme: SchemeId, rows: &[ConvergenceRow<S>]) -> String {
    let mut out = format!(
        "Composition of the error bound, {}\n\n| M | eta_init | eta_f | eta_ell^(M,0) | eta_Psi | eta_dpsi |\n|---:|---:|---:|---:|---:|---:|\n",
        scheme.label()
    );
    let getters = component_getters::<S>();
    let orders: Vec<Vec<Option<S>>> = getters.iter().map(|g| column_orders(rows, g)).collect();
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(out, "| {} |", row.m);
        for (g, ord) in getters.iter().zip(&orders) {
            match ord[i] {
                Some(p) => {
                    let _ = write!(out, " {} ({:.2}) |", sci(g(row)), p);
                }
                None => {
                    let _ = write!(out, " {} |", sci(g(row)));
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Per-run report: one row per step with weights and contributions, then a
/// `total` row carrying the component sums, the overall bound and the split
/// index.
pub fn report_csv<S: Real>(report: &EstimatorReport<S>) -> String {
    let mut out = String::from(
        "row,j,t,sigma,mu,chi,eta_ell_j,eta_ell_delta_j,term_f,term_delta_psi,term_big_psi,term_ell,eta_init,eta_ell_MK,eta_f,eta_delta_psi,eta_big_psi,eta_total,K\n",
    );
    for step in &report.steps {
        let _ = writeln!(
            out,
            "step,{},{},{},{},{},{},{},{},{},{},{},,,,,,,",
            step.j,
            sci(step.t),
            sci(step.sigma),
            sci(step.mu),
            sci(step.chi),
            sci(step.eta_ell),
            sci(step.eta_ell_delta),
            sci(step.f_term),
            sci(step.delta_psi_term),
            sci(step.big_psi_term),
            sci(step.ell_term),
        );
    }
    let _ = writeln!(
        out,
        "total,,,,,,,,,,,,{},{},{},{},{},{},{}",
        sci(report.eta_init),
        sci(report.eta_ell_mk),
        sci(report.eta_f),
        sci(report.eta_delta_psi),
        sci(report.eta_big_psi),
        sci(report.total),
        report.k,
    );
    out
}
