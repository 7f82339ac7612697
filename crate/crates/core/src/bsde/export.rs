use std::fmt::Write as _;

use crate::bsde::solver::{BsdeSolution, ConvergenceRecord};

/// `t, mean_y_i, se_y_i, …, mean_abs_z_i, se_abs_z_i, …`; the last node
/// reports `z` of the last step.
pub fn summary_csv(sol: &BsdeSolution) -> String {
    let k = sol.dim_k;
    let mut s = String::from("t");
    for i in 1..=k {
        let _ = write!(s, ",mean_y_{i},se_y_{i}");
    }
    for i in 1..=k {
        let _ = write!(s, ",mean_abs_z_{i},se_abs_z_{i}");
    }
    s.push('\n');
    let steps = sol.grid.steps();
    for (j, t) in sol.grid.nodes().iter().enumerate() {
        let (my, sy) = sol.y_stats(j);
        let (mz, sz) = sol.z_row_stats(j.min(steps - 1));
        let _ = write!(s, "{t:.16e}");
        for i in 0..k {
            let _ = write!(s, ",{:.16e},{:.16e}", my[i], sy[i]);
        }
        for i in 0..k {
            let _ = write!(s, ",{:.16e},{:.16e}", mz[i], sz[i]);
        }
        s.push('\n');
    }
    s
}

/// Cauchy gaps of consecutive schedule entries.
pub fn diagnostics_csv(rec: &ConvergenceRecord) -> String {
    let mut s = String::from("n,m,sup_gap,sup_gap_se,z_gap,z_gap_se\n");
    for e in &rec.cauchy_table {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.n, e.m, e.sup_gap, e.sup_gap_se, e.z_gap, e.z_gap_se
        );
    }
    s
}

/// Step-3 defect per probe time and component.
pub fn residual_csv(rec: &ConvergenceRecord) -> String {
    let mut s = String::from("t,component,mean,se,pathwise_se\n");
    for r in &rec.residual {
        for i in 0..r.mean.len() {
            let _ = writeln!(s, "{:.16e},{},{:.16e},{:.16e},{:.16e}", r.t, i + 1, r.mean[i], r.se[i], r.pathwise_se[i]);
        }
    }
    s
}
