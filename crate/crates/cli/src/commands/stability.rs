//! `stability`: replace-one stability and generalization-gap estimates over
//! an (n, t) grid, one CSV row per (n, t, θ) with the theory column joined.

use psgd_lab::error::{LabError, Result};
use psgd_lab::rng::derive_seed;
use psgd_lab::stability::{estimate_gen_gap, estimate_pstab};

use crate::config::{Experiment, Problem};
use crate::csvout::{CsvTable, Field};
use crate::parallel::parallel_map;

pub fn run(exp: &Experiment, jobs: usize) -> Result<CsvTable> {
    let cfg = &exp.config;
    let model = match &exp.problem {
        Problem::Quadratic(m) => m,
        Problem::Logistic(_) => {
            return Err(LabError::validation(
                "the stability command needs the quadratic model (exact population risk)",
            ))
        }
    };
    let (n_grid, t_grid) = match &cfg.stability {
        Some(g) => (g.n_grid.clone(), g.t_grid.clone()),
        None => {
            let mut ts = Vec::new();
            let mut t = 32;
            while t <= cfg.t_max.max(32) {
                ts.push(t);
                t *= 2;
            }
            (vec![cfg.n], ts)
        }
    };

    let mut table = CsvTable::new(&[
        "n",
        "t",
        "metric_theta",
        "eps_pstab_sq",
        "std_err",
        "theory_pstab_sq",
        "gen_gap",
        "gap_se",
        "admissible",
    ]);

    // grid points are independent; parallelize across them
    struct Point {
        n: usize,
        t: usize,
        theta: f64,
    }
    let mut points = Vec::new();
    for &n in &n_grid {
        for &t in &t_grid {
            for &theta in &cfg.metrics {
                points.push(Point { n, t, theta });
            }
        }
    }
    let results: Vec<Result<Vec<Field>>> = parallel_map(jobs, points.len(), |idx| {
        let Point { n, t, theta } = points[idx];
        let point_seed = derive_seed(cfg.seed, idx as u64);
        let report = estimate_pstab(
            model,
            &exp.geom,
            &exp.prof,
            n,
            exp.schedule,
            theta,
            t,
            cfg.replicates.max(2),
            derive_seed(point_seed, 0),
        )?;
        let (gap, gap_se) = estimate_gen_gap(
            model,
            n,
            exp.prof.p(),
            exp.schedule,
            exp.r,
            t,
            cfg.replicates.max(2),
            derive_seed(point_seed, 1),
        )?;
        Ok(vec![
            Field::Int(n as i64),
            Field::Int(t as i64),
            Field::Float(theta),
            Field::Float(report.eps_pstab_sq),
            Field::Float(report.std_err),
            Field::Float(report.theory_pstab_sq),
            Field::Float(gap),
            Field::Float(gap_se),
            Field::Bool(report.admissible),
        ])
    });
    for row in results {
        table.push(row?);
    }
    Ok(table)
}
