//! `run`: multipass PSGD trajectories with per-checkpoint risk columns and,
//! on the quadratic model, every admissible proposition bound.
//!
//! With `replicates = 1` the CSV carries the iterate coordinates; with more,
//! mean and standard-error columns over the replicate ensemble.

use psgd_lab::bounds::{upper_bound_hgeom, upper_bound_pinv};
use psgd_lab::error::Result;
use psgd_lab::problems::{effective_dimensions, empirical_risk};
use psgd_lab::psgd::run_multipass;
use psgd_lab::rng::derive_seed;
use psgd_lab::stability::mean_and_se;

use crate::config::{Experiment, Problem};
use crate::csvout::{CsvTable, Field};
use crate::parallel::parallel_map;

pub fn run(exp: &Experiment, jobs: usize) -> Result<CsvTable> {
    let cfg = &exp.config;
    let stride = cfg.checkpoint_stride.unwrap_or_else(|| (cfg.t_max / 16).max(1));
    let replicates = cfg.replicates.max(1);

    // per-replicate trajectories plus their datasets' empirical risks
    struct RepResult {
        checkpoints: Vec<(usize, f64, f64, f64)>, // t, eta, T, eta_bar
        xs: Vec<Vec<f64>>,
        emp_risk: Vec<f64>,
        pop_excess: Option<Vec<f64>>,
    }

    let results: Vec<Result<RepResult>> = parallel_map(jobs, replicates, |rep| {
        let rep_seed = derive_seed(cfg.seed, rep as u64);
        let data = exp.replicate_dataset(derive_seed(rep_seed, 0))?;
        let run_seed = derive_seed(rep_seed, 1);
        let traj = match &exp.problem {
            Problem::Quadratic(m) => run_multipass(
                m,
                &data,
                exp.prof.p(),
                exp.schedule,
                exp.r,
                cfg.t_max,
                run_seed,
                stride,
                cfg.x0.as_deref(),
            )?,
            Problem::Logistic(p) => run_multipass(
                p,
                &data,
                exp.prof.p(),
                exp.schedule,
                exp.r,
                cfg.t_max,
                run_seed,
                stride,
                cfg.x0.as_deref(),
            )?,
        };
        let mut checkpoints = Vec::with_capacity(traj.checkpoints.len());
        let mut xs = Vec::with_capacity(traj.checkpoints.len());
        let mut emp = Vec::with_capacity(traj.checkpoints.len());
        let mut pop = Vec::new();
        for cp in &traj.checkpoints {
            checkpoints.push((cp.t, cp.eta_next, cp.t_sum, cp.eta_bar));
            let e = match &exp.problem {
                Problem::Quadratic(m) => empirical_risk(&data, m, &cp.x)?,
                Problem::Logistic(p) => empirical_risk(&data, p, &cp.x)?,
            };
            emp.push(e);
            if let Problem::Quadratic(m) = &exp.problem {
                pop.push(m.population_excess_risk(&cp.x));
            }
            xs.push(cp.x.clone());
        }
        Ok(RepResult {
            checkpoints,
            xs,
            emp_risk: emp,
            pop_excess: if pop.is_empty() { None } else { Some(pop) },
        })
    });
    let mut reps = Vec::with_capacity(replicates);
    for r in results {
        reps.push(r?);
    }

    if cfg.dump_dataset {
        let data = exp.replicate_dataset(derive_seed(derive_seed(cfg.seed, 0), 0))?;
        let path = cfg.outputs.join("dataset.csv");
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, data.to_csv())?;
    }

    // proposition bounds at each checkpoint (quadratic only)
    let bounds = if let Problem::Quadratic(model) = &exp.problem {
        let dims = effective_dimensions(
            exp.geom.h(),
            model.sigma().matrix(),
            exp.prof.p(),
            &exp.prof.p().inverse(),
        )?;
        let tr_php_sigma_s = (1.0 - 1.0 / cfg.n as f64) * dims.tr_php_sigma;
        Some((dims, tr_php_sigma_s))
    } else {
        None
    };

    let d = exp.problem.dim();
    let mut header: Vec<String> =
        vec!["step".into(), "eta_t".into(), "t_sum".into(), "eta_bar".into()];
    if replicates == 1 {
        for i in 0..d {
            header.push(format!("x_{i}"));
        }
        header.push("empirical_risk".into());
        if bounds.is_some() {
            header.push("pop_excess_risk".into());
        }
    } else {
        header.push("emp_risk_mean".into());
        header.push("emp_risk_se".into());
        if bounds.is_some() {
            header.push("pop_excess_mean".into());
            header.push("pop_excess_se".into());
        }
    }
    if bounds.is_some() {
        header.extend(
            ["upper_pinv", "upper_pinv_admissible", "upper_hgeom", "upper_hgeom_admissible"]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = CsvTable::new(&header_refs);

    let n_checkpoints = reps[0].checkpoints.len();
    for k in 0..n_checkpoints {
        let (t, eta, t_sum, eta_bar) = reps[0].checkpoints[k];
        let mut row = vec![
            Field::Int(t as i64),
            Field::Float(eta),
            Field::Float(t_sum),
            Field::Float(eta_bar),
        ];
        if replicates == 1 {
            for v in &reps[0].xs[k] {
                row.push(Field::Float(*v));
            }
            row.push(Field::Float(reps[0].emp_risk[k]));
            if bounds.is_some() {
                row.push(Field::Float(reps[0].pop_excess.as_ref().expect("quadratic")[k]));
            }
        } else {
            let emp: Vec<f64> = reps.iter().map(|r| r.emp_risk[k]).collect();
            let (m, se) = mean_and_se(&emp);
            row.push(Field::Float(m));
            row.push(Field::Float(se));
            if bounds.is_some() {
                let pop: Vec<f64> = reps
                    .iter()
                    .map(|r| r.pop_excess.as_ref().expect("quadratic")[k])
                    .collect();
                let (m, se) = mean_and_se(&pop);
                row.push(Field::Float(m));
                row.push(Field::Float(se));
            }
        }
        if let Some((dims, tr_php_sigma_s)) = &bounds {
            let pinv = upper_bound_pinv(
                cfg.n,
                t,
                &exp.geom,
                &exp.prof,
                *tr_php_sigma_s,
                dims.tr_p_sigma,
            )?;
            row.push(Field::Float(pinv.value));
            row.push(Field::Bool(pinv.admissible));
            let hg = upper_bound_hgeom(
                cfg.n,
                t,
                &exp.geom,
                &exp.prof,
                *tr_php_sigma_s,
                dims.tr_hinv_sigma,
                dims.tr_php_sigma,
            )?;
            if hg.admissible {
                row.push(Field::Float(hg.value));
            } else {
                row.push(Field::Empty);
            }
            row.push(Field::Bool(hg.admissible));
        }
        table.push(row);
    }
    Ok(table)
}
