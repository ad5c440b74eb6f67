//! `lowerbounds`: the hard-instance constructions and their exact-oracle
//! companions. Emits `lowerbounds.csv` (t-indexed rows joining each bound
//! with the exact recursion risk) and `assouad.csv` (the hard family's gaps
//! and total-variation computation).

use psgd_lab::bounds::{
    algo_lower, algo_lower_schedule_proof, any_p_construction, assouad_family,
    bad_p_construction, exact_risk_recursion, minimax_lower, quadratic_erm,
};
use psgd_lab::error::{LabError, Result};
use psgd_lab::linalg::{pencil_spectrum, trace_prod, SymmetricPd};
use psgd_lab::problems::Dataset;
use psgd_lab::rng::derive_seed;
use psgd_lab::stability::mean_and_se;

use crate::config::{Experiment, Problem};
use crate::csvout::{CsvTable, Field};
use crate::parallel::parallel_map;

pub fn run(exp: &Experiment, jobs: usize) -> Result<(CsvTable, CsvTable)> {
    let cfg = &exp.config;
    let model = match &exp.problem {
        Problem::Quadratic(m) => m,
        Problem::Logistic(_) => {
            return Err(LabError::validation(
                "the lowerbounds command needs the quadratic model",
            ))
        }
    };
    let spec = cfg.lowerbounds.clone().unwrap_or_else(|| {
        crate::config::LowerBoundsSpec {
            bad_eps: vec![0.5, 0.25, 0.125],
            t_grid: vec![16, 64, 256, 1024, 4096],
        }
    });
    let d = model.dim();
    let geom = &exp.geom;
    let alpha = model.alpha();

    let mut table = CsvTable::new(&[
        "name",
        "t",
        "value_statement",
        "value_proof",
        "exact_risk",
        "admissible",
        "note",
    ]);

    // minimax bound and its Monte-Carlo ERM witness
    let tr_hinv = trace_prod(model.h_inv().matrix(), model.sigma().matrix())?;
    let mm = minimax_lower(cfg.n, alpha, tr_hinv)?;
    let replicates = cfg.replicates.max(2);
    let witness: Vec<f64> = {
        let vals = parallel_map(jobs, replicates, |rep| {
            let data = Dataset::from_source(
                model,
                cfg.n,
                derive_seed(derive_seed(cfg.seed, 400), rep as u64),
                "quadratic",
            );
            model.population_excess_risk(&quadratic_erm(&data))
        });
        vals
    };
    let (w_mean, w_se) = mean_and_se(&witness);
    table.push(vec![
        Field::Text("minimax_lower".into()),
        Field::Empty,
        Field::Float(mm.value),
        Field::Float(mm.input("proof_constant_value").expect("reported")),
        Field::Empty,
        Field::Bool(true),
        Field::Text(format!("erm_witness_mean={w_mean:.6e};se={w_se:.2e}")),
    ]);

    // single-pass algorithmic lower bound vs the exact recursion, with the
    // configured preconditioner
    let pencil = pencil_spectrum(exp.prof.p(), geom.h())?;
    let (lmax, lmin) = (pencil[0], *pencil.last().expect("nonempty"));
    let php = exp
        .prof
        .p()
        .matrix()
        .matmul(geom.h().matrix())
        .matmul(exp.prof.p().matrix())
        .symmetrized();
    let tr_php = trace_prod(&php, model.sigma().matrix())?;
    let sched = algo_lower_schedule_proof(lmax, lmin, alpha);
    let t_top = *spec.t_grid.iter().max().unwrap_or(&1024);
    let risks = exact_risk_recursion(model, exp.prof.p(), sched, t_top, &vec![0.0; d])?;
    for &t in &spec.t_grid {
        let rep = algo_lower(lmax, lmin, alpha, tr_php, t)?;
        table.push(vec![
            Field::Text("algo_lower".into()),
            Field::Int(t as i64),
            Field::Float(rep.value),
            Field::Float(rep.input("value_proof").expect("reported")),
            Field::Float(risks[t].1),
            Field::Bool(rep.admissible),
            Field::Text(format!("kappa_ph={:.6e}", rep.input("kappa_ph").unwrap())),
        ]);
    }

    // ill-conditioned P_eps family
    for &eps in &spec.bad_eps {
        let (p_eps, k, rep) =
            bad_p_construction(geom.h(), model.sigma(), eps, alpha, t_top, false)?;
        let p_pd = SymmetricPd::new(p_eps)?;
        let pencil_e = pencil_spectrum(&p_pd, geom.h())?;
        let sched_e = algo_lower_schedule_proof(
            pencil_e[0],
            *pencil_e.last().expect("nonempty"),
            alpha,
        );
        let risks_e = exact_risk_recursion(model, &p_pd, sched_e, t_top, &vec![0.0; d])?;
        table.push(vec![
            Field::Text("algo_lower_bad_p".into()),
            Field::Int(t_top as i64),
            Field::Float(rep.value),
            Field::Float(rep.input("value_proof").expect("reported")),
            Field::Float(risks_e[t_top].1),
            Field::Bool(rep.admissible),
            Field::Text(format!("eps={eps};k={k}")),
        ]);
    }

    // rank-one noise construction for the configured preconditioner
    let (_, rep_any) = any_p_construction(exp.prof.p(), geom.h(), t_top)?;
    table.push(vec![
        Field::Text("algo_lower_any_p".into()),
        Field::Int(t_top as i64),
        Field::Float(rep_any.value),
        Field::Float(rep_any.value),
        Field::Empty,
        Field::Bool(rep_any.admissible),
        Field::Text(format!(
            "kappa_ph={:.6e};rank_one_equality_checked=1e-9",
            rep_any.input("kappa_ph").unwrap()
        )),
    ]);

    // Assouad hard family
    let fam = assouad_family(geom.h(), model.sigma(), alpha, cfg.n)?;
    let mut assouad = CsvTable::new(&["key", "value"]);
    for (j, delta) in fam.deltas.iter().enumerate() {
        assouad.push(vec![Field::Text(format!("delta_{j}")), Field::Float(*delta)]);
    }
    assouad.push(vec![
        Field::Text("kl_adjacent_product".into()),
        Field::Float(fam.kl_adjacent_product),
    ]);
    assouad.push(vec![Field::Text("tv_bound".into()), Field::Float(fam.tv_bound)]);
    assouad.push(vec![
        Field::Text("tv_alpha_naive".into()),
        Field::Float(fam.tv_alpha_naive),
    ]);
    assouad.push(vec![
        Field::Text("alpha_discrepancy_flag".into()),
        Field::Bool(fam.alpha_discrepancy),
    ]);
    assouad.push(vec![
        Field::Text("family_size".into()),
        Field::Int(fam.means.len() as i64),
    ]);

    Ok((table, assouad))
}
