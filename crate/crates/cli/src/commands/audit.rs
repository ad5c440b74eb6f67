//! `audit`: the geometry report. Prints every constant the propositions
//! consume (κ_ℓ, ρ_ℓ, the pencil spectrum, κ(PH), the C^{(θ)}/r/η_max grid,
//! effective dimensions, per-proposition admissibility) and writes the same
//! table to `audit.csv`.

use psgd_lab::error::Result;
use psgd_lab::geometry::{contraction_rate, m_theta};
use psgd_lab::linalg::{pencil_spectrum, trace_prod};
use psgd_lab::problems::effective_dimensions;

use crate::config::{Experiment, PreconditionerSpec, Problem};
use crate::csvout::{CsvTable, Field};

pub fn run(exp: &Experiment) -> Result<CsvTable> {
    let mut table = CsvTable::new(&["key", "value"]);
    let geom = &exp.geom;
    let prof = &exp.prof;
    let mut put = |key: String, field: Field| {
        table.push(vec![Field::Text(key), field]);
    };

    put("alpha".into(), Field::Float(geom.alpha()));
    put("beta".into(), Field::Float(geom.beta()));
    put("kappa_ell".into(), Field::Float(geom.kappa_ell()));
    let rho = geom.rho_ell();
    put(
        "rho_ell".into(),
        if rho.is_infinite() { Field::Text("inf".into()) } else { Field::Float(rho) },
    );
    put("h_scale".into(), Field::Float(geom.h_scale()));
    put("p_scale".into(), Field::Float(prof.p_scale()));
    for (i, v) in prof.pencil().iter().enumerate() {
        put(format!("pencil_{i}"), Field::Float(*v));
    }
    put("lambda_min_ph".into(), Field::Float(prof.lambda_min_ph()));
    put("lambda_max_ph".into(), Field::Float(prof.lambda_max_ph()));
    put("kappa_ph".into(), Field::Float(prof.kappa_ph()));
    match prof.alignment(geom) {
        Some(c) => put("alignment_c".into(), Field::Float(c)),
        None => put("alignment_c".into(), Field::Text("absent".into())),
    }

    for &theta in &exp.config.metrics {
        let label = format!("{theta}");
        match contraction_rate(geom, prof, theta) {
            Some(rate) => {
                let c = prof.alignment_at(geom, theta).expect("rate implies alignment");
                put(format!("c_theta_{label}"), Field::Float(c));
                put(format!("r_theta_{label}"), Field::Float(rate.r));
                put(format!("eta_max_theta_{label}"), Field::Float(rate.eta_max));
            }
            None => {
                put(format!("c_theta_{label}"), Field::Text("absent".into()));
                put(format!("r_theta_{label}"), Field::Text("absent".into()));
                put(format!("eta_max_theta_{label}"), Field::Text("absent".into()));
            }
        }
    }

    if let Problem::Quadratic(model) = &exp.problem {
        let m1 = prof.p().inverse();
        let dims = effective_dimensions(geom.h(), model.sigma().matrix(), prof.p(), &m1)?;
        put("tr_hinv_sigma".into(), Field::Float(dims.tr_hinv_sigma));
        put("tr_p_sigma".into(), Field::Float(dims.tr_p_sigma));
        put("tr_php_sigma".into(), Field::Float(dims.tr_php_sigma));
        for &theta in &exp.config.metrics {
            let m = m_theta(prof.p(), geom.h(), theta)?;
            let d =
                effective_dimensions(geom.h(), model.sigma().matrix(), prof.p(), &m)?;
            put(format!("tr_pmp_sigma_theta_{theta}"), Field::Float(d.tr_pmp_sigma));
            put(format!("tr_minv_sigma_theta_{theta}"), Field::Float(d.tr_minv_sigma));
        }

        // admissibility against the configured n
        let n = exp.config.n as f64;
        let pinv_threshold = 4.0 * geom.kappa_ell() * prof.kappa_ph();
        put("pinv_n_threshold".into(), Field::Float(pinv_threshold));
        put("pinv_admissible".into(), Field::Bool(n >= pinv_threshold));
        match contraction_rate(geom, prof, 0.0) {
            Some(rate) => {
                let thr = 8.0 * geom.beta() / rate.r * prof.lambda_max_ph();
                put("hgeom_n_threshold".into(), Field::Float(thr));
                put("hgeom_admissible".into(), Field::Bool(n >= thr));
            }
            None => {
                put("hgeom_n_threshold".into(), Field::Text("absent".into()));
                put("hgeom_admissible".into(), Field::Bool(false));
            }
        }
        let lam_hsi = pencil_spectrum(&model.sigma().inverse(), geom.h())?[0];
        let pl_threshold = 32.0 * geom.beta() * lam_hsi;
        put("pl_n_threshold".into(), Field::Float(pl_threshold));
        put("pl_admissible".into(), Field::Bool(n >= pl_threshold));
        let _ = trace_prod(geom.h_inv().matrix(), model.sigma().matrix())?;
    }

    if let Problem::Logistic(p) = &exp.problem {
        put("kappa_ell_bound".into(), Field::Float(p.kappa_ell_bound()));
        put("lambda_reg".into(), Field::Float(p.lambda_reg()));
    }

    // Gershgorin diagonal-dominance bound for the Jacobi preconditioner
    if matches!(exp.config.preconditioner, PreconditionerSpec::Diagonal) {
        let h = geom.h().matrix();
        let d = geom.dim();
        let mut a_max = 0.0f64;
        for i in 0..d {
            let di = h[(i, i)].sqrt();
            let mut row = 0.0;
            for j in 0..d {
                if j != i {
                    row += (h[(i, j)] / (di * h[(j, j)].sqrt())).abs();
                }
            }
            a_max = a_max.max(row);
        }
        put("diag_dominance_a".into(), Field::Float(a_max));
        if a_max < 1.0 {
            let kappa_bound = (1.0 + a_max) / (1.0 - a_max);
            put("diag_kappa_ph_bound".into(), Field::Float(kappa_bound));
            let rho = geom.rho_ell();
            if rho.is_finite() && kappa_bound < rho * rho {
                let c_bound = (rho * rho - kappa_bound) / (rho * rho - 1.0);
                put("diag_alignment_lower_bound".into(), Field::Float(c_bound));
            }
        }
    }

    Ok(table)
}
