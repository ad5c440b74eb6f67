//! Experiment configuration: a single JSON tree mapping onto the library's
//! problems, preconditioners and schedules. Matrices can be inlined, loaded
//! from CSV files (row-major, comma-separated, no header) or generated from a
//! seeded random-SPD spec.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use psgd_lab::error::{LabError, Result};
use psgd_lab::geometry::{
    optimal_preconditioner, random_orthonormal, random_spd, GeometrySpec, PreconditionerProfile,
};
use psgd_lab::linalg::{io, Matrix, SymmetricPd};
use psgd_lab::problems::{Dataset, LogisticProblem, QuadraticNoisyModel, SampleSource};
use psgd_lab::psgd::{proposition_schedule, PropositionVariant, ScheduleKind};
use psgd_lab::rng::{derive_seed, Rng};
use psgd_lab::scalar::cast;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub preconditioner: PreconditionerSpec,
    pub schedule: ScheduleSpec,
    /// Override the loss geometry constants derived from the problem.
    #[serde(default)]
    pub geometry: Option<GeometryOverride>,
    pub n: usize,
    pub t_max: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
    /// θ values for which M_θ-metric columns are produced.
    #[serde(default = "default_metrics")]
    pub metrics: Vec<f64>,
    #[serde(default)]
    pub checkpoint_stride: Option<usize>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Fixed training set loaded from CSV (one sample per row); when present,
    /// every replicate runs on it and only the algorithm randomness varies.
    #[serde(default)]
    pub dataset_file: Option<PathBuf>,
    /// Write the first replicate's training set to `dataset.csv`.
    #[serde(default)]
    pub dump_dataset: bool,
    /// Output directory for CSV files.
    pub outputs: PathBuf,
    /// Grid overrides for the stability subcommand.
    #[serde(default)]
    pub stability: Option<StabilityGrid>,
    /// Parameters for the lowerbounds subcommand.
    #[serde(default)]
    pub lowerbounds: Option<LowerBoundsSpec>,
}

fn default_replicates() -> usize {
    1
}

fn default_metrics() -> Vec<f64> {
    vec![0.0, 1.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryOverride {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityGrid {
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundsSpec {
    #[serde(default = "default_eps_list")]
    pub bad_eps: Vec<f64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<usize>,
}

fn default_eps_list() -> Vec<f64> {
    vec![0.5, 0.25, 0.125]
}

fn default_t_grid() -> Vec<usize> {
    vec![16, 64, 256, 1024, 4096]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        h: MatrixSpec,
        sigma: MatrixSpec,
        alpha: f64,
        #[serde(default)]
        mu: Option<Vec<f64>>,
    },
    Logistic {
        feature_cov: MatrixSpec,
        lambda_reg: f64,
        true_weights: Vec<f64>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MatrixSpec {
    File { file: PathBuf },
    Identity { identity: usize },
    Diag { diag: Vec<f64> },
    Rows { rows: Vec<Vec<f64>> },
    RandomSpd { random_spd: RandomSpdSpec },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpdSpec {
    pub dim: usize,
    pub cond: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub lambda_max: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreconditionerSpec {
    /// λ_min(H)·H⁻¹, the tr(PΣ)/λ_min(PH)-optimal choice.
    Optimal,
    Identity,
    /// diag(H)⁻¹ (Jacobi preconditioning), normalized.
    Diagonal,
    /// A random P with (1/q)H⁻¹ ⪯ P ⪯ qH⁻¹, seeded from the config seed.
    QApprox { q: f64 },
    /// The ill-conditioned construction P_ε = I − (1 − ε/h_k) q_k q_kᵀ.
    BadEps { eps: f64 },
    File { path: PathBuf },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { eta0: f64 },
    CappedHarmonic { eta0: f64, c: f64 },
    Proposition { variant: VariantSpec },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum VariantSpec {
    Named(String),
    MTheta { mtheta: f64 },
}

/// A fully instantiated experiment.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub geom: GeometrySpec<f64>,
    pub prof: PreconditionerProfile<f64>,
    pub schedule: ScheduleKind<f64>,
    /// η̄ discount rate backing the schedule trace (the θ = 1 contraction
    /// rate unless a proposition schedule prescribes its own).
    pub r: f64,
    /// Loaded from `dataset_file` when configured.
    pub fixed_dataset: Option<Dataset<f64>>,
}

pub enum Problem {
    Quadratic(QuadraticNoisyModel<f64>),
    Logistic(LogisticProblem<f64>),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(m) => m.dim(),
            Problem::Logistic(p) => p.dim(),
        }
    }

    pub fn dataset(&self, n: usize, seed: u64) -> Dataset<f64> {
        match self {
            Problem::Quadratic(m) => Dataset::from_source(m, n, seed, "quadratic"),
            Problem::Logistic(p) => Dataset::from_source(p, n, seed, "logistic"),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Problem::Quadratic(_) => "quadratic",
            Problem::Logistic(_) => "logistic",
        }
    }
}

impl Experiment {
    /// The replicate's training set: the fixed file-backed dataset when one
    /// is configured, a freshly sampled one otherwise.
    pub fn replicate_dataset(&self, rep_seed: u64) -> Result<Dataset<f64>> {
        match &self.fixed_dataset {
            Some(d) => Ok(d.clone()),
            None => Ok(self.problem.dataset(self.config.n, rep_seed)),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Parse(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| LabError::Parse(format!("config {}: {e}", path.display())))
}

fn load_matrix(spec: &MatrixSpec, base: &Path) -> Result<Matrix<f64>> {
    match spec {
        MatrixSpec::File { file } => {
            let path = if file.is_absolute() { file.clone() } else { base.join(file) };
            io::read_matrix_csv(&path)
        }
        MatrixSpec::Identity { identity } => Ok(Matrix::identity(*identity)),
        MatrixSpec::Diag { diag } => Ok(Matrix::diag(diag)),
        MatrixSpec::Rows { rows } => Matrix::from_rows(rows),
        MatrixSpec::RandomSpd { random_spd: s } => {
            let mut rng = Rng::new(s.seed);
            Ok(random_spd(s.dim, s.lambda_max, s.cond, &mut rng).matrix().clone())
        }
    }
}

/// Instantiates problem, geometry, preconditioner profile and schedule from
/// the config. `base` anchors relative matrix file paths.
pub fn build_experiment(config: ExperimentConfig, base: &Path) -> Result<Experiment> {
    let problem = match &config.problem {
        ProblemSpec::Quadratic { h, sigma, alpha, mu } => {
            let h = SymmetricPd::new(load_matrix(h, base)?)?;
            let sigma = SymmetricPd::new(load_matrix(sigma, base)?)?;
            let d = h.dim();
            let mu = mu.clone().unwrap_or_else(|| vec![0.0; d]);
            Problem::Quadratic(QuadraticNoisyModel::new(h, sigma, *alpha, mu)?)
        }
        ProblemSpec::Logistic { feature_cov, lambda_reg, true_weights } => {
            let cov = SymmetricPd::new(load_matrix(feature_cov, base)?)?;
            Problem::Logistic(LogisticProblem::new(cov, *lambda_reg, true_weights.clone())?)
        }
    };

    let geom = match (&config.geometry, &problem) {
        (Some(o), Problem::Quadratic(m)) => GeometrySpec::new(m.h().clone(), o.alpha, o.beta)?,
        (Some(o), Problem::Logistic(p)) => GeometrySpec::new(p.h().clone(), o.alpha, o.beta)?,
        (None, Problem::Quadratic(m)) => m.geometry(),
        (None, Problem::Logistic(p)) => p.geometry(),
    };

    let sigma_for_bad_eps = match &problem {
        Problem::Quadratic(m) => Some(m.sigma().clone()),
        Problem::Logistic(_) => None,
    };
    let p_matrix =
        build_preconditioner(&config.preconditioner, &geom, sigma_for_bad_eps, config.seed, base)?;
    let prof = PreconditionerProfile::new(&geom, SymmetricPd::new(p_matrix)?)?;

    let (schedule, r) = match &config.schedule {
        ScheduleSpec::Constant { eta0 } => {
            let r = default_rate(&geom, &prof);
            (ScheduleKind::Constant { eta0: *eta0 }, r)
        }
        ScheduleSpec::CappedHarmonic { eta0, c } => {
            let r = default_rate(&geom, &prof);
            (ScheduleKind::CappedHarmonic { eta0: *eta0, c: *c }, r)
        }
        ScheduleSpec::Proposition { variant } => {
            let variant = match variant {
                VariantSpec::Named(name) => match name.as_str() {
                    "pinv" => PropositionVariant::Pinv,
                    "hgeom" => PropositionVariant::Hgeom,
                    other => {
                        return Err(LabError::Parse(format!(
                            "unknown proposition variant {other:?}; expected \"pinv\", \"hgeom\" or {{\"mtheta\": θ}}"
                        )))
                    }
                },
                VariantSpec::MTheta { mtheta } => PropositionVariant::MTheta(*mtheta),
            };
            proposition_schedule(&geom, &prof, variant)?
        }
    };

    let fixed_dataset = match &config.dataset_file {
        Some(file) => {
            let path = if file.is_absolute() { file.clone() } else { base.join(file) };
            let text = std::fs::read_to_string(&path).map_err(|e| {
                LabError::Parse(format!("cannot read dataset {}: {e}", path.display()))
            })?;
            let data = Dataset::from_csv_str(&text, config.seed, "file")?;
            let want = match &problem {
                Problem::Quadratic(_) => problem.dim(),
                Problem::Logistic(_) => problem.dim() + 1,
            };
            if data.sample(0).len() != want {
                return Err(LabError::Dimension { expected: want, got: data.sample(0).len() });
            }
            Some(data)
        }
        None => None,
    };

    Ok(Experiment { config, problem, geom, prof, schedule, r, fixed_dataset })
}

/// θ = 1 contraction rate: defined for every SPD preconditioner.
fn default_rate(geom: &GeometrySpec<f64>, prof: &PreconditionerProfile<f64>) -> f64 {
    psgd_lab::geometry::contraction_rate(geom, prof, 1.0)
        .expect("theta = 1 always admits a contraction rate")
        .r
}

fn build_preconditioner(
    spec: &PreconditionerSpec,
    geom: &GeometrySpec<f64>,
    sigma: Option<SymmetricPd<f64>>,
    seed: u64,
    base: &Path,
) -> Result<Matrix<f64>> {
    let h = geom.h();
    let d = h.dim();
    Ok(match spec {
        PreconditionerSpec::Optimal => optimal_preconditioner(h).matrix().clone(),
        PreconditionerSpec::Identity => Matrix::identity(d),
        PreconditionerSpec::Diagonal => {
            let inv_diag: Vec<f64> = (0..d).map(|i| 1.0 / h.matrix()[(i, i)]).collect();
            Matrix::diag(&inv_diag)
        }
        PreconditionerSpec::QApprox { q } => {
            if *q < 1.0 {
                return Err(LabError::validation("q_approx needs q >= 1"));
            }
            // H^{-1/2} D H^{-1/2} with spectrum of D inside [1/q, q]
            let mut rng = Rng::new(derive_seed(seed, 0x9A77));
            let basis = random_orthonormal::<f64>(d, &mut rng);
            let spectrum: Vec<f64> =
                (0..d).map(|_| q.powf(2.0 * rng.next_f64() - 1.0)).collect();
            let mid = SymmetricPd::from_eigen(basis, spectrum)?;
            let hmh = geom.h_inv().sqrt();
            hmh.matrix().matmul(mid.matrix()).matmul(hmh.matrix()).symmetrized()
        }
        PreconditionerSpec::BadEps { eps } => {
            // the index k depends on the noise covariance; without one (the
            // logistic problem) the construction degrades to gamma = h_i
            let sigma = sigma.unwrap_or_else(|| SymmetricPd::identity(d));
            let (p, _, _) =
                psgd_lab::bounds::bad_p_construction(h, &sigma, *eps, geom.alpha(), 1, false)?;
            p
        }
        PreconditionerSpec::File { path } => {
            let path = if path.is_absolute() { path.clone() } else { base.join(path) };
            io::read_matrix_csv(&path)?
        }
    })
}

/// Rebuilds the bad-ε preconditioner with the problem's actual Σ (the index
/// k depends on it); used when the problem is quadratic.
pub fn bad_eps_with_sigma(
    geom: &GeometrySpec<f64>,
    sigma: &SymmetricPd<f64>,
    eps: f64,
) -> Result<Matrix<f64>> {
    let (p, _, _) =
        psgd_lab::bounds::bad_p_construction(geom.h(), sigma, eps, geom.alpha(), 1, false)?;
    Ok(p)
}

/// Sample rows for the single-pass source when one is needed.
pub fn fresh_sample(problem: &Problem, rng: &mut Rng) -> Vec<f64> {
    match problem {
        Problem::Quadratic(m) => m.sample(rng),
        Problem::Logistic(p) => p.sample(rng),
    }
}

pub fn cast_usize(v: usize) -> f64 {
    cast::<f64>(v as f64)
}
