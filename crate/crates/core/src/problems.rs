//! Synthetic learning problems with closed-form population quantities.
//!
//! The quadratic noisy model is the hard instance behind every lower bound:
//! ℓ(x, z) = (α/2)‖x−z‖²_H with z ~ N(μ, H⁻¹ΣH⁻¹/α²), engineered so the
//! gradient-noise covariance is exactly Σ at every x and the population
//! excess risk is (α/2)‖x−μ‖²_H. Regularized logistic regression provides a
//! genuinely non-quadratic family with explicit (α, β, κ_ℓ) bounds.

use crate::error::{LabError, Result};
use crate::geometry::GeometrySpec;
use crate::linalg::{trace_prod, Matrix, SymmetricPd};
use crate::rng::{derive_seed, Rng};
use crate::scalar::{cast, Scalar};

/// Per-sample loss over parameter vectors; `z` is one row of a dataset.
pub trait SampleLoss<T: Scalar> {
    fn dim(&self) -> usize;
    fn loss(&self, x: &[T], z: &[T]) -> T;
    fn grad_into(&self, x: &[T], z: &[T], out: &mut [T]);

    fn grad(&self, x: &[T], z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.grad_into(x, z, &mut out);
        out
    }
}

/// Distribution over sample rows; drives dataset generation and single-pass
/// (fresh-sample) optimization.
pub trait SampleSource<T: Scalar> {
    /// Length of one sample row.
    fn sample_len(&self) -> usize;
    fn sample_into(&self, rng: &mut Rng, out: &mut [T]);

    fn sample(&self, rng: &mut Rng) -> Vec<T> {
        let mut out = vec![T::zero(); self.sample_len()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// ℓ(x, z) = (α/2)‖x−z‖²_H with z ~ N(μ, H⁻¹ΣH⁻¹/α²).
#[derive(Clone, Debug)]
pub struct QuadraticNoisyModel<T> {
    h: SymmetricPd<T>,
    sigma: SymmetricPd<T>,
    alpha: T,
    mu: Vec<T>,
    /// H⁻¹ Σ^{1/2} / α; maps a standard normal to the z-noise.
    noise_factor: Matrix<T>,
    h_inv: SymmetricPd<T>,
}

impl<T: Scalar> QuadraticNoisyModel<T> {
    /// H is rescaled to λ_max(H) = 1 if it is not already normalized.
    pub fn new(h: SymmetricPd<T>, sigma: SymmetricPd<T>, alpha: T, mu: Vec<T>) -> Result<Self> {
        if sigma.dim() != h.dim() {
            return Err(LabError::Dimension { expected: h.dim(), got: sigma.dim() });
        }
        if mu.len() != h.dim() {
            return Err(LabError::Dimension { expected: h.dim(), got: mu.len() });
        }
        if !(alpha > T::zero()) {
            return Err(LabError::validation("alpha must be positive"));
        }
        let (h, _) = h.normalized();
        let h_inv = h.inverse();
        let noise_factor =
            h_inv.matrix().matmul(sigma.sqrt().matrix()).scale(T::one() / alpha);
        Ok(QuadraticNoisyModel { h, sigma, alpha, mu, noise_factor, h_inv })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn h(&self) -> &SymmetricPd<T> {
        &self.h
    }

    pub fn h_inv(&self) -> &SymmetricPd<T> {
        &self.h_inv
    }

    pub fn sigma(&self) -> &SymmetricPd<T> {
        &self.sigma
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    /// δf(x) = (α/2)‖x−μ‖²_H, exactly.
    pub fn population_excess_risk(&self, x: &[T]) -> T {
        let diff: Vec<T> = x.iter().zip(&self.mu).map(|(a, b)| *a - *b).collect();
        cast::<T>(0.5) * self.alpha * self.h.quad_form(&diff)
    }

    /// tr(H⁻¹Σ)/(2α), the additive constant between risk and excess risk.
    pub fn noise_floor(&self) -> T {
        trace_prod(self.h_inv.matrix(), self.sigma.matrix()).expect("dims agree")
            / (cast::<T>(2.0) * self.alpha)
    }

    /// f(x) = δf(x) + tr(H⁻¹Σ)/(2α).
    pub fn population_risk(&self, x: &[T]) -> T {
        self.population_excess_risk(x) + self.noise_floor()
    }

    /// Loss geometry of this model: α-strongly convex and α-smooth (κ_ℓ = 1).
    pub fn geometry(&self) -> GeometrySpec<T> {
        GeometrySpec::new(self.h.clone(), self.alpha, self.alpha)
            .expect("alpha = beta > 0")
    }
}

impl<T: Scalar> SampleLoss<T> for QuadraticNoisyModel<T> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn loss(&self, x: &[T], z: &[T]) -> T {
        let diff: Vec<T> = x.iter().zip(z).map(|(a, b)| *a - *b).collect();
        cast::<T>(0.5) * self.alpha * self.h.quad_form(&diff)
    }

    fn grad_into(&self, x: &[T], z: &[T], out: &mut [T]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d);
        let h = self.h.matrix();
        for i in 0..d {
            let row = h.row(i);
            let mut acc = T::zero();
            for j in 0..d {
                acc += row[j] * (x[j] - z[j]);
            }
            out[i] = self.alpha * acc;
        }
    }
}

impl<T: Scalar> SampleSource<T> for QuadraticNoisyModel<T> {
    fn sample_len(&self) -> usize {
        self.dim()
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [T]) {
        let d = self.dim();
        let g: Vec<T> = (0..d).map(|_| cast::<T>(rng.next_gaussian())).collect();
        self.noise_factor.matvec_into(&g, out);
        for (o, m) in out.iter_mut().zip(&self.mu) {
            *o += *m;
        }
    }
}

/// Convenience constructor mirroring the harness surface.
pub fn make_quadratic<T: Scalar>(
    h: SymmetricPd<T>,
    sigma: SymmetricPd<T>,
    alpha: T,
    mu: Vec<T>,
) -> Result<QuadraticNoisyModel<T>> {
    QuadraticNoisyModel::new(h, sigma, alpha, mu)
}

/// A finite training set of sample rows.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    samples: Vec<Vec<T>>,
    seed: u64,
    source: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn from_source<S: SampleSource<T>>(source: &S, n: usize, seed: u64, label: &str) -> Self {
        let mut rng = Rng::new(seed);
        let samples = (0..n).map(|_| source.sample(&mut rng)).collect();
        Dataset { samples, seed, source: label.to_string() }
    }

    pub fn from_rows(samples: Vec<Vec<T>>, seed: u64, label: &str) -> Result<Self> {
        if samples.is_empty() {
            return Err(LabError::validation("dataset needs at least one sample"));
        }
        Ok(Dataset { samples, seed, source: label.to_string() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[T] {
        &self.samples[i]
    }

    pub fn samples(&self) -> &[Vec<T>] {
        &self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Copy of the dataset with sample `i` swapped for `replacement`.
    pub fn replace_one(&self, i: usize, replacement: Vec<T>) -> Result<Dataset<T>> {
        if i >= self.samples.len() {
            return Err(LabError::validation(format!(
                "replace index {i} out of range for n = {}",
                self.samples.len()
            )));
        }
        let mut out = self.clone();
        out.samples[i] = replacement;
        Ok(out)
    }

    /// CSV dump, one sample per row.
    pub fn to_csv(&self) -> String {
        let m = Matrix::from_rows(&self.samples).expect("uniform row lengths");
        crate::linalg::io::matrix_to_csv(&m)
    }

    pub fn from_csv_str(text: &str, seed: u64, label: &str) -> Result<Dataset<T>> {
        let m: Matrix<T> = crate::linalg::io::matrix_from_csv_str(text)?;
        let samples = (0..m.nrows()).map(|i| m.row(i).to_vec()).collect();
        Dataset::from_rows(samples, seed, label)
    }
}

/// f_S(x) = (1/n) Σ ℓ(x, z_i).
pub fn empirical_risk<T: Scalar, L: SampleLoss<T>>(
    dataset: &Dataset<T>,
    loss: &L,
    x: &[T],
) -> Result<T> {
    if dataset.is_empty() {
        return Err(LabError::validation("empirical risk over an empty dataset"));
    }
    let sum: T = dataset.samples.iter().map(|z| loss.loss(x, z)).sum();
    Ok(sum / cast::<T>(dataset.len() as f64))
}

/// The five effective-dimension traces the bounds consume.
#[derive(Clone, Copy, Debug)]
pub struct EffectiveDimensions<T> {
    pub tr_hinv_sigma: T,
    pub tr_p_sigma: T,
    pub tr_php_sigma: T,
    pub tr_pmp_sigma: T,
    pub tr_minv_sigma: T,
}

pub fn effective_dimensions<T: Scalar>(
    h: &SymmetricPd<T>,
    sigma: &Matrix<T>,
    p: &SymmetricPd<T>,
    m: &SymmetricPd<T>,
) -> Result<EffectiveDimensions<T>> {
    let d = h.dim();
    if sigma.nrows() != d || p.dim() != d || m.dim() != d {
        return Err(LabError::Dimension { expected: d, got: sigma.nrows() });
    }
    let php = p.matrix().matmul(h.matrix()).matmul(p.matrix()).symmetrized();
    let pmp = p.matrix().matmul(m.matrix()).matmul(p.matrix()).symmetrized();
    Ok(EffectiveDimensions {
        tr_hinv_sigma: trace_prod(h.inverse().matrix(), sigma)?,
        tr_p_sigma: trace_prod(p.matrix(), sigma)?,
        tr_php_sigma: trace_prod(&php, sigma)?,
        tr_pmp_sigma: trace_prod(&pmp, sigma)?,
        tr_minv_sigma: trace_prod(m.inverse().matrix(), sigma)?,
    })
}

/// Regularized logistic regression with Gaussian features:
/// ℓ(w, (a, y)) = log(1 + exp(−y aᵀw)) + (λ/2)‖w‖².
///
/// H = normalize(¼E[aaᵀ] + λI); per sample, λI ⪯ ∇²ℓ always, and the
/// population Hessian satisfies the full sandwich αH ⪯ E[∇²ℓ] ⪯ βH with
/// α = λ and β = λ + ¼λ_max(E[aaᵀ]) (both w.r.t. the normalized H), giving
/// κ_ℓ ≤ 1 + λ_max(E[aaᵀ])/(4λ).
#[derive(Clone, Debug)]
pub struct LogisticProblem<T> {
    feature_cov: SymmetricPd<T>,
    lambda_reg: T,
    h: SymmetricPd<T>,
    h_scale: T,
    alpha: T,
    beta: T,
    true_weights: Vec<T>,
    feature_factor: Matrix<T>,
}

impl<T: Scalar> LogisticProblem<T> {
    pub fn new(
        feature_cov: SymmetricPd<T>,
        lambda_reg: T,
        true_weights: Vec<T>,
    ) -> Result<Self> {
        if !(lambda_reg > T::zero()) {
            return Err(LabError::validation("lambda_reg must be positive"));
        }
        let d = feature_cov.dim();
        if true_weights.len() != d {
            return Err(LabError::Dimension { expected: d, got: true_weights.len() });
        }
        let quarter = cast::<T>(0.25);
        let h_raw = SymmetricPd::new(
            feature_cov
                .matrix()
                .scale(quarter)
                .add(&Matrix::identity(d).scale(lambda_reg)),
        )?;
        let (h, h_scale) = h_raw.normalized();
        let alpha = lambda_reg;
        let beta = lambda_reg + quarter * feature_cov.lambda_max();
        let feature_factor = feature_cov.sqrt().matrix().clone();
        Ok(LogisticProblem {
            feature_cov,
            lambda_reg,
            h,
            h_scale,
            alpha,
            beta,
            true_weights,
            feature_factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_cov.dim()
    }

    pub fn h(&self) -> &SymmetricPd<T> {
        &self.h
    }

    pub fn h_scale(&self) -> T {
        self.h_scale
    }

    pub fn lambda_reg(&self) -> T {
        self.lambda_reg
    }

    pub fn feature_cov(&self) -> &SymmetricPd<T> {
        &self.feature_cov
    }

    pub fn true_weights(&self) -> &[T] {
        &self.true_weights
    }

    /// κ_ℓ ≤ 1 + λ_max(E[aaᵀ])/(4λ).
    pub fn kappa_ell_bound(&self) -> T {
        T::one() + self.feature_cov.lambda_max() / (cast::<T>(4.0) * self.lambda_reg)
    }

    /// Geometry (H, α, β) with the closed-form bounds above.
    pub fn geometry(&self) -> GeometrySpec<T> {
        GeometrySpec::new(self.h.scaled(self.h_scale).expect("positive"), self.alpha, self.beta)
            .expect("beta >= alpha > 0")
    }

    /// ∇²ℓ(w, (a, y)) = σ(1−σ) aaᵀ + λI, evaluated at the sample.
    pub fn hessian(&self, w: &[T], z: &[T]) -> Matrix<T> {
        let d = self.dim();
        let (a, _y) = split_sample(z, d);
        let margin = dot(a, w);
        let s = sigmoid(margin);
        let weight = s * (T::one() - s);
        Matrix::identity(d).scale(self.lambda_reg).add_outer(a, weight)
    }
}

impl<T: Scalar> SampleLoss<T> for LogisticProblem<T> {
    fn dim(&self) -> usize {
        self.feature_cov.dim()
    }

    fn loss(&self, x: &[T], z: &[T]) -> T {
        let d = self.dim();
        let (a, y) = split_sample(z, d);
        let margin = y * dot(a, x);
        softplus(-margin) + cast::<T>(0.5) * self.lambda_reg * dot(x, x)
    }

    fn grad_into(&self, x: &[T], z: &[T], out: &mut [T]) {
        let d = self.dim();
        let (a, y) = split_sample(z, d);
        let margin = y * dot(a, x);
        let w = sigmoid(-margin); // = σ(−y aᵀx)
        for i in 0..d {
            out[i] = -y * w * a[i] + self.lambda_reg * x[i];
        }
    }
}

impl<T: Scalar> SampleSource<T> for LogisticProblem<T> {
    fn sample_len(&self) -> usize {
        self.dim() + 1
    }

    fn sample_into(&self, rng: &mut Rng, out: &mut [T]) {
        let d = self.dim();
        let g: Vec<T> = (0..d).map(|_| cast::<T>(rng.next_gaussian())).collect();
        self.feature_factor.matvec_into(&g, &mut out[..d]);
        let p_plus = sigmoid(dot(&out[..d], &self.true_weights));
        out[d] = if cast::<T>(rng.next_f64()) < p_plus { T::one() } else { -T::one() };
    }
}

/// Builds the problem and samples an n-row dataset from it.
pub fn make_logistic<T: Scalar>(
    feature_cov: SymmetricPd<T>,
    lambda_reg: T,
    true_weights: Vec<T>,
    n: usize,
    seed: u64,
) -> Result<(LogisticProblem<T>, Dataset<T>)> {
    let problem = LogisticProblem::new(feature_cov, lambda_reg, true_weights)?;
    let data = Dataset::from_source(&problem, n, derive_seed(seed, 0), "logistic");
    Ok((problem, data))
}

/// Within-sample gradient covariance of the quadratic model:
/// Σ_S = α² H Ĉov(z₁..z_n) H with the biased (1/n) empirical covariance.
/// The result can be singular (all samples equal); the flag reports whether
/// it passed the strict positive-definiteness check.
pub fn sigma_s_empirical<T: Scalar>(
    model: &QuadraticNoisyModel<T>,
    dataset: &Dataset<T>,
) -> Result<(Matrix<T>, bool)> {
    let n = dataset.len();
    if n < 2 {
        return Err(LabError::validation("empirical covariance needs n >= 2"));
    }
    let d = model.dim();
    let inv_n = T::one() / cast::<T>(n as f64);
    let mut mean = vec![T::zero(); d];
    for z in dataset.samples() {
        for (m, v) in mean.iter_mut().zip(z) {
            *m += *v * inv_n;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    for z in dataset.samples() {
        let centered: Vec<T> = z.iter().zip(&mean).map(|(a, b)| *a - *b).collect();
        cov = cov.add_outer(&centered, inv_n);
    }
    let a2 = model.alpha() * model.alpha();
    let sigma_s = model
        .h()
        .matrix()
        .matmul(&cov)
        .matmul(model.h().matrix())
        .symmetrized()
        .scale(a2);
    let strictly_pd = SymmetricPd::new(sigma_s.clone()).is_ok();
    Ok((sigma_s, strictly_pd))
}

/// Empirical sup-over-grid envelope for the logistic gradient covariance.
///
/// No closed-form tight Σ with Cov(∇ℓ(x, z)) ⪯ Σ for all x is available for
/// logistic regression; this diagnostic estimates the covariance at each grid
/// point and returns the crude dominating envelope (max over the grid of
/// λ_max(Ĉov))·I together with the per-point covariances. It does not certify
/// the covariance assumption.
pub fn logistic_sigma_envelope<T: Scalar>(
    problem: &LogisticProblem<T>,
    grid: &[Vec<T>],
    draws: usize,
    seed: u64,
) -> Result<(Matrix<T>, Vec<Matrix<T>>)> {
    if grid.is_empty() || draws < 2 {
        return Err(LabError::validation("need at least one grid point and 2 draws"));
    }
    let d = problem.dim();
    let mut covs = Vec::with_capacity(grid.len());
    let mut lam_sup = T::zero();
    for (k, x) in grid.iter().enumerate() {
        if x.len() != d {
            return Err(LabError::Dimension { expected: d, got: x.len() });
        }
        let mut rng = Rng::new(derive_seed(seed, k as u64));
        let inv = T::one() / cast::<T>(draws as f64);
        let mut grads = Vec::with_capacity(draws);
        let mut mean = vec![T::zero(); d];
        for _ in 0..draws {
            let z = problem.sample(&mut rng);
            let g = problem.grad(x, &z);
            for (m, v) in mean.iter_mut().zip(&g) {
                *m += *v * inv;
            }
            grads.push(g);
        }
        let mut cov = Matrix::zeros(d, d);
        for g in &grads {
            let c: Vec<T> = g.iter().zip(&mean).map(|(a, b)| *a - *b).collect();
            cov = cov.add_outer(&c, inv);
        }
        let (_, lam) = crate::linalg::sym_eig(&cov)?;
        lam_sup = lam_sup.max(lam[0]);
        covs.push(cov);
    }
    Ok((Matrix::identity(d).scale(lam_sup), covs))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn split_sample<T>(z: &[T], d: usize) -> (&[T], T)
where
    T: Copy,
{
    debug_assert_eq!(z.len(), d + 1, "logistic samples carry d features plus a label");
    (&z[..d], z[d])
}

fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// ln(1 + e^t), overflow-safe.
fn softplus<T: Scalar>(t: T) -> T {
    if t > T::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_spd;

    fn scalar_model(sigma: f64, alpha: f64, mu: f64) -> QuadraticNoisyModel<f64> {
        QuadraticNoisyModel::new(
            SymmetricPd::identity(1),
            SymmetricPd::from_diag(&[sigma]).unwrap(),
            alpha,
            vec![mu],
        )
        .unwrap()
    }

    #[test]
    fn scalar_specialization_is_normal() {
        // d=1, H=1, Sigma=sigma^2, alpha=1 => z ~ N(mu, sigma^2)
        let model = scalar_model(0.25, 1.0, 3.0);
        let mut rng = Rng::new(7);
        let n = 100_000;
        let mut mean = 0.0;
        let mut var = 0.0;
        for _ in 0..n {
            let z = model.sample(&mut rng)[0];
            mean += z;
            var += (z - 3.0) * (z - 3.0);
        }
        mean /= n as f64;
        var /= n as f64;
        assert!((mean - 3.0).abs() < 0.01, "mean {mean}");
        assert!((var - 0.25).abs() < 0.01, "var {var}");
    }

    #[test]
    fn gradient_mean_vanishes_at_mu() {
        let mut rng_setup = Rng::new(100);
        let h = random_spd::<f64>(3, 1.0, 4.0, &mut rng_setup);
        let sigma = random_spd::<f64>(3, 0.5, 3.0, &mut rng_setup);
        let model =
            QuadraticNoisyModel::new(h, sigma.clone(), 1.3, vec![0.5, -1.0, 2.0]).unwrap();
        let n = 100_000;
        let mut rng = Rng::new(8);
        let mut mean = vec![0.0; 3];
        let mut g = vec![0.0; 3];
        let mu = model.mu().to_vec();
        for _ in 0..n {
            let z = model.sample(&mut rng);
            model.grad_into(&mu, &z, &mut g);
            for (m, v) in mean.iter_mut().zip(&g) {
                *m += v;
            }
        }
        for (i, m) in mean.iter().enumerate() {
            let m = m / n as f64;
            let sd = (sigma.matrix()[(i, i)] / n as f64).sqrt();
            assert!(m.abs() <= 4.0 * sd, "coordinate {i}: mean {m}, 4sd {}", 4.0 * sd);
        }
    }

    #[test]
    fn gradient_covariance_matches_sigma() {
        let mut rng_setup = Rng::new(200);
        let h = random_spd::<f64>(3, 1.0, 5.0, &mut rng_setup);
        // keep sigma entries away from zero so relative comparisons make sense
        let sigma = SymmetricPd::new(
            Matrix::from_rows(&[
                vec![0.30, 0.10, 0.08],
                vec![0.10, 0.25, 0.09],
                vec![0.08, 0.09, 0.20],
            ])
            .unwrap(),
        )
        .unwrap();
        let model = QuadraticNoisyModel::new(h, sigma.clone(), 0.8, vec![0.0; 3]).unwrap();
        let n = 100_000;
        let mut rng = Rng::new(9);
        let x = vec![0.7, -0.4, 0.1];
        let mut grads = Vec::with_capacity(n);
        let mut mean = vec![0.0; 3];
        for _ in 0..n {
            let z = model.sample(&mut rng);
            let g = model.grad(&x, &z);
            for (m, v) in mean.iter_mut().zip(&g) {
                *m += v / n as f64;
            }
            grads.push(g);
        }
        let mut cov = Matrix::<f64>::zeros(3, 3);
        for g in &grads {
            let c: Vec<f64> = g.iter().zip(&mean).map(|(a, b)| a - b).collect();
            cov = cov.add_outer(&c, 1.0 / n as f64);
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = sigma.matrix()[(i, j)];
                let got = cov[(i, j)];
                assert!(
                    ((got - want) / want).abs() < 0.05,
                    "cov[{i}{j}] {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn population_excess_risk_examples_and_monte_carlo() {
        let model = scalar_model(1.0, 1.0, 0.0);
        assert_eq!(model.population_excess_risk(&[0.0]), 0.0);
        assert!((model.population_excess_risk(&[2.0]) - 2.0).abs() < 1e-15);

        let mut rng_setup = Rng::new(300);
        let h = random_spd::<f64>(2, 1.0, 3.0, &mut rng_setup);
        let sigma = random_spd::<f64>(2, 0.4, 2.0, &mut rng_setup);
        let model = QuadraticNoisyModel::new(h, sigma, 1.1, vec![0.3, -0.2]).unwrap();
        let x = vec![1.0, 1.0];
        let n = 100_000;
        let mut rng = Rng::new(10);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = model.sample(&mut rng);
            let l = model.loss(&x, &z);
            sum += l;
            sumsq += l * l;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        let estimate = mean - model.noise_floor();
        let exact = model.population_excess_risk(&x);
        assert!(
            (estimate - exact).abs() <= 3.0 * se,
            "MC {estimate} vs exact {exact}, 3se {}",
            3.0 * se
        );
    }

    #[test]
    fn empirical_risk_trivial_cases_and_pairwise_oracle() {
        let model = scalar_model(1.0, 1.0, 0.0);
        let single = Dataset::from_rows(vec![vec![2.0]], 0, "manual").unwrap();
        let x = [0.5];
        assert_eq!(
            empirical_risk(&single, &model, &x).unwrap(),
            model.loss(&x, &[2.0])
        );

        let repeated = Dataset::from_rows(vec![vec![2.0]; 17], 0, "manual").unwrap();
        assert!(
            (empirical_risk(&repeated, &model, &x).unwrap() - model.loss(&x, &[2.0])).abs()
                < 1e-15
        );

        let mut rng = Rng::new(11);
        let rows: Vec<Vec<f64>> = (0..1000).map(|_| vec![rng.next_gaussian()]).collect();
        let data = Dataset::from_rows(rows.clone(), 0, "manual").unwrap();
        let naive = empirical_risk(&data, &model, &x).unwrap();
        let losses: Vec<f64> = rows.iter().map(|z| model.loss(&x, z)).collect();
        let pairwise = pairwise_sum(&losses) / losses.len() as f64;
        assert!(((naive - pairwise) / pairwise).abs() < 1e-12);

        let empty: Dataset<f64> = Dataset { samples: vec![], seed: 0, source: "x".into() };
        assert!(empirical_risk(&empty, &model, &x).is_err());
    }

    fn pairwise_sum(v: &[f64]) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
        }
    }

    #[test]
    fn effective_dimension_examples() {
        let eye = SymmetricPd::<f64>::identity(5);
        let dims =
            effective_dimensions(&eye, eye.matrix(), &eye, &eye).unwrap();
        for v in [
            dims.tr_hinv_sigma,
            dims.tr_p_sigma,
            dims.tr_php_sigma,
            dims.tr_pmp_sigma,
            dims.tr_minv_sigma,
        ] {
            assert!((v - 5.0).abs() < 1e-12);
        }

        let h = SymmetricPd::from_diag(&[1.0f64, 0.5]).unwrap();
        let sigma = SymmetricPd::from_diag(&[0.2f64, 0.1]).unwrap();
        let p = crate::geometry::optimal_preconditioner(&h);
        let dims = effective_dimensions(&h, sigma.matrix(), &p, &h).unwrap();
        assert!((dims.tr_hinv_sigma - 0.4).abs() < 1e-12);

        // optimal P: tr(P Sigma)/lambda_min(PH) = tr(H^-1 Sigma)
        let mut rng = Rng::new(12);
        for _ in 0..10 {
            let h = random_spd::<f64>(4, 1.0, 6.0, &mut rng);
            let sigma = random_spd::<f64>(4, 0.5, 3.0, &mut rng);
            let p = crate::geometry::optimal_preconditioner(&h);
            let dims = effective_dimensions(&h, sigma.matrix(), &p, &h).unwrap();
            let pencil = crate::linalg::pencil_spectrum(&p, &h).unwrap();
            let ratio = dims.tr_p_sigma / pencil.last().unwrap();
            assert!(((ratio - dims.tr_hinv_sigma) / dims.tr_hinv_sigma).abs() < 1e-9);
        }
    }

    #[test]
    fn logistic_kappa_bound_and_limits() {
        // lambda_max(E[aa^T]) = 1, lambda = 0.25 => kappa_ell bound = 2
        let cov = SymmetricPd::from_diag(&[1.0f64, 0.5]).unwrap();
        let prob = LogisticProblem::new(cov, 0.25, vec![1.0, -1.0]).unwrap();
        assert!((prob.kappa_ell_bound() - 2.0).abs() < 1e-12);

        // lambda -> infinity: H -> I after normalization, bound -> 1
        let cov = SymmetricPd::from_diag(&[1.0f64, 0.5]).unwrap();
        let prob = LogisticProblem::new(cov, 1e6, vec![0.0, 0.0]).unwrap();
        assert!((prob.kappa_ell_bound() - 1.0).abs() < 1e-6);
        let h = prob.h();
        assert!(h.matrix().sub(&Matrix::identity(2)).frobenius_norm() < 1e-6);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut rng = Rng::new(400);
        let cov = random_spd::<f64>(3, 1.0, 2.0, &mut rng);
        let prob = LogisticProblem::new(cov, 0.3, vec![0.5, -0.2, 0.8]).unwrap();
        for _ in 0..50 {
            let z = prob.sample(&mut rng);
            let w: Vec<f64> = (0..3).map(|_| rng.next_gaussian()).collect();
            let g = prob.grad(&w, &z);
            for k in 0..3 {
                let eps = 1e-6;
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[k] += eps;
                wm[k] -= eps;
                let fd = (prob.loss(&wp, &z) - prob.loss(&wm, &z)) / (2.0 * eps);
                assert!(
                    (fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()),
                    "coord {k}: fd {fd} vs grad {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences() {
        let mut rng = Rng::new(401);
        let h = random_spd::<f64>(3, 1.0, 4.0, &mut rng);
        let sigma = random_spd::<f64>(3, 0.5, 2.0, &mut rng);
        let model = QuadraticNoisyModel::new(h, sigma, 1.4, vec![0.0; 3]).unwrap();
        for _ in 0..20 {
            let z = model.sample(&mut rng);
            let x: Vec<f64> = (0..3).map(|_| rng.next_gaussian()).collect();
            let g = model.grad(&x, &z);
            for k in 0..3 {
                let eps = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += eps;
                xm[k] -= eps;
                let fd = (model.loss(&xp, &z) - model.loss(&xm, &z)) / (2.0 * eps);
                assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()));
            }
        }
    }

    #[test]
    fn logistic_hessian_bounds() {
        let mut rng = Rng::new(500);
        let cov = random_spd::<f64>(3, 1.0, 3.0, &mut rng);
        let prob = LogisticProblem::new(cov, 0.4, vec![0.2, 0.4, -0.6]).unwrap();
        let lambda = prob.lambda_reg();
        let quarter_aa_plus = |a: &[f64]| {
            Matrix::identity(3).scale(lambda).add_outer(a, 0.25)
        };
        // per-sample: lambda I <= hess <= 1/4 a a^T + lambda I
        for _ in 0..1000 {
            let z = prob.sample(&mut rng);
            let w: Vec<f64> = (0..3).map(|_| rng.next_gaussian()).collect();
            let hess = prob.hessian(&w, &z);
            let (_, lo) = crate::linalg::sym_eig(
                &hess.sub(&Matrix::identity(3).scale(lambda)),
            )
            .map(|(q, l)| (q, l))
            .unwrap();
            assert!(*lo.last().unwrap() >= -1e-10, "hess >= lambda I");
            let upper = quarter_aa_plus(&z[..3]).sub(&hess);
            let (_, lu) = crate::linalg::sym_eig(&upper).unwrap();
            assert!(*lu.last().unwrap() >= -1e-10, "hess <= 1/4 aa^T + lambda I");
        }
        // population: alpha H <= E[hess] <= beta H (w.r.t. normalized H)
        let mut mean_hess = Matrix::<f64>::zeros(3, 3);
        let n = 20_000;
        for _ in 0..n {
            let z = prob.sample(&mut rng);
            let w = vec![0.1, -0.3, 0.2];
            mean_hess = mean_hess.add(&prob.hessian(&w, &z).scale(1.0 / n as f64));
        }
        let geom = prob.geometry();
        let hmh = geom.h_inv().sqrt();
        let white = hmh.matrix().matmul(&mean_hess).matmul(hmh.matrix()).symmetrized();
        let (_, lam) = crate::linalg::sym_eig(&white).unwrap();
        assert!(lam[0] <= geom.beta() * 1.05, "top {} beta {}", lam[0], geom.beta());
        assert!(
            *lam.last().unwrap() >= geom.alpha() * 0.95,
            "bottom {} alpha {}",
            lam.last().unwrap(),
            geom.alpha()
        );
    }

    #[test]
    fn gradient_covariance_is_x_free() {
        let mut rng_setup = Rng::new(600);
        let h = random_spd::<f64>(2, 1.0, 3.0, &mut rng_setup);
        let sigma = random_spd::<f64>(2, 0.3, 2.0, &mut rng_setup);
        let model = QuadraticNoisyModel::new(h, sigma, 1.0, vec![0.0, 0.0]).unwrap();
        let cov_at = |x: &[f64], seed: u64| {
            let mut rng = Rng::new(seed);
            let n = 50_000;
            let mut mean = vec![0.0; 2];
            let mut gs = Vec::with_capacity(n);
            for _ in 0..n {
                let z = model.sample(&mut rng);
                let g = model.grad(x, &z);
                for (m, v) in mean.iter_mut().zip(&g) {
                    *m += v / n as f64;
                }
                gs.push(g);
            }
            let mut cov = Matrix::<f64>::zeros(2, 2);
            for g in &gs {
                let c: Vec<f64> = g.iter().zip(&mean).map(|(a, b)| a - b).collect();
                cov = cov.add_outer(&c, 1.0 / n as f64);
            }
            cov
        };
        let c1 = cov_at(&[0.0, 0.0], 13);
        let c2 = cov_at(&[25.0, -40.0], 14);
        let scale = c1.max_abs();
        assert!(c1.sub(&c2).max_abs() / scale < 0.05);
    }

    #[test]
    fn sigma_s_cases() {
        let model = scalar_model(0.49, 2.0, 0.0);
        // identical samples -> zero matrix, flagged not strictly PD
        let same = Dataset::from_rows(vec![vec![1.0]; 5], 0, "manual").unwrap();
        let (m, pd) = sigma_s_empirical(&model, &same).unwrap();
        assert_eq!(m[(0, 0)], 0.0);
        assert!(!pd);

        // d=1: equals alpha^2 * biased sample variance
        let rows = vec![vec![1.0], vec![2.0], vec![4.0]];
        let data = Dataset::from_rows(rows, 0, "manual").unwrap();
        let (m, _) = sigma_s_empirical(&model, &data).unwrap();
        let mean: f64 = 7.0 / 3.0;
        let var = ((1.0 - mean).powi(2) + (2.0 - mean).powi(2) + (4.0 - mean).powi(2)) / 3.0;
        assert!((m[(0, 0)] - 4.0 * var).abs() < 1e-12);

        let single = Dataset::from_rows(vec![vec![1.0]], 0, "manual").unwrap();
        assert!(sigma_s_empirical(&model, &single).is_err());
    }

    #[test]
    fn sigma_s_converges_to_sigma() {
        let mut rng_setup = Rng::new(700);
        let h = random_spd::<f64>(4, 1.0, 3.0, &mut rng_setup);
        let sigma = SymmetricPd::new(
            Matrix::from_rows(&[
                vec![0.40, 0.12, 0.10, 0.08],
                vec![0.12, 0.35, 0.11, 0.09],
                vec![0.10, 0.11, 0.30, 0.07],
                vec![0.08, 0.09, 0.07, 0.25],
            ])
            .unwrap(),
        )
        .unwrap();
        let model = QuadraticNoisyModel::new(h, sigma.clone(), 1.2, vec![0.0; 4]).unwrap();
        let data = Dataset::from_source(&model, 10_000, 77, "quadratic");
        let (m, pd) = sigma_s_empirical(&model, &data).unwrap();
        assert!(pd);
        for i in 0..4 {
            for j in 0..4 {
                let want = sigma.matrix()[(i, j)];
                assert!(
                    ((m[(i, j)] - want) / want).abs() < 0.10,
                    "entry ({i},{j}): {} vs {want}",
                    m[(i, j)]
                );
            }
        }
    }

    #[test]
    fn dataset_csv_round_trip() {
        let model = scalar_model(1.0, 1.0, 0.0);
        let data = Dataset::from_source(&model, 6, 17, "quadratic");
        let text = data.to_csv();
        let back: Dataset<f64> = Dataset::from_csv_str(&text, 17, "quadratic").unwrap();
        assert_eq!(data.samples(), back.samples());
    }

    #[test]
    fn logistic_envelope_dominates_grid_covariances() {
        let cov = SymmetricPd::from_diag(&[1.0f64, 0.5]).unwrap();
        let prob = LogisticProblem::new(cov, 0.3, vec![0.8, -0.4]).unwrap();
        let grid = vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-2.0, 0.5]];
        let (envelope, covs) = logistic_sigma_envelope(&prob, &grid, 5000, 9).unwrap();
        assert_eq!(covs.len(), 3);
        for c in &covs {
            let diff = envelope.sub(c).symmetrized();
            let (_, lam) = crate::linalg::sym_eig(&diff).unwrap();
            assert!(*lam.last().unwrap() >= -1e-10, "envelope must dominate");
        }
    }

    #[test]
    fn replace_one_differs_in_exactly_one_row() {
        let model = scalar_model(1.0, 1.0, 0.0);
        let data = Dataset::from_source(&model, 8, 3, "quadratic");
        let replaced = data.replace_one(5, vec![99.0]).unwrap();
        for i in 0..8 {
            if i == 5 {
                assert_eq!(replaced.sample(i), &[99.0]);
            } else {
                assert_eq!(replaced.sample(i), data.sample(i));
            }
        }
        assert!(data.replace_one(8, vec![0.0]).is_err());
    }
}
