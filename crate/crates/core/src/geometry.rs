//! Loss geometry and preconditioner diagnostics.
//!
//! A loss that is α-strongly convex and β-smooth w.r.t. the ‖·‖_H norm has
//! condition number κ_ℓ = β/α and alignment threshold
//! ρ_ℓ = (√κ_ℓ + 1)/(√κ_ℓ − 1). A preconditioner P is spectrally aligned when
//! the pencil condition number κ(PH) stays below ρ_ℓ²; the alignment constant
//!
//!   C_{ℓ,P}^{(θ)} = (ρ_ℓ² − κ(PH)^{1−θ}) / (ρ_ℓ² − 1) ∈ (0, 1]
//!
//! then yields a contraction rate r = 2 λ_min(PH) C^{(θ)} αβ/(α+β) for the
//! preconditioned gradient update, measured in the metric
//! M_θ = H^{1/2} (H^{1/2} P H^{1/2})^{−θ} H^{1/2} that interpolates between
//! the curvature metric H (θ = 0) and the algorithm metric P⁻¹ (θ = 1).
//!
//! The inequality checkers at the bottom instantiate quadratic test functions
//! f(x) = ½ xᵀA x with αH ⪯ A ⪯ βH and evaluate both sides of the
//! co-coercivity, contraction and PL-growth statements exactly.

use crate::error::{LabError, Result};
use crate::linalg::{pencil_spectrum, sym_eig, Matrix, SymmetricPd};
use crate::rng::Rng;
use crate::scalar::{cast, Scalar};

/// Absolute-plus-relative slack for all inequality checks.
fn check_tol<T: Scalar>(scale: T) -> T {
    cast::<T>(1e-10) * (T::one() + scale.abs())
}

/// Loss geometry (H, α, β) with λ_max(H) = 1 enforced by rescaling at
/// construction; the original λ_max is kept as `h_scale`.
#[derive(Clone, Debug)]
pub struct GeometrySpec<T> {
    h: SymmetricPd<T>,
    h_inv: SymmetricPd<T>,
    h_half: SymmetricPd<T>,
    h_scale: T,
    alpha: T,
    beta: T,
}

impl<T: Scalar> GeometrySpec<T> {
    pub fn new(h_raw: SymmetricPd<T>, alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero()) || beta < alpha {
            return Err(LabError::validation(format!(
                "need beta >= alpha > 0, got alpha = {alpha}, beta = {beta}"
            )));
        }
        let (h, h_scale) = h_raw.normalized();
        let h_inv = h.inverse();
        let h_half = h.sqrt();
        Ok(GeometrySpec { h, h_inv, h_half, h_scale, alpha, beta })
    }

    pub fn h(&self) -> &SymmetricPd<T> {
        &self.h
    }

    pub fn h_inv(&self) -> &SymmetricPd<T> {
        &self.h_inv
    }

    pub fn h_half(&self) -> &SymmetricPd<T> {
        &self.h_half
    }

    pub fn h_scale(&self) -> T {
        self.h_scale
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn kappa_ell(&self) -> T {
        self.beta / self.alpha
    }

    /// (√κ_ℓ + 1)/(√κ_ℓ − 1), +∞ at κ_ℓ = 1 (quadratic losses).
    pub fn rho_ell(&self) -> T {
        rho_ell(self.kappa_ell()).expect("kappa_ell >= 1 by construction")
    }
}

/// Alignment threshold ρ_ℓ for a given loss condition number.
pub fn rho_ell<T: Scalar>(kappa_ell: T) -> Result<T> {
    if kappa_ell < T::one() {
        return Err(LabError::validation(format!("kappa_ell must be >= 1, got {kappa_ell}")));
    }
    if kappa_ell == T::one() {
        return Ok(T::infinity());
    }
    let s = kappa_ell.sqrt();
    Ok((s + T::one()) / (s - T::one()))
}

/// C^{(θ)} = (ρ² − κ(PH)^{1−θ})/(ρ² − 1) when κ(PH)^{1−θ} < ρ²; 1 when
/// ρ = +∞; `None` when the preconditioner is misaligned at this θ.
pub fn alignment_constant<T: Scalar>(geom: &GeometrySpec<T>, kappa_ph: T, theta: T) -> Option<T> {
    debug_assert!(kappa_ph >= T::one() - cast(1e-12));
    let rho = geom.rho_ell();
    if rho.is_infinite() {
        return Some(T::one());
    }
    let rho2 = rho * rho;
    let k_eff = kappa_ph.powf(T::one() - theta);
    if k_eff < rho2 {
        Some((rho2 - k_eff) / (rho2 - T::one()))
    } else {
        None
    }
}

/// P with λ_max(P) = 1 plus everything the pencil (P, H) determines.
#[derive(Clone, Debug)]
pub struct PreconditionerProfile<T> {
    p: SymmetricPd<T>,
    p_scale: T,
    pencil: Vec<T>,
}

impl<T: Scalar> PreconditionerProfile<T> {
    pub fn new(geom: &GeometrySpec<T>, p_raw: SymmetricPd<T>) -> Result<Self> {
        if p_raw.dim() != geom.dim() {
            return Err(LabError::Dimension { expected: geom.dim(), got: p_raw.dim() });
        }
        let (p, p_scale) = p_raw.normalized();
        let pencil = pencil_spectrum(&p, geom.h())?;
        Ok(PreconditionerProfile { p, p_scale, pencil })
    }

    pub fn p(&self) -> &SymmetricPd<T> {
        &self.p
    }

    pub fn p_scale(&self) -> T {
        self.p_scale
    }

    /// Spectrum of PH, descending.
    pub fn pencil(&self) -> &[T] {
        &self.pencil
    }

    pub fn lambda_max_ph(&self) -> T {
        self.pencil[0]
    }

    pub fn lambda_min_ph(&self) -> T {
        *self.pencil.last().expect("nonempty pencil")
    }

    pub fn kappa_ph(&self) -> T {
        self.lambda_max_ph() / self.lambda_min_ph()
    }

    /// C_{ℓ,P} at θ = 0 (the Definition-3 constant).
    pub fn alignment(&self, geom: &GeometrySpec<T>) -> Option<T> {
        alignment_constant(geom, self.kappa_ph(), T::zero())
    }

    pub fn alignment_at(&self, geom: &GeometrySpec<T>, theta: T) -> Option<T> {
        alignment_constant(geom, self.kappa_ph(), theta)
    }
}

/// Contraction rate and admissible step cap of the preconditioned update in
/// the ‖·‖_{M_θ} metric.
#[derive(Clone, Copy, Debug)]
pub struct ContractionRate<T> {
    pub r: T,
    pub eta_max: T,
}

/// r = 2 λ_min(PH) C^{(θ)} αβ/(α+β) and
/// η_max = 2 C^{(θ)} / (λ_max(PH) κ(PH)^{1−θ} (α+β)); `None` when the
/// alignment constant is absent at this θ. At θ = 1 the constant is 1, so a
/// rate exists for every SPD preconditioner.
pub fn contraction_rate<T: Scalar>(
    geom: &GeometrySpec<T>,
    prof: &PreconditionerProfile<T>,
    theta: T,
) -> Option<ContractionRate<T>> {
    let c = prof.alignment_at(geom, theta)?;
    let two = cast::<T>(2.0);
    let ab = geom.alpha() + geom.beta();
    let r = two * prof.lambda_min_ph() * c * geom.alpha() * geom.beta() / ab;
    let k_eff = prof.kappa_ph().powf(T::one() - theta);
    let eta_max = two * c / (prof.lambda_max_ph() * k_eff * ab);
    Some(ContractionRate { r, eta_max })
}

/// M_θ = H^{1/2} (H^{1/2} P H^{1/2})^{−θ} H^{1/2}. M_0 = H and M_1 = P⁻¹.
pub fn m_theta<T: Scalar>(
    p: &SymmetricPd<T>,
    h: &SymmetricPd<T>,
    theta: T,
) -> Result<SymmetricPd<T>> {
    if theta < T::zero() || theta > T::one() {
        return Err(LabError::validation(format!("theta must be in [0, 1], got {theta}")));
    }
    if p.dim() != h.dim() {
        return Err(LabError::Dimension { expected: h.dim(), got: p.dim() });
    }
    let hh = h.sqrt();
    let s = hh.matrix().matmul(p.matrix()).matmul(hh.matrix()).symmetrized();
    let s_pd = SymmetricPd::new(s)?;
    let core = s_pd.frac_power(-theta);
    let m = hh.matrix().matmul(core.matrix()).matmul(hh.matrix()).symmetrized();
    SymmetricPd::new(m)
}

/// λ_min(H) H⁻¹, the minimizer of tr(PΣ)/λ_min(PH) over λ_max-normalized P.
pub fn optimal_preconditioner<T: Scalar>(h: &SymmetricPd<T>) -> SymmetricPd<T> {
    h.inverse().scaled(h.lambda_min()).expect("positive scale")
}

/// Outcome of a numeric inequality check: both sides plus the verdict under
/// the crate-wide tolerance.
#[derive(Clone, Copy, Debug)]
pub struct InequalityCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
}

/// Validates αH ⪯ A ⪯ βH through the spectrum of H^{−1/2} A H^{−1/2}.
fn validate_sandwich<T: Scalar>(geom: &GeometrySpec<T>, a: &Matrix<T>) -> Result<()> {
    let hmh = geom.h_inv().sqrt();
    let w = hmh.matrix().matmul(a).matmul(hmh.matrix()).symmetrized();
    let (_, lambda) = sym_eig(&w)?;
    let slack = cast::<T>(1e-8) * geom.beta();
    let lmax = lambda[0];
    let lmin = *lambda.last().expect("nonempty");
    if lmin < geom.alpha() - slack || lmax > geom.beta() + slack {
        return Err(LabError::validation(format!(
            "test Hessian violates alpha*H <= A <= beta*H: whitened spectrum [{lmin}, {lmax}] \
             outside [{}, {}]",
            geom.alpha(),
            geom.beta()
        )));
    }
    Ok(())
}

/// Both sides of the generalized co-coercivity inequality for the quadratic
/// test function f(x) = ½ xᵀA x:
///
///   ⟨x−y, HP·A(x−y)⟩ ≥ λ_min(PH) C_{ℓ,P}/(α+β) · (αβ‖x−y‖²_H + ‖A(x−y)‖²_{H⁻¹})
///
/// HP is not symmetric, so the orientation matters: the provable pairing puts
/// HP on the gradient difference (it equals ũᵀSṽ in whitened coordinates,
/// matching the PL-growth inequality); the transposed pairing
/// ⟨A(x−y), HP(x−y)⟩ can go negative even under spectral alignment.
pub fn check_cocoercivity<T: Scalar>(
    geom: &GeometrySpec<T>,
    prof: &PreconditionerProfile<T>,
    a: &Matrix<T>,
    x: &[T],
    y: &[T],
) -> Result<InequalityCheck<T>> {
    validate_sandwich(geom, a)?;
    let c = prof.alignment(geom).ok_or_else(|| {
        LabError::validation("preconditioner is not spectrally aligned (kappa(PH) >= rho^2)")
    })?;
    let u: Vec<T> = x.iter().zip(y).map(|(a, b)| *a - *b).collect();
    let au = a.matvec(&u);
    let pau = prof.p().matvec(&au);
    let hpau = geom.h().matvec(&pau);
    let lhs = dot(&u, &hpau);

    let ab = geom.alpha() + geom.beta();
    let rhs = prof.lambda_min_ph() * c / ab
        * (geom.alpha() * geom.beta() * geom.h().quad_form(&u) + geom.h_inv().quad_form(&au));
    Ok(InequalityCheck { lhs, rhs, holds: lhs >= rhs - check_tol(rhs) })
}

/// Contraction of one preconditioned gradient step on the quadratic test
/// function, measured in ‖·‖²_{M_θ}: ratio ≤ 1 − ηr for η ≤ η_max(θ).
pub fn check_contractivity<T: Scalar>(
    geom: &GeometrySpec<T>,
    prof: &PreconditionerProfile<T>,
    a: &Matrix<T>,
    theta: T,
    eta: T,
    x: &[T],
    y: &[T],
) -> Result<InequalityCheck<T>> {
    validate_sandwich(geom, a)?;
    let rate = contraction_rate(geom, prof, theta).ok_or_else(|| {
        LabError::validation("no contraction rate: preconditioner misaligned at this theta")
    })?;
    if eta > rate.eta_max {
        return Err(LabError::validation(format!(
            "step size {eta} exceeds the admissible cap {}",
            rate.eta_max
        )));
    }
    let m = m_theta(prof.p(), geom.h(), theta)?;
    let u: Vec<T> = x.iter().zip(y).map(|(a, b)| *a - *b).collect();
    let au = a.matvec(&u);
    let pau = prof.p().matvec(&au);
    let u_next: Vec<T> = u.iter().zip(&pau).map(|(ui, s)| *ui - eta * *s).collect();
    let denom = m.quad_form(&u);
    if denom == T::zero() {
        return Err(LabError::validation("x and y must differ"));
    }
    let ratio = m.quad_form(&u_next) / denom;
    let bound = T::one() - eta * rate.r;
    Ok(InequalityCheck { lhs: ratio, rhs: bound, holds: ratio <= bound + cast(1e-10) })
}

/// Preconditioned PL-growth inequality at the quadratic test function with
/// minimizer x*:
///
///   ⟨x−x*, HP∇f(x)⟩ ≥ 2α/(α+β) λ_min(PH) C_{ℓ,P} (f(x) − f(x*) + β/2 ‖x−x*‖²_H)
pub fn pl_growth_check<T: Scalar>(
    geom: &GeometrySpec<T>,
    prof: &PreconditionerProfile<T>,
    a: &Matrix<T>,
    x: &[T],
    x_star: &[T],
) -> Result<InequalityCheck<T>> {
    validate_sandwich(geom, a)?;
    let c = prof.alignment(geom).ok_or_else(|| {
        LabError::validation("preconditioner is not spectrally aligned (kappa(PH) >= rho^2)")
    })?;
    let u: Vec<T> = x.iter().zip(x_star).map(|(a, b)| *a - *b).collect();
    let grad = a.matvec(&u);
    let pg = prof.p().matvec(&grad);
    let hpg = geom.h().matvec(&pg);
    let lhs = dot(&u, &hpg);

    let half = cast::<T>(0.5);
    let f_gap = half * dot(&u, &grad);
    let ab = geom.alpha() + geom.beta();
    let rhs = cast::<T>(2.0) * geom.alpha() / ab
        * prof.lambda_min_ph()
        * c
        * (f_gap + half * geom.beta() * geom.h().quad_form(&u));
    Ok(InequalityCheck { lhs, rhs, holds: lhs >= rhs - check_tol(rhs) })
}

/// Random quadratic Hessian satisfying αH ⪯ A ⪯ βH by construction:
/// A = H^{1/2} (αI + (β−α) W) H^{1/2} with W a symmetric contraction whose
/// spectrum lies in [0, 1].
pub fn sample_test_hessian<T: Scalar>(geom: &GeometrySpec<T>, rng: &mut Rng) -> Matrix<T> {
    let d = geom.dim();
    let q = random_orthonormal(d, rng);
    let spectrum: Vec<T> = (0..d)
        .map(|_| geom.alpha() + (geom.beta() - geom.alpha()) * cast::<T>(rng.next_f64()))
        .collect();
    let inner = q.matmul(&Matrix::diag(&spectrum)).matmul(&q.transpose());
    geom.h_half().matrix().matmul(&inner).matmul(geom.h_half().matrix()).symmetrized()
}

/// Random SPD matrix whose spectrum is log-uniform over [λ_max/cond, λ_max].
pub fn random_spd<T: Scalar>(dim: usize, lambda_max: T, cond: T, rng: &mut Rng) -> SymmetricPd<T> {
    assert!(dim >= 1);
    let q = random_orthonormal::<T>(dim, rng);
    let mut lambda = vec![lambda_max; dim];
    if dim > 1 {
        let log_cond = cond.ln();
        for (i, l) in lambda.iter_mut().enumerate() {
            let frac = if i == 0 {
                T::zero()
            } else if i == dim - 1 {
                T::one()
            } else {
                cast::<T>(rng.next_f64())
            };
            *l = lambda_max * (-log_cond * frac).exp();
        }
    }
    SymmetricPd::from_eigen(q, lambda).expect("positive spectrum")
}

/// Haar-ish random orthonormal basis from the eigenvectors of a random
/// symmetric Gaussian matrix.
pub fn random_orthonormal<T: Scalar>(dim: usize, rng: &mut Rng) -> Matrix<T> {
    let mut g = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let v = cast::<T>(rng.next_gaussian());
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let (q, _) = sym_eig(&g).expect("symmetric by construction");
    q
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Random preconditioner with κ(PH) strictly inside the alignment region of
/// `geom`, built by prescribing the pencil spectrum directly:
/// P = H^{−1/2} S' H^{−1/2} has pencil spectrum exactly spec(S').
pub fn sample_aligned_preconditioner<T: Scalar>(
    geom: &GeometrySpec<T>,
    kappa_cap_quadratic: T,
    rng: &mut Rng,
) -> PreconditionerProfile<T> {
    let rho = geom.rho_ell();
    let kappa_cap = if rho.is_infinite() {
        kappa_cap_quadratic
    } else {
        (rho * rho - T::one()) * cast::<T>(0.98) + T::one()
    };
    let kappa = T::one() + (kappa_cap - T::one()) * cast::<T>(rng.next_f64());
    let d = geom.dim();
    let basis = random_orthonormal::<T>(d, rng);
    let mut spec = vec![T::one(); d];
    for (i, s) in spec.iter_mut().enumerate() {
        *s = if i == 0 {
            T::one()
        } else if i == d - 1 {
            T::one() / kappa
        } else {
            T::one() / (T::one() + (kappa - T::one()) * cast::<T>(rng.next_f64()))
        };
    }
    let s_target = SymmetricPd::from_eigen(basis, spec).expect("positive spectrum");
    let hmh = geom.h_inv().sqrt();
    let p = SymmetricPd::new(
        hmh.matrix().matmul(s_target.matrix()).matmul(hmh.matrix()).symmetrized(),
    )
    .expect("congruence of SPD stays SPD");
    PreconditionerProfile::new(geom, p).expect("dimensions agree")
}
