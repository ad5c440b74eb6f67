//! Preconditioned SGD: x_{t+1} = x_t − η_t P ∇ℓ(x_t, z_{i_t}), multipass
//! (indices drawn uniformly with replacement from a fixed dataset) and
//! single-pass (a fresh sample every step), plus the step-size schedules the
//! risk propositions prescribe.
//!
//! Every trace maintains two running accumulators the bounds consume:
//! T_t = Σ_{s<t} η_s and the discounted square sum
//! η̄_t = Σ_{s<t} e^{−r(T_t−T_s)/4} η_s², advanced in O(1) per step by
//! η̄_{t+1} = e^{−r η_t/4} (η̄_t + η_t²).

use crate::error::{LabError, Result};
use crate::geometry::{contraction_rate, GeometrySpec, PreconditionerProfile};
use crate::linalg::SymmetricPd;
use crate::problems::{Dataset, SampleLoss, SampleSource};
use crate::rng::Rng;
use crate::scalar::{cast, Scalar};

/// Step-size rule. `t` is the 0-based step counter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScheduleKind<T> {
    /// η_t = η₀.
    Constant { eta0: T },
    /// η_t = min(η₀, c/(t+1)).
    CappedHarmonic { eta0: T, c: T },
    /// η_t = min(η₀, c/t) with η₀ at t = 0; the single-pass lower-bound rule.
    CappedHarmonicShifted { eta0: T, c: T },
}

impl<T: Scalar> ScheduleKind<T> {
    pub fn eta_at(&self, t: usize) -> T {
        match *self {
            ScheduleKind::Constant { eta0 } => eta0,
            ScheduleKind::CappedHarmonic { eta0, c } => eta0.min(c / cast::<T>((t + 1) as f64)),
            ScheduleKind::CappedHarmonicShifted { eta0, c } => {
                if t == 0 {
                    eta0
                } else {
                    eta0.min(c / cast::<T>(t as f64))
                }
            }
        }
    }

    pub fn eta0(&self) -> T {
        match *self {
            ScheduleKind::Constant { eta0 }
            | ScheduleKind::CappedHarmonic { eta0, .. }
            | ScheduleKind::CappedHarmonicShifted { eta0, .. } => eta0,
        }
    }
}

/// A schedule plus its running accumulators.
#[derive(Clone, Debug)]
pub struct ScheduleTrace<T> {
    kind: ScheduleKind<T>,
    /// Decay rate used in the η̄ discount; the metric's contraction rate.
    r: T,
    t: usize,
    t_sum: T,
    eta_bar: T,
}

impl<T: Scalar> ScheduleTrace<T> {
    pub fn new(kind: ScheduleKind<T>, r: T) -> Result<Self> {
        let ok = match kind {
            ScheduleKind::Constant { eta0 } => eta0 > T::zero(),
            ScheduleKind::CappedHarmonic { eta0, c }
            | ScheduleKind::CappedHarmonicShifted { eta0, c } => eta0 > T::zero() && c > T::zero(),
        };
        if !ok {
            return Err(LabError::validation("schedule parameters must be positive"));
        }
        if r < T::zero() {
            return Err(LabError::validation("decay rate r must be nonnegative"));
        }
        Ok(ScheduleTrace { kind, r, t: 0, t_sum: T::zero(), eta_bar: T::zero() })
    }

    pub fn kind(&self) -> ScheduleKind<T> {
        self.kind
    }

    pub fn r(&self) -> T {
        self.r
    }

    /// Steps taken so far.
    pub fn t(&self) -> usize {
        self.t
    }

    /// T_t = Σ_{s<t} η_s.
    pub fn t_sum(&self) -> T {
        self.t_sum
    }

    /// η̄_t = Σ_{s<t} e^{−r(T_t−T_s)/4} η_s².
    pub fn eta_bar(&self) -> T {
        self.eta_bar
    }

    /// The step size the next step will use.
    pub fn peek(&self) -> T {
        self.kind.eta_at(self.t)
    }

    /// Emits η_t and advances (t, T, η̄).
    pub fn advance(&mut self) -> T {
        let eta = self.peek();
        self.eta_bar = (-self.r * eta / cast::<T>(4.0)).exp() * (self.eta_bar + eta * eta);
        self.t_sum += eta;
        self.t += 1;
        eta
    }

    /// Burn-in index t₀ = ⌈c/η₀⌉ − 1; the capped-harmonic envelope (and the
    /// propositions' "t sufficiently large") applies from t ≥ t₀ + 1.
    pub fn burn_in(&self) -> usize {
        match self.kind {
            ScheduleKind::Constant { .. } => 0,
            ScheduleKind::CappedHarmonic { eta0, c }
            | ScheduleKind::CappedHarmonicShifted { eta0, c } => {
                let ratio = (c / eta0).to_f64().expect("finite");
                (ratio.ceil() as usize).saturating_sub(1)
            }
        }
    }
}

/// One PSGD step: x − ηP∇ℓ(x, z).
pub fn psgd_step<T: Scalar, L: SampleLoss<T>>(
    x: &[T],
    z: &[T],
    loss: &L,
    p: &SymmetricPd<T>,
    eta: T,
) -> Vec<T> {
    let mut g = vec![T::zero(); x.len()];
    loss.grad_into(x, z, &mut g);
    let pg = p.matvec(&g);
    x.iter().zip(&pg).map(|(xi, s)| *xi - eta * *s).collect()
}

/// State captured at a checkpoint: the iterate after `t` steps together with
/// the accumulators at that point and the step size about to be applied.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub t: usize,
    pub x: Vec<T>,
    pub eta_next: T,
    pub t_sum: T,
    pub eta_bar: T,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub x0: Vec<T>,
    pub final_x: Vec<T>,
    pub checkpoints: Vec<Checkpoint<T>>,
    /// Sampled dataset indices i_t (multipass only).
    pub index_log: Vec<usize>,
    pub seed: u64,
    pub trace: ScheduleTrace<T>,
}

/// Multipass PSGD over a fixed dataset, indices i.i.d. uniform with
/// replacement. Replaying the same (dataset, config, seed) reproduces the
/// trajectory bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn run_multipass<T: Scalar, L: SampleLoss<T>>(
    loss: &L,
    dataset: &Dataset<T>,
    p: &SymmetricPd<T>,
    schedule: ScheduleKind<T>,
    r: T,
    t_max: usize,
    seed: u64,
    checkpoint_stride: usize,
    x0: Option<&[T]>,
) -> Result<Trajectory<T>> {
    if dataset.is_empty() {
        return Err(LabError::validation("multipass PSGD needs a nonempty dataset"));
    }
    let d = loss.dim();
    let n = dataset.len();
    let mut trace = ScheduleTrace::new(schedule, r)?;
    let x0v: Vec<T> = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![T::zero(); d]);
    if x0v.len() != d {
        return Err(LabError::Dimension { expected: d, got: x0v.len() });
    }
    let stride = checkpoint_stride.max(1);
    let mut rng = Rng::new(seed);
    let mut x = x0v.clone();
    let mut g = vec![T::zero(); d];
    let mut pg = vec![T::zero(); d];
    let mut index_log = Vec::with_capacity(t_max);
    let mut checkpoints = Vec::new();
    for t in 0..=t_max {
        if t % stride == 0 || t == t_max {
            checkpoints.push(Checkpoint {
                t,
                x: x.clone(),
                eta_next: trace.peek(),
                t_sum: trace.t_sum(),
                eta_bar: trace.eta_bar(),
            });
        }
        if t == t_max {
            break;
        }
        let i = rng.next_index(n);
        index_log.push(i);
        loss.grad_into(&x, dataset.sample(i), &mut g);
        p.matrix().matvec_into(&g, &mut pg);
        let eta = trace.advance();
        for (xi, s) in x.iter_mut().zip(&pg) {
            *xi -= eta * *s;
        }
    }
    Ok(Trajectory { x0: x0v, final_x: x, checkpoints, index_log, seed, trace })
}

/// Single-pass PSGD: a fresh sample from the source at every step.
#[allow(clippy::too_many_arguments)]
pub fn run_single_pass<T: Scalar, M: SampleLoss<T> + SampleSource<T>>(
    model: &M,
    p: &SymmetricPd<T>,
    schedule: ScheduleKind<T>,
    r: T,
    t_max: usize,
    seed: u64,
    checkpoint_stride: usize,
    x0: Option<&[T]>,
) -> Result<Trajectory<T>> {
    let d = model.dim();
    let mut trace = ScheduleTrace::new(schedule, r)?;
    let x0v: Vec<T> = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![T::zero(); d]);
    if x0v.len() != d {
        return Err(LabError::Dimension { expected: d, got: x0v.len() });
    }
    let stride = checkpoint_stride.max(1);
    let mut rng = Rng::new(seed);
    let mut x = x0v.clone();
    let mut z = vec![T::zero(); model.sample_len()];
    let mut g = vec![T::zero(); d];
    let mut pg = vec![T::zero(); d];
    let mut checkpoints = Vec::new();
    for t in 0..=t_max {
        if t % stride == 0 || t == t_max {
            checkpoints.push(Checkpoint {
                t,
                x: x.clone(),
                eta_next: trace.peek(),
                t_sum: trace.t_sum(),
                eta_bar: trace.eta_bar(),
            });
        }
        if t == t_max {
            break;
        }
        model.sample_into(&mut rng, &mut z);
        model.grad_into(&x, &z, &mut g);
        p.matrix().matvec_into(&g, &mut pg);
        let eta = trace.advance();
        for (xi, s) in x.iter_mut().zip(&pg) {
            *xi -= eta * *s;
        }
    }
    Ok(Trajectory { x0: x0v, final_x: x, checkpoints, index_log: Vec::new(), seed, trace })
}

/// Which risk proposition's schedule to instantiate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PropositionVariant<T> {
    /// Geometry of P⁻¹ (θ = 1): η_t = min(1/(β λ_max(PH)), 8/(r(t+1))).
    Pinv,
    /// Geometry of H (θ = 0): η_t = min(C/(β λ_max(PH) κ(PH)), 8/(r(t+1))).
    Hgeom,
    /// Interpolated M_θ geometry.
    MTheta(T),
}

/// Builds the capped-harmonic schedule (η₀, c = 8/r) and the contraction
/// rate r the chosen proposition prescribes.
pub fn proposition_schedule<T: Scalar>(
    geom: &GeometrySpec<T>,
    prof: &PreconditionerProfile<T>,
    variant: PropositionVariant<T>,
) -> Result<(ScheduleKind<T>, T)> {
    let theta = match variant {
        PropositionVariant::Pinv => T::one(),
        PropositionVariant::Hgeom => T::zero(),
        PropositionVariant::MTheta(t) => {
            if t < T::zero() || t > T::one() {
                return Err(LabError::validation("theta must lie in [0, 1]"));
            }
            t
        }
    };
    let c_align = prof.alignment_at(geom, theta).ok_or_else(|| {
        LabError::validation(
            "preconditioner is not spectrally aligned at this theta; \
             use the Pinv variant, which admits every SPD preconditioner",
        )
    })?;
    let rate = contraction_rate(geom, prof, theta)
        .expect("alignment present implies a contraction rate");
    let k_eff = prof.kappa_ph().powf(T::one() - theta);
    let eta0 = c_align / (geom.beta() * prof.lambda_max_ph() * k_eff);
    let c = cast::<T>(8.0) / rate.r;
    Ok((ScheduleKind::CappedHarmonic { eta0, c }, rate.r))
}
