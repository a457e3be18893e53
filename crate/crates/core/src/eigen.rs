//! Largest-algebraic eigenpair of the block-tridiagonal operator.
//!
//! The default path runs Lanczos with full reorthogonalization and thick
//! restarts on `(σI - H)⁻¹`, where a block Cholesky of `σI - H` both applies
//! the inverse and certifies that `σ` clears the spectrum. Plain Lanczos on
//! `H` is kept as a method of its own and as the fallback.
//! Shifted power iteration and a dense solver are available for cross-checks,
//! and the dense solver doubles as the fallback when Lanczos stalls on a
//! problem small enough to assemble.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, StpcaError};
use crate::operator::{BlockTridiagOperator, ShiftedFactor, DENSE_LIMIT};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

const START_SEED: u64 = 0x5eed_0f_57_9ca;
const DEFAULT_KRYLOV_DIM: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Lanczos on `(σI - H)⁻¹` with a certified shift `σ`.
    ShiftInvert,
    Lanczos,
    ShiftedPower,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: EigenMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_dim: usize,
    /// Estimate the second eigenvalue to flag a repeated top eigenvalue.
    pub check_multiplicity: bool,
    /// Retry densely when the iterative path fails and `nL <= DENSE_LIMIT`.
    pub dense_fallback: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::ShiftInvert,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            krylov_dim: DEFAULT_KRYLOV_DIM,
            check_multiplicity: true,
            dense_fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub alpha: f64,
    /// Unit vector; first entry with magnitude above 1e-12 is positive.
    pub vector: Vec<f64>,
    /// Operator applications (iterative paths) or 0 (dense).
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub method: EigenMethod,
    /// Best available estimate of the second-largest eigenvalue.
    pub second: Option<f64>,
    /// Top two eigenvalues within `1e-10·|alpha|` of each other.
    pub degenerate: bool,
}

/// Dominant eigenpair with default method and the given tolerance and iteration budget.
pub fn dominant_eigenpair(op: &BlockTridiagOperator, tol: f64, max_iter: usize) -> Result<EigenPair> {
    dominant_eigenpair_with(
        op,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

pub fn dominant_eigenpair_with(op: &BlockTridiagOperator, opts: &SolverOptions) -> Result<EigenPair> {
    if !(opts.tol > 0.0) {
        return Err(StpcaError::Parameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if op.dim() == 0 {
        return Err(StpcaError::Shape("operator has dimension 0".into()));
    }
    let attempt = match opts.method {
        EigenMethod::ShiftInvert => shift_invert(op, opts),
        EigenMethod::Lanczos => lanczos(op, opts),
        EigenMethod::ShiftedPower => shifted_power(op, opts),
        EigenMethod::Dense => dense(op, opts.tol),
    };
    let mut pair = match attempt {
        Err(StpcaError::Convergence { .. })
            if opts.dense_fallback
                && opts.method != EigenMethod::Dense
                && op.dim() <= DENSE_LIMIT =>
        {
            dense(op, opts.tol)?
        }
        other => other?,
    };
    if opts.check_multiplicity && pair.second.is_none() && op.dim() > 1 {
        pair.second = second_eigenvalue(op, &pair.vector, &[], opts);
    }
    pair.degenerate = pair
        .second
        .is_some_and(|s| pair.alpha - s < 1e-10 * pair.alpha.abs().max(f64::MIN_POSITIVE));
    Ok(pair)
}

/// Flips `v` so that its first entry with magnitude above `1e-12` is positive.
pub fn fix_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn residual_threshold(op: &BlockTridiagOperator, tol: f64, alpha: f64) -> f64 {
    // Below ~eps·|H| the residual is rounding noise.
    let floor = 1e3 * f64::EPSILON * op.gershgorin_bound();
    (tol * alpha.abs().max(1.0)).max(floor)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &mut [f64], s: f64) {
    a.iter_mut().for_each(|x| *x *= s);
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for q in basis {
            let c = dot(w, q);
            axpy(w, -c, q);
        }
    }
}

fn residual_norm(op: &BlockTridiagOperator, v: &[f64], alpha: f64, hv: &mut [f64]) -> Result<f64> {
    op.apply_into(v, hv)?;
    Ok(hv
        .iter()
        .zip(v)
        .map(|(h, x)| (h - alpha * x).powi(2))
        .sum::<f64>()
        .sqrt())
}

fn random_start(dim: usize, deflate: &[Vec<f64>]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthogonalize(&mut v, deflate);
    let nv = norm(&v);
    scale(&mut v, 1.0 / nv);
    v
}

/// Symmetric operator driven by Lanczos: `H` itself or `(σI - H)⁻¹`.
trait SymOp {
    fn dim(&self) -> usize;
    fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()>;
}

impl SymOp for BlockTridiagOperator {
    fn dim(&self) -> usize {
        BlockTridiagOperator::dim(self)
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        BlockTridiagOperator::apply_into(self, v, out)
    }
}

impl SymOp for ShiftedFactor {
    fn dim(&self) -> usize {
        ShiftedFactor::dim(self)
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.solve_into(v, out)
    }
}

struct Ritz {
    /// Ritz value of the driven operator.
    theta: f64,
    /// Eigenvalue estimate for `H`.
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
    /// Next Ritz vectors of the final subspace, for warm-starting a deflated run.
    trailing: Vec<Vec<f64>>,
}

const WARM_VECTORS: usize = 8;

/// Orthonormal search basis `V` (columns) with `A·V` cached and the projection `V'AV`.
struct Subspace {
    v: DMatrix<f64>,
    hv: DMatrix<f64>,
    t: DMatrix<f64>,
    len: usize,
    scratch: DVector<f64>,
}

impl Subspace {
    fn new(dim: usize, capacity: usize) -> Self {
        Self {
            v: DMatrix::zeros(dim, capacity),
            hv: DMatrix::zeros(dim, capacity),
            t: DMatrix::zeros(capacity, capacity),
            len: 0,
            scratch: DVector::zeros(capacity),
        }
    }

    /// Appends `q` (unit, orthogonal to the basis) and returns `A q` with the
    /// basis projected out. The first-pass coefficients are the new column of
    /// the projection; a second pass runs only when cancellation was severe.
    fn push(&mut self, op: &dyn SymOp, q: &DVector<f64>) -> Result<DVector<f64>> {
        let j = self.len;
        self.v.set_column(j, q);
        let dim = self.v.nrows();
        op.apply_into(q.as_slice(), &mut self.hv.as_mut_slice()[j * dim..(j + 1) * dim])?;
        self.len += 1;
        let mut w = self.hv.column(j).into_owned();
        let before = w.norm();
        let basis = self.v.columns(0, j + 1);
        let mut c = self.scratch.rows_mut(0, j + 1);
        c.gemv_tr(1.0, &basis, &w, 0.0);
        w.gemv(-1.0, &basis, &c, 1.0);
        for i in 0..=j {
            self.t[(i, j)] = self.scratch[i];
            self.t[(j, i)] = self.scratch[i];
        }
        if w.norm() < FRAC_1_SQRT_2 * before {
            self.orthogonalize(&mut w);
        }
        Ok(w)
    }

    /// One classical Gram-Schmidt pass against the basis.
    fn orthogonalize(&mut self, w: &mut DVector<f64>) {
        let k = self.len;
        if k == 0 {
            return;
        }
        let basis = self.v.columns(0, k);
        let mut c = self.scratch.rows_mut(0, k);
        c.gemv_tr(1.0, &basis, &*w, 0.0);
        w.gemv(-1.0, &basis, &c, 1.0);
    }

    /// Rayleigh-Ritz pairs of the current projection, largest first.
    fn ritz(&self) -> (Vec<f64>, DMatrix<f64>) {
        let k = self.len;
        let eig = SymmetricEigen::new(self.t.view((0, 0), (k, k)).into_owned());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    /// `(V y, A V y)` for projected coordinates `y`.
    fn lift(&self, y: nalgebra::DVectorView<f64>) -> (DVector<f64>, DVector<f64>) {
        let k = self.len;
        (self.v.columns(0, k) * y, self.hv.columns(0, k) * y)
    }

    /// Replaces the basis by the leading `keep` Ritz vectors.
    fn restart(&mut self, values: &[f64], vectors: &DMatrix<f64>, keep: usize) {
        let k = self.len;
        let s = vectors.view((0, 0), (k, keep));
        let v = self.v.columns(0, k) * s;
        let hv = self.hv.columns(0, k) * s;
        self.v.columns_mut(0, keep).copy_from(&v);
        self.hv.columns_mut(0, keep).copy_from(&hv);
        self.t.fill(0.0);
        for (i, &theta) in values.iter().take(keep).enumerate() {
            self.t[(i, i)] = theta;
        }
        self.len = keep;
    }
}

fn deflate_against(w: &mut DVector<f64>, deflate: &[Vec<f64>]) {
    orthogonalize(w.as_mut_slice(), deflate);
}

/// Verdict on a Ritz pair, in terms of `H`.
struct Judgement {
    value: f64,
    residual: f64,
    converged: bool,
    /// Replacement for the Ritz vector, when the judge refined it.
    refined: Option<DVector<f64>>,
}

/// Judges `(θ, x, A x)` for a unit Ritz vector `x`.
type Judge<'a> = dyn FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<Judgement> + 'a;

/// Convergence test when the driven operator is `H` itself.
fn plain_judge(op: &BlockTridiagOperator, tol: f64) -> impl FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<Judgement> + '_ {
    move |theta, x, ax| {
        let residual = (ax - x * theta).norm();
        Ok(Judgement {
            value: theta,
            residual,
            converged: residual <= residual_threshold(op, tol, theta),
            refined: None,
        })
    }
}

/// Convergence test for a Ritz vector `x` of `(σI - H)⁻¹`. The judged vector
/// is the cached `(σI - H)⁻¹ x`, normalized: one more application damps the
/// far end of the spectrum, which the residual against `H` weights by
/// `|σ - λ_j|`. Rayleigh quotient and residual are recomputed against `H`.
fn inverse_judge<'a>(
    op: &'a BlockTridiagOperator,
    tol: f64,
    deflate: &'a [Vec<f64>],
) -> impl FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<Judgement> + 'a {
    let mut hx = vec![0.0; op.dim()];
    move |_, _, ax| {
        let mut x = ax.clone();
        deflate_against(&mut x, deflate);
        x /= x.norm();
        op.apply_into(x.as_slice(), &mut hx)?;
        let value = dot(x.as_slice(), &hx);
        let residual = hx
            .iter()
            .zip(x.iter())
            .map(|(h, v)| (h - value * v).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(Judgement {
            value,
            residual,
            converged: residual <= residual_threshold(op, tol, value),
            refined: Some(x),
        })
    }
}

/// Where a Lanczos run starts and how often it looks at its Ritz pairs.
struct Launch<'a> {
    deflate: &'a [Vec<f64>],
    warm: &'a [Vec<f64>],
    /// Starting direction; a fixed pseudo-random vector when absent.
    start: Option<&'a [f64]>,
    /// Ritz pairs are judged every `check_every` basis vectors and at each restart.
    check_every: usize,
}

impl Launch<'_> {
    fn cold() -> Self {
        Launch {
            deflate: &[],
            warm: &[],
            start: None,
            check_every: usize::MAX,
        }
    }
}

/// Thick-restart Lanczos on the complement of `launch.deflate`. With full
/// reorthogonalization the basis stays orthonormal, so the projection is
/// formed explicitly and the leading Ritz vectors survive each restart.
fn lanczos_ritz(op: &dyn SymOp, opts: &SolverOptions, launch: &Launch, judge: &mut Judge) -> Result<Ritz> {
    let deflate = launch.deflate;
    let dim = op.dim();
    let free = dim - deflate.len();
    let krylov = opts.krylov_dim.max(2).min(free.max(1));
    let keep = (krylov / 2).max(1);
    let mut space = Subspace::new(dim, krylov);
    let mut iterations = 0usize;
    for u in launch.warm.iter().take(krylov - 1) {
        let mut q = DVector::from_column_slice(u);
        deflate_against(&mut q, deflate);
        space.orthogonalize(&mut q);
        space.orthogonalize(&mut q);
        let nq = q.norm();
        if nq > 1e-8 {
            space.push(op, &(q / nq))?;
            iterations += 1;
        }
    }
    // Without an explicit start, the random direction keeps the search from
    // inheriting blind spots of `warm`.
    let mut next = match launch.start {
        Some(s) => {
            let mut v = DVector::from_column_slice(s);
            deflate_against(&mut v, deflate);
            v
        }
        None => DVector::from_vec(random_start(dim, deflate)),
    };
    space.orthogonalize(&mut next);
    space.orthogonalize(&mut next);
    let nn = next.norm();
    next = if nn > 1e-8 {
        next / nn
    } else {
        DVector::from_vec(random_start(dim, deflate))
    };
    let mut norm_scale = 0.0f64;
    let mut best = Ritz {
        theta: f64::NEG_INFINITY,
        value: f64::NEG_INFINITY,
        vector: next.as_slice().to_vec(),
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
        trailing: Vec::new(),
    };
    let check_every = launch.check_every.max(1);

    loop {
        let mut exhausted = false;
        while space.len < krylov && iterations < opts.max_iter {
            let mut w = space.push(op, &next)?;
            iterations += 1;
            let last = space.len - 1;
            norm_scale = norm_scale.max(space.t[(last, last)].abs());
            if !deflate.is_empty() {
                deflate_against(&mut w, deflate);
                space.orthogonalize(&mut w);
            }
            next = w;
            let b = next.norm();
            norm_scale = norm_scale.max(b);
            if b <= 64.0 * f64::EPSILON * norm_scale.max(f64::MIN_POSITIVE) {
                exhausted = true;
                break;
            }
            next /= b;
            if space.len % check_every == 0 && space.len < krylov {
                break;
            }
        }

        let (values, vectors) = space.ritz();
        let theta = values[0];
        let (mut x, mut ax) = space.lift(vectors.column(0));
        let nx = x.norm();
        x /= nx;
        ax /= nx;
        let verdict = judge(theta, &x, &ax)?;
        if verdict.converged || theta >= best.theta {
            let vector = verdict.refined.as_ref().unwrap_or(&x);
            best = Ritz {
                theta,
                value: verdict.value,
                vector: vector.as_slice().to_vec(),
                residual: verdict.residual,
                iterations,
                converged: verdict.converged,
                trailing: Vec::new(),
            };
        }
        if verdict.converged || exhausted || iterations >= opts.max_iter {
            best.iterations = iterations;
            best.trailing = (1..space.len.min(1 + WARM_VECTORS))
                .map(|c| space.lift(vectors.column(c)).0.as_slice().to_vec())
                .collect();
            return Ok(best);
        }
        if space.len < krylov {
            continue;
        }
        // All Ritz residuals are parallel to the pending direction, so the
        // kept vectors plus `next` still span a Krylov space.
        space.restart(&values, &vectors, keep.min(space.len - 1));
        deflate_against(&mut next, deflate);
        space.orthogonalize(&mut next);
        space.orthogonalize(&mut next);
        let nn = next.norm();
        if nn == 0.0 {
            best.iterations = iterations;
            return Ok(best);
        }
        next /= nn;
    }
}

fn finish(
    op: &BlockTridiagOperator,
    opts: &SolverOptions,
    ritz: Ritz,
    method: EigenMethod,
    second: impl FnOnce(&[f64], &[Vec<f64>]) -> Option<f64>,
) -> Result<EigenPair> {
    if !ritz.converged {
        return Err(StpcaError::Convergence {
            iterations: ritz.iterations,
            residual: ritz.residual,
        });
    }
    let mut vector = ritz.vector;
    fix_sign(&mut vector);
    let second = (opts.check_multiplicity && op.dim() > 1)
        .then(|| second(&vector, &ritz.trailing))
        .flatten();
    Ok(EigenPair {
        alpha: ritz.value,
        vector,
        iterations: ritz.iterations,
        residual: ritz.residual,
        converged: true,
        method,
        second,
        degenerate: false,
    })
}

fn lanczos(op: &BlockTridiagOperator, opts: &SolverOptions) -> Result<EigenPair> {
    let ritz = lanczos_ritz(op, opts, &Launch::cold(), &mut plain_judge(op, opts.tol))?;
    finish(op, opts, ritz, EigenMethod::Lanczos, |top, warm| {
        second_eigenvalue(op, top, warm, opts)
    })
}

// Ritz values err quadratically in the residual, so a looser tolerance still
// pins the value.
fn loose(opts: &SolverOptions) -> SolverOptions {
    SolverOptions {
        tol: opts.tol.sqrt().max(opts.tol),
        ..*opts
    }
}

fn second_eigenvalue(
    op: &BlockTridiagOperator,
    top: &[f64],
    warm: &[Vec<f64>],
    opts: &SolverOptions,
) -> Option<f64> {
    let deflate = [top.to_vec()];
    let launch = Launch {
        deflate: &deflate,
        warm,
        ..Launch::cold()
    };
    let loose = loose(opts);
    lanczos_ritz(op, &loose, &launch, &mut plain_judge(op, loose.tol))
        .ok()
        .map(|r| r.value)
}

/// Smallest shift `θ + δ·4^k` with `σI - H` positive definite, so `σ` lies
/// above every eigenvalue.
fn certified_shift(op: &BlockTridiagOperator, theta: f64, delta: f64) -> Option<ShiftedFactor> {
    let ceiling = 2.0 * op.gershgorin_bound().max(theta.abs()) + 1.0;
    let mut delta = delta;
    loop {
        let sigma = theta + delta;
        if let Some(f) = op.shifted_cholesky(sigma) {
            return Some(f);
        }
        if sigma > ceiling {
            return None;
        }
        delta *= 4.0;
    }
}

/// Lanczos on `(σI - H)⁻¹`. A short run on `H` gives a Ritz value `θ` below
/// the top eigenvalue; a block Cholesky of `σI - H` certifies `σ` above it.
/// The inverse maps the top of the spectrum to a well-separated extreme, so
/// few solves are needed. Falls back to plain Lanczos when no shift works.
fn shift_invert(op: &BlockTridiagOperator, opts: &SolverOptions) -> Result<EigenPair> {
    let rough_opts = SolverOptions {
        max_iter: opts.krylov_dim.max(2).min(opts.max_iter),
        ..*opts
    };
    let rough = lanczos_ritz(op, &rough_opts, &Launch::cold(), &mut plain_judge(op, opts.tol))?;
    if rough.converged {
        return finish(op, opts, rough, EigenMethod::ShiftInvert, |t, w| {
            second_eigenvalue(op, t, w, opts)
        });
    }
    // Cholesky succeeds up to rounding of order eps·|H| below the top eigenvalue.
    let margin = 1e-10 * op.gershgorin_bound().max(f64::MIN_POSITIVE);
    let Some(factor) = certified_shift(op, rough.value, rough.residual.max(margin)) else {
        return lanczos(op, opts);
    };
    let launch = Launch {
        start: Some(&rough.vector),
        check_every: 4,
        ..Launch::cold()
    };
    let budget = SolverOptions {
        max_iter: opts.max_iter.saturating_sub(rough.iterations).max(1),
        ..*opts
    };
    let mut ritz = lanczos_ritz(&factor, &budget, &launch, &mut inverse_judge(op, opts.tol, &[]))?;
    // A converged pair below the rough lower bound means the shift fell short.
    let slack = residual_threshold(op, opts.tol, rough.value);
    if !ritz.converged || ritz.theta <= 0.0 || ritz.value < rough.value - slack {
        return lanczos(op, opts);
    }
    ritz.iterations += rough.iterations;
    let alpha = ritz.value;
    finish(op, opts, ritz, EigenMethod::ShiftInvert, |t, w| {
        second_eigenvalue_inverse(op, alpha, t, w.first(), opts)
    })
}

/// Second eigenvalue through a fresh factor. The shift used for the top pair
/// sits so close to `alpha` that rounding at the scale of `1/(σ - alpha)`
/// would swamp the deflated problem, so `σ` moves about one gap higher, the
/// gap being guessed from the Rayleigh quotient of `hint`.
///
/// The run starts cold: a few rough vectors fixed in the basis break the
/// Krylov structure and slow convergence badly.
fn second_eigenvalue_inverse(
    op: &BlockTridiagOperator,
    alpha: f64,
    top: &[f64],
    hint: Option<&Vec<f64>>,
    opts: &SolverOptions,
) -> Option<f64> {
    let guess = match hint {
        Some(u) => {
            let hu = op.apply(u).ok()?;
            dot(u, &hu) / dot(u, u)
        }
        None => alpha,
    };
    let margin = 1e-10 * op.gershgorin_bound();
    let sigma = alpha + (alpha - guess).max(1e-3 * alpha.abs()).max(margin);
    let Some(factor) = op.shifted_cholesky(sigma) else {
        return second_eigenvalue(op, top, &[], opts);
    };
    let deflate = [top.to_vec()];
    let launch = Launch {
        deflate: &deflate,
        check_every: 4,
        ..Launch::cold()
    };
    let loose = loose(opts);
    let mut judge = inverse_judge(op, loose.tol, &deflate);
    let second = lanczos_ritz(&factor, &loose, &launch, &mut judge).ok().map(|r| r.value);
    second
}

fn shifted_power(op: &BlockTridiagOperator, opts: &SolverOptions) -> Result<EigenPair> {
    let dim = op.dim();
    let shift = op.gershgorin_bound();
    let mut v = random_start(dim, &[]);
    let mut hv = vec![0.0; dim];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        op.apply_into(&v, &mut hv)?;
        let alpha = dot(&v, &hv);
        residual = hv
            .iter()
            .zip(&v)
            .map(|(h, x)| (h - alpha * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= residual_threshold(op, opts.tol, alpha) {
            fix_sign(&mut v);
            return Ok(EigenPair {
                alpha,
                vector: v,
                iterations: it,
                residual,
                converged: true,
                method: EigenMethod::ShiftedPower,
                second: None,
                degenerate: false,
            });
        }
        // (H + sI) v
        for (h, x) in hv.iter_mut().zip(&v) {
            *h += shift * x;
        }
        let nh = norm(&hv);
        if nh == 0.0 {
            break;
        }
        v.iter_mut().zip(&hv).for_each(|(x, h)| *x = h / nh);
    }
    Err(StpcaError::Convergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn dense(op: &BlockTridiagOperator, tol: f64) -> Result<EigenPair> {
    let h = op.to_dense()?;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let alpha = eig.eigenvalues[order[0]];
    let mut vector: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let nv = norm(&vector);
    scale(&mut vector, 1.0 / nv);
    fix_sign(&mut vector);
    let mut hv = vec![0.0; op.dim()];
    let residual = residual_norm(op, &vector, alpha, &mut hv)?;
    Ok(EigenPair {
        alpha,
        vector,
        iterations: 0,
        residual,
        converged: residual <= residual_threshold(op, tol, alpha),
        method: EigenMethod::Dense,
        second: order.get(1).map(|&i| eig.eigenvalues[i]),
        degenerate: false,
    })
}
