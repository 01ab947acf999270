//! Closed-form sample-complexity and pseudo-dimension bound evaluators,
//! plus empirical verifiers of the piecewise-structure (line scans of the
//! tree-size score) and region-counting (LT sign patterns) facts they rest
//! on.
//!
//! The big-O bounds carry an explicit caller-chosen leading constant `c0`
//! and are order estimates, not certified constants. Logarithms in the
//! bound evaluators are base 2; `sample_size` uses the natural log its
//! formula is stated with.

use crate::bnc::{f_cg, SolveBudget, SolvePolicy};
use crate::cuts::Multiplier;
use crate::error::{Error, Result};
use crate::ilp::{rat_to_f64, IlpInstance, NormBounds};
use crate::nn::{init_params, lt_hidden_pattern, NetworkArch};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    /// Score range bound B.
    pub b: f64,
    pub eps: f64,
    pub delta: f64,
    pub pdim: f64,
    /// Universal constant C, caller-supplied.
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSize {
    pub t: u64,
    /// Set when B/eps <= 1 forced the ln(B/eps) term to clamp at 0.
    pub ln_clamped: bool,
}

/// t = ceil(C * B^2/eps^2 * (pdim * ln(B/eps) + ln(1/delta))).
pub fn sample_size(spec: &SampleSpec) -> Result<SampleSize> {
    if spec.b <= 0.0 || spec.eps <= 0.0 || spec.pdim <= 0.0 || spec.c <= 0.0 {
        return Err(Error::InvalidArgument(
            "B, eps, pdim, C must be positive".into(),
        ));
    }
    if !(spec.delta > 0.0 && spec.delta < 1.0) {
        return Err(Error::InvalidArgument("delta must be in (0,1)".into()));
    }
    let ratio = spec.b / spec.eps;
    let ln_clamped = ratio <= 1.0;
    let ln_term = if ln_clamped { 0.0 } else { ratio.ln() };
    let raw = spec.c * ratio * ratio * (spec.pdim * ln_term + (1.0 / spec.delta).ln());
    Ok(SampleSize {
        t: raw.max(0.0).ceil() as u64,
        ln_clamped,
    })
}

/// Piecewise structure of the score as a function of the parameters:
/// at most `gamma_count` boundary polynomials of degree `gamma_deg`, with
/// polynomial pieces of degree `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PiecewiseSpec {
    pub gamma_count: u64,
    pub gamma_deg: u64,
    pub lambda: u64,
}

fn check_c0(c0: f64) -> Result<()> {
    if c0 <= 0.0 {
        return Err(Error::InvalidArgument("c0 must be positive".into()));
    }
    Ok(())
}

/// Order estimate c0 * W * log2(U * gamma_deg * gamma_count * (lambda+1))
/// for LT networks; gamma_deg is clamped to >= 1.
pub fn pdim_bound_lt(arch: &NetworkArch, pw: &PiecewiseSpec, c0: f64) -> Result<f64> {
    check_c0(c0)?;
    let w = arch.param_count() as f64;
    let u = arch.size_u() as f64;
    let inner = u * pw.gamma_deg.max(1) as f64 * pw.gamma_count as f64 * (pw.lambda + 1) as f64;
    Ok(c0 * w * inner.log2())
}

/// Order estimate c0 * (L * W * log2(U + l) + W * log2(gamma_deg *
/// gamma_count * (lambda+1))) for ReLU networks; l is the output width.
pub fn pdim_bound_relu(arch: &NetworkArch, pw: &PiecewiseSpec, c0: f64) -> Result<f64> {
    check_c0(c0)?;
    let w = arch.param_count() as f64;
    let u = arch.size_u() as f64;
    let l = arch.hidden_layers() as f64;
    let ell = arch.output_dim() as f64;
    let inner = pw.gamma_deg.max(1) as f64 * pw.gamma_count as f64 * (pw.lambda + 1) as f64;
    Ok(c0 * (l * w * (u + ell).log2() + w * inner.log2()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Lt,
    Relu,
}

/// Finite-class bound: lt -> c0 * W * log2(U * r); relu -> c0 * L * W *
/// log2(U + r), for a class of r candidate outputs.
pub fn pdim_bound_finite(arch: &NetworkArch, r: u64, c0: f64, kind: BoundKind) -> Result<f64> {
    check_c0(c0)?;
    if r < 1 {
        return Err(Error::InvalidArgument("r must be >= 1".into()));
    }
    let w = arch.param_count() as f64;
    let u = arch.size_u() as f64;
    Ok(match kind {
        BoundKind::Lt => c0 * w * (u * r as f64).log2(),
        BoundKind::Relu => c0 * arch.hidden_layers() as f64 * w * (u + r as f64).log2(),
    })
}

/// M = 2 (a + b + n), rounded up when the norms are fractional: the maximum
/// number of hyperplanes partitioning the multiplier space of one CG cut.
pub fn m_hyperplanes(norms: &NormBounds, n: usize) -> u64 {
    let total = 2.0 * (rat_to_f64(&norms.a_norm) + rat_to_f64(&norms.b_norm) + n as f64);
    total.ceil() as u64
}

/// Parameter dimension of a sequence of k CG cuts: m*k + k(k-1)/2.
pub fn cg_param_dim(m: usize, k: usize) -> usize {
    m * k + k * (k - 1) / 2
}

/// Evaluates the tree size at `samples` equally spaced multipliers on the
/// segment [a, b] and returns 1 + the number of consecutive value changes.
/// Tree sizes are integers, so values differ iff they differ exactly.
pub fn line_scan_pieces(
    inst: &IlpInstance,
    endpoint_a: &[f64],
    endpoint_b: &[f64],
    samples: usize,
    policy: &SolvePolicy,
    budget: &SolveBudget,
) -> Result<usize> {
    if samples < 2 {
        return Err(Error::InvalidArgument("samples must be >= 2".into()));
    }
    if endpoint_a.len() != inst.num_rows || endpoint_b.len() != inst.num_rows {
        return Err(Error::DimensionMismatch(
            "segment endpoints must have one entry per row".into(),
        ));
    }
    let sizes: Vec<usize> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let t = s as f64 / (samples - 1) as f64;
            let u: Vec<f64> = endpoint_a
                .iter()
                .zip(endpoint_b)
                .map(|(a, b)| (a + t * (b - a)).clamp(0.0, 1.0))
                .collect();
            f_cg(inst, &Multiplier::new(u)?, policy, budget)
        })
        .collect::<Result<_>>()?;
    Ok(1 + sizes.windows(2).filter(|w| w[0] != w[1]).count())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignPatternReport {
    /// Distinct tuples of hidden-layer sign patterns across the inputs; a
    /// sampling lower bound on the true region count.
    pub distinct: usize,
    /// Closed-form region bound (e*t*U/W')^W'.
    pub bound: f64,
}

/// Samples `trials` random parameter vectors for an LT architecture and
/// counts the distinct tuples of hidden-layer output patterns over the
/// given inputs, alongside the closed-form bound.
pub fn count_sign_patterns(
    arch: &NetworkArch,
    inputs: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<SignPatternReport> {
    if trials < 1 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("need at least one input".into()));
    }
    let t = inputs.len() as f64;
    let u = arch.size_u() as f64;
    let w_prime = arch.hidden_param_count() as f64;
    let bound = (std::f64::consts::E * t * u / w_prime).powf(w_prime);

    let mut seen = std::collections::HashSet::new();
    for trial in 0..trials {
        let params = init_params(arch, seed.wrapping_add(trial as u64));
        let mut tuple = Vec::with_capacity(inputs.len() * arch.size_u());
        for x in inputs {
            tuple.extend(lt_hidden_pattern(arch, &params, x)?);
        }
        seen.insert(tuple);
    }
    Ok(SignPatternReport {
        distinct: seen.len(),
        bound,
    })
}
