//! Chvátal–Gomory and Gomory mixed-integer cut construction, validity
//! checking by integer-point enumeration, and the classical
//! efficacy/parallelism scoring baseline.

use crate::error::{Error, Result};
use crate::ilp::{rat_to_big, IlpInstance, Rat};
use crate::lp::{fractional_tableau_rows, solve_lp, LinRow, LpProblem, LpStatus, TableauRow};
use crate::{INT_TOL, SNAP_TOL};
use num::bigint::BigInt;
use num::{BigRational, Integer, One, Signed, ToPrimitive, Zero};

/// CG multiplier `u` with every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier(Vec<f64>);

impl Multiplier {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "multiplier entries must lie in [0,1]".into(),
            ));
        }
        Ok(Multiplier(u))
    }

    pub fn zeros(m: usize) -> Self {
        Multiplier(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Multipliers for a sequence of `k` CG cuts; block `i` has `m + i - 1`
/// entries, one per original row plus one per previously added cut.
#[derive(Debug, Clone, PartialEq)]
pub struct CgSequenceParams {
    pub blocks: Vec<Vec<f64>>,
}

impl CgSequenceParams {
    pub fn new(blocks: Vec<Vec<f64>>) -> Self {
        CgSequenceParams { blocks }
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    /// Total parameter count `m*k + k(k-1)/2`.
    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Cg(Vec<f64>),
    Gmi(usize),
    Pool(usize),
}

/// One linear inequality `alpha . x <= beta` valid for the integer hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub alpha: Vec<BigRational>,
    pub beta: BigRational,
    pub provenance: Provenance,
}

impl Cut {
    pub fn is_vacuous(&self) -> bool {
        self.alpha.iter().all(|a| a.is_zero())
    }

    pub fn to_row(&self) -> LinRow {
        LinRow::new(self.alpha.clone(), self.beta.clone())
    }

    /// Trace-log form: `cut: a1 a2 ... an <= beta # provenance`.
    pub fn render(&self) -> String {
        let coeffs: Vec<String> = self.alpha.iter().map(|a| a.to_string()).collect();
        let prov = match &self.provenance {
            Provenance::Cg(u) => format!("cg {u:?}"),
            Provenance::Gmi(row) => format!("gmi row {row}"),
            Provenance::Pool(i) => format!("pool {i}"),
        };
        format!("cut: {} <= {} # {}", coeffs.join(" "), self.beta, prov)
    }

    /// Positive-rescaling normal form: integer coefficients with gcd 1.
    pub fn normal_form(&self) -> (Vec<BigInt>, BigInt) {
        let mut denom_lcm = BigInt::one();
        for v in self.alpha.iter().chain(std::iter::once(&self.beta)) {
            denom_lcm = denom_lcm.lcm(v.denom());
        }
        let ints: Vec<BigInt> = self
            .alpha
            .iter()
            .map(|v| (v * BigRational::from(denom_lcm.clone())).to_integer())
            .collect();
        let beta_int = (&self.beta * BigRational::from(denom_lcm.clone())).to_integer();
        let mut g = beta_int.abs();
        for v in &ints {
            g = g.gcd(v);
        }
        if g.is_zero() {
            return (ints, beta_int);
        }
        (
            ints.iter().map(|v| v / &g).collect(),
            beta_int / &g,
        )
    }
}

fn snap_floor(v: f64, snap_tol: f64) -> i64 {
    let r = v.round();
    if (v - r).abs() <= snap_tol {
        r as i64
    } else {
        v.floor() as i64
    }
}

fn cg_from_rows(rows: &[(Vec<f64>, f64)], u: &[f64], snap_tol: f64) -> (Vec<i64>, i64) {
    let n = rows[0].0.len();
    let alpha: Vec<i64> = (0..n)
        .map(|j| {
            let s: f64 = u.iter().zip(rows).map(|(ui, (row, _))| ui * row[j]).sum();
            snap_floor(s, snap_tol)
        })
        .collect();
    let beta = {
        let s: f64 = u.iter().zip(rows).map(|(ui, (_, rhs))| ui * rhs).sum();
        snap_floor(s, snap_tol)
    };
    (alpha, beta)
}

fn instance_rows_f64(inst: &IlpInstance) -> Vec<(Vec<f64>, f64)> {
    inst.a
        .iter()
        .zip(&inst.b)
        .map(|(row, rhs)| {
            (
                row.iter().map(crate::ilp::rat_to_f64).collect(),
                crate::ilp::rat_to_f64(rhs),
            )
        })
        .collect()
}

/// The CG cut `floor(u^T A) x <= floor(u^T b)` with a snap-to-integer guard
/// applied before each floor.
pub fn cg_cut(inst: &IlpInstance, u: &Multiplier) -> Result<Cut> {
    cg_cut_with_snap(inst, u, SNAP_TOL)
}

/// Same as [`cg_cut`] with an explicit snap tolerance (exposed so the guard
/// itself can be fault-tested).
pub fn cg_cut_with_snap(inst: &IlpInstance, u: &Multiplier, snap_tol: f64) -> Result<Cut> {
    if u.len() != inst.num_rows {
        return Err(Error::DimensionMismatch(format!(
            "multiplier has {} entries, instance has {} rows",
            u.len(),
            inst.num_rows
        )));
    }
    let rows = instance_rows_f64(inst);
    let (alpha, beta) = cg_from_rows(&rows, u.as_slice(), snap_tol);
    Ok(Cut {
        alpha: alpha.into_iter().map(|v| BigRational::from(BigInt::from(v))).collect(),
        beta: BigRational::from(BigInt::from(beta)),
        provenance: Provenance::Cg(u.as_slice().to_vec()),
    })
}

/// Sequence of `k` CG cuts; cut `i` aggregates the original rows plus cuts
/// `1..i-1` with block `i`'s multipliers.
pub fn cg_cut_sequence(inst: &IlpInstance, params: &CgSequenceParams) -> Result<Vec<Cut>> {
    let m = inst.num_rows;
    let mut rows = instance_rows_f64(inst);
    let mut cuts = Vec::with_capacity(params.k());
    for (i, block) in params.blocks.iter().enumerate() {
        if block.len() != m + i {
            return Err(Error::DimensionMismatch(format!(
                "block {} has {} multipliers, expected {}",
                i,
                block.len(),
                m + i
            )));
        }
        if block.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "sequence multipliers must lie in [0,1]".into(),
            ));
        }
        let (alpha, beta) = cg_from_rows(&rows, block, SNAP_TOL);
        rows.push((alpha.iter().map(|&v| v as f64).collect(), beta as f64));
        cuts.push(Cut {
            alpha: alpha
                .into_iter()
                .map(|v| BigRational::from(BigInt::from(v)))
                .collect(),
            beta: BigRational::from(BigInt::from(beta)),
            provenance: Provenance::Cg(block.clone()),
        });
    }
    Ok(cuts)
}

fn frac(v: &BigRational) -> BigRational {
    v - v.floor()
}

/// GMI cut from a fractional tableau row, with slack variables substituted
/// out so the cut lives in the original `x`-space.
pub fn gmi_cut(p: &LpProblem, row: &TableauRow) -> Result<Cut> {
    let f0 = frac(&row.exact.rhs);
    let f0_f = f0.to_f64().unwrap();
    if f0_f <= INT_TOL || f0_f >= 1.0 - INT_TOL {
        return Err(Error::NearIntegralRow(row.rhs));
    }
    let n = p.num_structural();
    let mt = p.num_rows();
    let one = BigRational::one();
    let one_minus_f0 = &one - &f0;

    // Coefficients of the >=1 form over structural (g) and slack (h) columns.
    let mut g = vec![BigRational::zero(); n];
    let mut h = vec![BigRational::zero(); mt];
    let basic: std::collections::HashSet<usize> = {
        // columns with a unit coefficient in this row other than the basic
        // var still get treated as nonbasic; only the row's own basic
        // variable is excluded from the cut body.
        std::iter::once(row.basic_var).collect()
    };
    for j in 0..n + mt {
        if basic.contains(&j) {
            continue;
        }
        let a = &row.exact.coeffs[j];
        if a.is_zero() {
            continue;
        }
        let integral = if j < n {
            true
        } else {
            let (_, _, integral) = p.row_exact(j - n);
            integral
        };
        let coef = if integral {
            let fj = frac(a);
            if fj <= f0 {
                &fj / &f0
            } else {
                (&one - &fj) / &one_minus_f0
            }
        } else if a.is_positive() {
            a / &f0
        } else {
            -a / &one_minus_f0
        };
        if j < n {
            g[j] = coef;
        } else {
            h[j - n] = coef;
        }
    }

    // Substitute s_i = b_i - A_i x and flip to <= form.
    let mut alpha = vec![BigRational::zero(); n];
    let mut beta = -one;
    for i in 0..mt {
        if h[i].is_zero() {
            continue;
        }
        let (coeffs, rhs, _) = p.row_exact(i);
        for j in 0..n {
            alpha[j] += &h[i] * &coeffs[j];
        }
        beta += &h[i] * rhs;
    }
    for j in 0..n {
        alpha[j] -= &g[j];
    }
    Ok(Cut {
        alpha,
        beta,
        provenance: Provenance::Gmi(row.basic_var),
    })
}

/// Largest coordinate box certain to contain all feasible points of a
/// generated (all-positive-row) instance; `None` if some variable is not
/// bounded by any row.
pub fn natural_box_bound(inst: &IlpInstance) -> Option<u64> {
    let mut best = 0u64;
    for j in 0..inst.num_cols {
        let mut var_bound: Option<u64> = None;
        for i in 0..inst.num_rows {
            let a = inst.a[i][j];
            if a > Rat::zero() && inst.b[i] >= Rat::zero() {
                let bound = (inst.b[i] / a).floor();
                let bound = (*bound.numer()).max(0) as u64;
                var_bound = Some(var_bound.map_or(bound, |v| v.min(bound)));
            }
        }
        best = best.max(var_bound?);
    }
    Some(best)
}

/// True iff every integer feasible point in `{0..box_bound}^n` satisfies the
/// cut; enumeration is capped at 10^7 candidates.
pub fn cut_is_valid(inst: &IlpInstance, cut: &Cut, box_bound: u64) -> Result<bool> {
    let n = inst.num_cols;
    let candidates = (box_bound as u128 + 1).checked_pow(n as u32);
    match candidates {
        Some(c) if c <= 10_000_000 => {}
        Some(c) => return Err(Error::EnumerationBudget(c)),
        None => return Err(Error::EnumerationBudget(u128::MAX)),
    }
    let a_big: Vec<Vec<BigRational>> = inst
        .a
        .iter()
        .map(|row| row.iter().map(rat_to_big).collect())
        .collect();
    let b_big: Vec<BigRational> = inst.b.iter().map(rat_to_big).collect();
    let mut x = vec![0u64; n];
    loop {
        let feasible = a_big.iter().zip(&b_big).all(|(row, rhs)| {
            let lhs = row
                .iter()
                .zip(&x)
                .fold(BigRational::zero(), |acc, (a, &v)| {
                    acc + a * BigRational::from(BigInt::from(v))
                });
            lhs <= *rhs
        });
        if feasible {
            let lhs = cut
                .alpha
                .iter()
                .zip(&x)
                .fold(BigRational::zero(), |acc, (a, &v)| {
                    acc + a * BigRational::from(BigInt::from(v))
                });
            if lhs > cut.beta {
                return Ok(false);
            }
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(true);
            }
            if x[pos] < box_bound {
                x[pos] += 1;
                break;
            }
            x[pos] = 0;
            pos += 1;
        }
    }
}

/// Signed distance `(alpha . x* - beta) / ||alpha||` from the LP optimum to
/// the cut hyperplane; positive iff the cut separates `x*`.
pub fn efficacy(cut: &Cut, x_star: &[f64]) -> Result<f64> {
    let alpha: Vec<f64> = cut.alpha.iter().map(|v| v.to_f64().unwrap()).collect();
    let norm = alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = alpha.iter().zip(x_star).map(|(a, x)| a * x).sum();
    Ok((dot - cut.beta.to_f64().unwrap()) / norm)
}

/// Cosine similarity `|alpha . c| / (||alpha|| ||c||)` between the cut
/// normal and the objective.
pub fn parallelism(cut: &Cut, c: &[f64]) -> Result<f64> {
    let alpha: Vec<f64> = cut.alpha.iter().map(|v| v.to_f64().unwrap()).collect();
    let na = alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nc = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nc == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = alpha.iter().zip(c).map(|(a, x)| a * x).sum();
    Ok(dot.abs() / (na * nc))
}

/// Convex combination `mu * efficacy + (1 - mu) * parallelism`.
pub fn weighted_score(cut: &Cut, inst: &IlpInstance, x_star: &[f64], mu: f64) -> Result<f64> {
    Ok(mu * efficacy(cut, x_star)? + (1.0 - mu) * parallelism(cut, &inst.c)?)
}

/// All CG and GMI cuts from the fractional rows of the optimal root tableau:
/// for each row, the CG cut of its clipped aggregation multipliers followed
/// by the GMI cut, vacuous and duplicate cuts removed.
pub fn candidate_pool(inst: &IlpInstance, lp_iter_cap: usize) -> Result<Vec<Cut>> {
    let p = LpProblem::new(inst);
    let r = solve_lp(&p, lp_iter_cap)?;
    match r.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::InvalidArgument(
                "candidate pool needs a feasible relaxation".into(),
            ))
        }
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let rows = fractional_tableau_rows(&r, &p)?;
    let mut pool: Vec<Cut> = Vec::new();
    let mut seen: Vec<(Vec<BigInt>, BigInt)> = Vec::new();
    let push = |cut: Cut, pool: &mut Vec<Cut>, seen: &mut Vec<(Vec<BigInt>, BigInt)>| {
        if cut.is_vacuous() {
            return;
        }
        let nf = cut.normal_form();
        if seen.contains(&nf) {
            return;
        }
        seen.push(nf);
        pool.push(cut);
    };
    for row in &rows {
        let u: Vec<f64> = row
            .exact
            .mult
            .iter()
            .map(|v| v.to_f64().unwrap().clamp(0.0, 1.0))
            .collect();
        if let Ok(cut) = cg_cut(inst, &Multiplier::new(u)?) {
            push(cut, &mut pool, &mut seen);
        }
        if let Ok(cut) = gmi_cut(&p, row) {
            push(cut, &mut pool, &mut seen);
        }
    }
    Ok(pool)
}

/// Tunable weights for the scoring baseline; the two-score efficacy /
/// parallelism model collapses to the scalar `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreWeights {
    pub entries: Vec<f64>,
}

impl ScoreWeights {
    pub fn scalar(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidArgument("mu must lie in [0,1]".into()));
        }
        Ok(ScoreWeights { entries: vec![mu] })
    }

    pub fn mu(&self) -> f64 {
        self.entries[0]
    }
}
