//! Dense two-phase simplex over the standard-form augmentation with slack
//! variables, exposing the optimal basis and the exact tableau rows needed
//! for GMI cut generation.
//!
//! The floating-point tableau drives the search; tableau rows handed to cut
//! generation are recomputed exactly from the final basis with rational
//! arithmetic, so cut coefficients never inherit pivoting roundoff.

use crate::error::{Error, Result};
use crate::ilp::{rat_to_big, IlpInstance};
use crate::{INT_TOL, LP_TOL};
use num::{BigRational, One, ToPrimitive, Zero};

/// One appended inequality `coeffs . x <= rhs` over the structural variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRow {
    pub coeffs: Vec<BigRational>,
    pub rhs: BigRational,
    /// True iff every coefficient and the rhs are integers, in which case the
    /// row's slack variable is integer-valued on integer points.
    pub integral: bool,
}

impl LinRow {
    pub fn new(coeffs: Vec<BigRational>, rhs: BigRational) -> Self {
        let integral = coeffs.iter().all(|v| v.is_integer()) && rhs.is_integer();
        LinRow {
            coeffs,
            rhs,
            integral,
        }
    }
}

/// LP relaxation of an instance plus appended rows (cuts, branching bounds).
#[derive(Debug, Clone)]
pub struct LpProblem<'a> {
    pub base: &'a IlpInstance,
    pub extra_rows: Vec<LinRow>,
}

impl<'a> LpProblem<'a> {
    pub fn new(base: &'a IlpInstance) -> Self {
        LpProblem {
            base,
            extra_rows: Vec::new(),
        }
    }

    pub fn with_rows(base: &'a IlpInstance, extra_rows: Vec<LinRow>) -> Self {
        LpProblem { base, extra_rows }
    }

    pub fn num_structural(&self) -> usize {
        self.base.num_cols
    }

    pub fn num_rows(&self) -> usize {
        self.base.num_rows + self.extra_rows.len()
    }

    /// Exact row `i` of the full system (base rows first, then extras).
    pub fn row_exact(&self, i: usize) -> (Vec<BigRational>, BigRational, bool) {
        if i < self.base.num_rows {
            let coeffs: Vec<BigRational> = self.base.a[i].iter().map(rat_to_big).collect();
            let rhs = rat_to_big(&self.base.b[i]);
            let integral = coeffs.iter().all(|v| v.is_integer()) && rhs.is_integer();
            (coeffs, rhs, integral)
        } else {
            let r = &self.extra_rows[i - self.base.num_rows];
            (r.coeffs.clone(), r.rhs.clone(), r.integral)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Structural variable values at the optimum (empty otherwise).
    pub x_star: Vec<f64>,
    pub value: f64,
    /// Basic variable indices over structural (0..n) then slack (n..n+mt)
    /// columns, one per row.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

/// Stall threshold after which pricing switches to Bland's rule.
const DEGENERATE_STALL: usize = 50;

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
    iterations: usize,
    degenerate: usize,
    bland: bool,
    iter_cap: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        self.rhs[r] /= piv;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][j];
            if factor == 0.0 {
                continue;
            }
            for k in 0..self.ncols {
                let upd = self.rows[r][k];
                if upd != 0.0 {
                    self.rows[i][k] -= factor * upd;
                }
            }
            self.rhs[i] -= factor * self.rhs[r];
        }
        self.basis[r] = j;
    }

    /// Maximizes `obj . vars`; returns true if optimal, false if unbounded.
    fn run_phase(&mut self, obj: &[f64]) -> Result<bool> {
        loop {
            // reduced costs r_j = c_j - c_B B^-1 A_j
            let mut entering: Option<usize> = None;
            let mut best = LP_TOL;
            for j in 0..self.ncols {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut z = 0.0;
                for (i, row) in self.rows.iter().enumerate() {
                    let cb = obj[self.basis[i]];
                    if cb != 0.0 {
                        z += cb * row[j];
                    }
                }
                let rc = obj[j] - z;
                if rc > LP_TOL {
                    if self.bland {
                        entering = Some(j);
                        break;
                    }
                    if rc > best {
                        best = rc;
                        entering = Some(j);
                    }
                }
            }
            let j = match entering {
                Some(j) => j,
                None => return Ok(true),
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let col = self.rows[i][j];
                if col > LP_TOL {
                    let ratio = self.rhs[i] / col;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12
                                || ((ratio - lr).abs() <= 1e-12
                                    && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let (r, ratio) = match leave {
                Some(x) => x,
                None => return Ok(false),
            };
            if ratio.abs() <= 1e-12 {
                self.degenerate += 1;
                if self.degenerate >= DEGENERATE_STALL {
                    self.bland = true;
                }
            }
            self.iterations += 1;
            if self.iterations > self.iter_cap {
                return Err(Error::LpStall(self.iter_cap));
            }
            self.pivot(r, j);
        }
    }
}

/// Solves the relaxation `max c.x s.t. rows, x >= 0` with a deterministic
/// two-phase dense simplex (Dantzig pricing, Bland's rule after a stall).
pub fn solve_lp(p: &LpProblem, iter_cap: usize) -> Result<LpResult> {
    let n = p.num_structural();
    let mt = p.num_rows();
    let main_cols = n + mt;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(mt);
    let mut rhs: Vec<f64> = Vec::with_capacity(mt);
    let mut basis: Vec<usize> = Vec::with_capacity(mt);
    let mut artificial_rows: Vec<usize> = Vec::new();
    for i in 0..mt {
        let (coeffs, r, _) = p.row_exact(i);
        let mut row = vec![0.0; main_cols];
        for (j, v) in coeffs.iter().enumerate() {
            row[j] = v.to_f64().unwrap();
        }
        row[n + i] = 1.0;
        let mut rv = r.to_f64().unwrap();
        if rv < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            rv = -rv;
            artificial_rows.push(i);
        }
        rows.push(row);
        rhs.push(rv);
        basis.push(n + i);
    }

    let mut t = Tableau {
        rows,
        rhs,
        basis,
        ncols: main_cols,
        iterations: 0,
        degenerate: 0,
        bland: false,
        iter_cap,
    };

    if !artificial_rows.is_empty() {
        // Phase 1: append one artificial column per negated row and drive
        // the artificial sum to zero.
        let n_art = artificial_rows.len();
        t.ncols = main_cols + n_art;
        for (k, &ri) in artificial_rows.iter().enumerate() {
            for (i, row) in t.rows.iter_mut().enumerate() {
                row.push(if i == ri { 1.0 } else { 0.0 });
            }
            t.basis[ri] = main_cols + k;
        }
        let mut obj = vec![0.0; t.ncols];
        for k in 0..n_art {
            obj[main_cols + k] = -1.0;
        }
        let optimal = t.run_phase(&obj)?;
        debug_assert!(optimal, "phase 1 objective is bounded");
        let art_sum: f64 = (0..t.rows.len())
            .filter(|&i| t.basis[i] >= main_cols)
            .map(|i| t.rhs[i])
            .sum();
        if art_sum > 1e-7 {
            return Ok(LpResult {
                status: LpStatus::Infeasible,
                x_star: Vec::new(),
                value: f64::NEG_INFINITY,
                basis: Vec::new(),
                iterations: t.iterations,
            });
        }
        // Pivot remaining artificials out of the basis, or drop redundant rows.
        let mut drop_rows: Vec<usize> = Vec::new();
        for i in 0..t.rows.len() {
            if t.basis[i] < main_cols {
                continue;
            }
            let j = (0..main_cols)
                .find(|&j| !t.basis.contains(&j) && t.rows[i][j].abs() > 1e-9);
            match j {
                Some(j) => t.pivot(i, j),
                None => drop_rows.push(i),
            }
        }
        for &i in drop_rows.iter().rev() {
            t.rows.remove(i);
            t.rhs.remove(i);
            t.basis.remove(i);
        }
        for row in t.rows.iter_mut() {
            row.truncate(main_cols);
        }
        t.ncols = main_cols;
        t.degenerate = 0;
        t.bland = false;
    }

    let mut obj = vec![0.0; main_cols];
    obj[..n].copy_from_slice(&p.base.c);
    let optimal = t.run_phase(&obj)?;
    if !optimal {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            x_star: Vec::new(),
            value: f64::INFINITY,
            basis: Vec::new(),
            iterations: t.iterations,
        });
    }

    let mut x_star = vec![0.0; n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x_star[bv] = t.rhs[i];
        }
    }
    let value: f64 = p.base.c.iter().zip(&x_star).map(|(c, x)| c * x).sum();
    Ok(LpResult {
        status: LpStatus::Optimal,
        x_star,
        value,
        basis: t.basis.clone(),
        iterations: t.iterations,
    })
}

/// Exact tableau row for one basic variable, recomputed from the basis with
/// rational arithmetic over the original augmented system `[A | I]`.
#[derive(Debug, Clone)]
pub struct ExactRow {
    pub basic_var: usize,
    pub rhs: BigRational,
    /// Coefficients over all structural + slack columns.
    pub coeffs: Vec<BigRational>,
    /// The aggregation multipliers `e_pos^T B^{-1}` (length = row count).
    pub mult: Vec<BigRational>,
}

/// One fractional tableau row in floating point, with its exact counterpart.
#[derive(Debug, Clone)]
pub struct TableauRow {
    pub basic_var: usize,
    pub rhs: f64,
    pub coeffs: Vec<f64>,
    pub exact: ExactRow,
}

fn augmented_column(p: &LpProblem, j: usize) -> Vec<BigRational> {
    let n = p.num_structural();
    let mt = p.num_rows();
    let mut col = vec![BigRational::zero(); mt];
    if j < n {
        for i in 0..mt {
            let (coeffs, _, _) = p.row_exact(i);
            col[i] = coeffs[j].clone();
        }
    } else {
        col[j - n] = BigRational::one();
    }
    col
}

/// Solves the square rational system `m . y = e` by Gaussian elimination.
fn solve_exact(mut m: Vec<Vec<BigRational>>, mut e: Vec<BigRational>) -> Result<Vec<BigRational>> {
    let k = m.len();
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !m[r][col].is_zero())
            .ok_or_else(|| Error::InvalidArgument("singular basis matrix".into()))?;
        m.swap(col, pivot);
        e.swap(col, pivot);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v /= &p;
        }
        e[col] /= &p;
        for r in 0..k {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for c2 in col..k {
                let upd = m[col][c2].clone() * &f;
                m[r][c2] -= upd;
            }
            let upd = e[col].clone() * &f;
            e[r] -= upd;
        }
    }
    Ok(e)
}

/// Exact recomputation of the tableau row in which `basis[pos]` is basic.
pub fn exact_tableau_row(p: &LpProblem, basis: &[usize], pos: usize) -> Result<ExactRow> {
    let mt = p.num_rows();
    if basis.len() != mt {
        return Err(Error::InvalidArgument(
            "basis size does not match row count (redundant rows were dropped)".into(),
        ));
    }
    // B^T y = e_pos, columns of B ordered as in `basis`.
    let bt: Vec<Vec<BigRational>> = (0..mt)
        .map(|i| {
            let col = augmented_column(p, basis[i]);
            col
        })
        .collect();
    let mut e = vec![BigRational::zero(); mt];
    e[pos] = BigRational::one();
    let y = solve_exact(bt, e)?;

    let n = p.num_structural();
    let mut coeffs = Vec::with_capacity(n + mt);
    for j in 0..n + mt {
        let col = augmented_column(p, j);
        let dot = y
            .iter()
            .zip(&col)
            .fold(BigRational::zero(), |acc, (a, b)| acc + a * b);
        coeffs.push(dot);
    }
    let rhs = (0..mt).fold(BigRational::zero(), |acc, i| {
        let (_, r, _) = p.row_exact(i);
        acc + &y[i] * r
    });
    Ok(ExactRow {
        basic_var: basis[pos],
        rhs,
        coeffs,
        mult: y,
    })
}

/// Exact dual multipliers `y = c_B B^{-1}` from the final basis.
pub fn exact_dual(p: &LpProblem, basis: &[usize]) -> Result<Vec<BigRational>> {
    let mt = p.num_rows();
    if basis.len() != mt {
        return Err(Error::InvalidArgument("basis size mismatch".into()));
    }
    let n = p.num_structural();
    let bt: Vec<Vec<BigRational>> = (0..mt).map(|i| augmented_column(p, basis[i])).collect();
    let cb: Vec<BigRational> = basis
        .iter()
        .map(|&j| {
            if j < n {
                BigRational::from_float(p.base.c[j]).unwrap_or_else(BigRational::zero)
            } else {
                BigRational::zero()
            }
        })
        .collect();
    solve_exact(bt, cb)
}

/// One exact tableau row per basic structural variable whose value is
/// fractional beyond the integrality tolerance, ordered by variable index.
pub fn fractional_tableau_rows(r: &LpResult, p: &LpProblem) -> Result<Vec<TableauRow>> {
    if r.status != LpStatus::Optimal {
        return Err(Error::InvalidArgument(
            "tableau rows require an optimal LP result".into(),
        ));
    }
    let n = p.num_structural();
    let mut positions: Vec<usize> = (0..r.basis.len())
        .filter(|&i| r.basis[i] < n)
        .collect();
    positions.sort_by_key(|&i| r.basis[i]);
    let mut out = Vec::new();
    for pos in positions {
        let var = r.basis[pos];
        let v = r.x_star[var];
        if (v - v.round()).abs() <= INT_TOL {
            continue;
        }
        let exact = exact_tableau_row(p, &r.basis, pos)?;
        let rhs = exact.rhs.to_f64().unwrap();
        let coeffs = exact.coeffs.iter().map(|c| c.to_f64().unwrap()).collect();
        out.push(TableauRow {
            basic_var: var,
            rhs,
            coeffs,
            exact,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::{rat, IlpInstance};
    use num::FromPrimitive;

    const CAP: usize = 10_000;

    #[test]
    fn t1_relaxation() {
        let inst = IlpInstance::t1();
        let p = LpProblem::new(&inst);
        let r = solve_lp(&p, CAP).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value - 1.5).abs() < 1e-9);
        assert!((r.x_star[0] - 1.5).abs() < 1e-9);
        assert!(r.x_star[1].abs() < 1e-9);
    }

    #[test]
    fn t1_with_unit_cut() {
        let inst = IlpInstance::t1();
        let row = LinRow::new(
            vec![BigRational::one(), BigRational::one()],
            BigRational::one(),
        );
        let p = LpProblem::with_rows(&inst, vec![row]);
        let r = solve_lp(&p, CAP).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value - 1.0).abs() < 1e-9);
        for v in &r.x_star {
            assert!((v - v.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn unbounded_detected() {
        let inst = IlpInstance::new(vec![vec![rat(-1, 1)]], vec![rat(0, 1)], vec![1.0]);
        let p = LpProblem::new(&inst);
        let r = solve_lp(&p, CAP).unwrap();
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        // x <= -1 with x >= 0
        let inst = IlpInstance::new(vec![vec![rat(1, 1)]], vec![rat(-1, 1)], vec![1.0]);
        let p = LpProblem::new(&inst);
        let r = solve_lp(&p, CAP).unwrap();
        assert_eq!(r.status, LpStatus::Infeasible);
    }

    #[test]
    fn negative_rhs_feasible() {
        // -x <= -2, x <= 5: feasible band [2, 5], max x = 5
        let inst = IlpInstance::new(
            vec![vec![rat(-1, 1)], vec![rat(1, 1)]],
            vec![rat(-2, 1), rat(5, 1)],
            vec![1.0],
        );
        let p = LpProblem::new(&inst);
        let r = solve_lp(&p, CAP).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn t1_fractional_rows() {
        let inst = IlpInstance::t1();
        let p = LpProblem::new(&inst);
        let r = solve_lp(&p, CAP).unwrap();
        let rows = fractional_tableau_rows(&r, &p).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].basic_var, 0);
        assert!((rows[0].rhs - 1.5).abs() < 1e-9);
        assert_eq!(rows[0].exact.rhs, BigRational::new(3.into(), 2.into()));
    }

    #[test]
    fn integral_vertex_no_rows() {
        let inst = IlpInstance::t1();
        let row = LinRow::new(
            vec![BigRational::one(), BigRational::one()],
            BigRational::one(),
        );
        let p = LpProblem::with_rows(&inst, vec![row]);
        let r = solve_lp(&p, CAP).unwrap();
        assert!(fractional_tableau_rows(&r, &p).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_optimal() {
        let inst = IlpInstance::new(vec![vec![rat(1, 1)]], vec![rat(-1, 1)], vec![1.0]);
        let p = LpProblem::new(&inst);
        let r = solve_lp(&p, CAP).unwrap();
        assert!(fractional_tableau_rows(&r, &p).is_err());
    }

    #[test]
    fn deterministic_result() {
        let inst = crate::ilp::gen_chvatal_multiknapsack(&crate::ilp::GeneratorConfig {
            n_items: 8,
            n_knapsacks: 2,
            coeff_lo: 1,
            coeff_hi: 50,
            seed: 5,
            objective_rule: crate::ilp::ObjectiveRule::SumOfColumns,
        })
        .unwrap();
        let p = LpProblem::new(&inst);
        let a = solve_lp(&p, CAP).unwrap();
        let b = solve_lp(&p, CAP).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weak_duality_spot_check() {
        for seed in 0..20u64 {
            let inst = crate::ilp::gen_chvatal_multiknapsack(&crate::ilp::GeneratorConfig {
                n_items: 5,
                n_knapsacks: 3,
                coeff_lo: 1,
                coeff_hi: 20,
                seed,
                objective_rule: crate::ilp::ObjectiveRule::SumOfColumns,
            })
            .unwrap();
            let p = LpProblem::new(&inst);
            let r = solve_lp(&p, CAP).unwrap();
            assert_eq!(r.status, LpStatus::Optimal);
            let y = exact_dual(&p, &r.basis).unwrap();
            // y >= 0 and y^T b >= primal value
            for v in &y {
                assert!(*v >= BigRational::zero() - BigRational::from_f64(1e-9).unwrap());
            }
            let dual_obj: f64 = (0..p.num_rows())
                .map(|i| {
                    let (_, b, _) = p.row_exact(i);
                    (y[i].clone() * b).to_f64().unwrap()
                })
                .sum();
            assert!(dual_obj >= r.value - 1e-6);
        }
    }
}
