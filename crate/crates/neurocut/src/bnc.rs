//! Deterministic branch-and-bound with cuts at the root, and the tree-size
//! score functions built on it.
//!
//! The tree size counts every node whose LP relaxation is solved, root
//! included; the search stops early once the node cap is hit.

use crate::cuts::{candidate_pool, cg_cut, cg_cut_sequence, weighted_score, CgSequenceParams, Cut, Multiplier, ScoreWeights};
use crate::error::{Error, Result};
use crate::ilp::IlpInstance;
use crate::lp::{solve_lp, LinRow, LpProblem, LpStatus};
use crate::INT_TOL;
use num::{BigInt, BigRational, One, Zero};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    BestBound,
    Dfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchRule {
    /// Fractional variable minimizing |frac - 0.5|, ties by lowest index.
    MostFractional,
    /// Lowest-index fractional variable.
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolvePolicy {
    pub node_selection: NodeSelection,
    pub branch_rule: BranchRule,
    pub integrality_tol: f64,
    /// Tightens pruning to `bound < incumbent + 1 - eps` when the objective
    /// is integer-valued.
    pub integral_objective: bool,
}

impl Default for SolvePolicy {
    fn default() -> Self {
        SolvePolicy {
            node_selection: NodeSelection::BestBound,
            branch_rule: BranchRule::MostFractional,
            integrality_tol: INT_TOL,
            integral_objective: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveBudget {
    /// Cap B on the number of processed nodes.
    pub tree_cap: usize,
    pub lp_iteration_cap: usize,
}

impl Default for SolveBudget {
    fn default() -> Self {
        SolveBudget {
            tree_cap: 10_000,
            lp_iteration_cap: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BncStatus {
    Optimal,
    Infeasible,
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeOutcome {
    Leaf,
    Branch,
    Pruned,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceNode {
    pub id: usize,
    pub parent: i64,
    pub bound: f64,
    pub outcome: NodeOutcome,
}

impl TraceNode {
    pub fn render(&self) -> String {
        let status = match self.outcome {
            NodeOutcome::Leaf => "leaf",
            NodeOutcome::Branch => "branch",
            NodeOutcome::Pruned => "pruned",
            NodeOutcome::Infeasible => "infeasible",
        };
        format!(
            "node {} parent {} bound {} status {}",
            self.id, self.parent, self.bound, status
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BncResult {
    pub status: BncStatus,
    pub value: f64,
    pub incumbent: Option<Vec<i64>>,
    /// Count of processed polyhedra, root included.
    pub tree_size: usize,
    pub trace: Option<Vec<TraceNode>>,
}

struct Node {
    parent: i64,
    rows: Vec<LinRow>,
}

struct HeapEntry {
    bound: f64,
    id: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on bound, ties broken toward the lowest node id
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn bound_row(n: usize, var: usize, value: i64, upper: bool) -> LinRow {
    let mut coeffs = vec![BigRational::zero(); n];
    let (coef, rhs) = if upper {
        (BigRational::one(), BigRational::from(BigInt::from(value)))
    } else {
        (-BigRational::one(), BigRational::from(BigInt::from(-value)))
    };
    coeffs[var] = coef;
    LinRow::new(coeffs, rhs)
}

fn pick_branch_var(x: &[f64], rule: BranchRule, tol: f64) -> Option<usize> {
    let fractional: Vec<(usize, f64)> = x
        .iter()
        .enumerate()
        .filter_map(|(j, &v)| {
            let f = v - v.floor();
            let dist = (f - 0.5).abs();
            if (v - v.round()).abs() > tol {
                Some((j, dist))
            } else {
                None
            }
        })
        .collect();
    match rule {
        BranchRule::LowestIndex => fractional.first().map(|&(j, _)| j),
        BranchRule::MostFractional => fractional
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
            .map(|&(j, _)| j),
    }
}

fn objective_is_integral(c: &[f64]) -> bool {
    c.iter().all(|v| (v - v.round()).abs() < 1e-12)
}

/// Branch and bound with the given cuts appended at the root.
pub fn branch_and_bound(
    inst: &IlpInstance,
    root_cuts: &[Cut],
    policy: &SolvePolicy,
    budget: &SolveBudget,
) -> Result<BncResult> {
    branch_and_bound_traced(inst, root_cuts, policy, budget, false)
}

pub fn branch_and_bound_traced(
    inst: &IlpInstance,
    root_cuts: &[Cut],
    policy: &SolvePolicy,
    budget: &SolveBudget,
    keep_trace: bool,
) -> Result<BncResult> {
    if budget.tree_cap < 1 {
        return Err(Error::InvalidArgument("tree_cap must be >= 1".into()));
    }
    let n = inst.num_cols;
    let root_rows: Vec<LinRow> = root_cuts.iter().map(Cut::to_row).collect();
    let tighten = policy.integral_objective && objective_is_integral(&inst.c);

    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut nodes: Vec<Node> = Vec::new();
    let push_node = |nodes: &mut Vec<Node>,
                         heap: &mut BinaryHeap<HeapEntry>,
                         stack: &mut Vec<usize>,
                         parent: i64,
                         bound: f64,
                         rows: Vec<LinRow>| {
        let id = nodes.len();
        nodes.push(Node { parent, rows });
        match policy.node_selection {
            NodeSelection::BestBound => heap.push(HeapEntry { bound, id }),
            NodeSelection::Dfs => stack.push(id),
        }
    };
    push_node(
        &mut nodes,
        &mut heap,
        &mut stack,
        -1,
        f64::INFINITY,
        Vec::new(),
    );

    let mut incumbent: Option<(Vec<i64>, f64)> = None;
    let mut processed = 0usize;
    let mut trace: Vec<TraceNode> = Vec::new();
    let mut capped = false;

    loop {
        let open = match policy.node_selection {
            NodeSelection::BestBound => heap.len(),
            NodeSelection::Dfs => stack.len(),
        };
        if open == 0 {
            break;
        }
        if processed == budget.tree_cap {
            capped = true;
            break;
        }
        let nid = match policy.node_selection {
            NodeSelection::BestBound => heap.pop().unwrap().id,
            NodeSelection::Dfs => stack.pop().unwrap(),
        };
        let (parent, rows) = {
            let node = &nodes[nid];
            (node.parent, node.rows.clone())
        };
        let mut all_rows = root_rows.clone();
        all_rows.extend(rows.iter().cloned());
        let p = LpProblem::with_rows(inst, all_rows);
        let r = solve_lp(&p, budget.lp_iteration_cap)?;
        processed += 1;

        let mut record = |outcome: NodeOutcome, bound: f64| {
            if keep_trace {
                trace.push(TraceNode {
                    id: nid,
                    parent,
                    bound,
                    outcome,
                });
            }
        };

        match r.status {
            LpStatus::Unbounded => return Err(Error::Unbounded),
            LpStatus::Infeasible => {
                record(NodeOutcome::Infeasible, f64::NEG_INFINITY);
                continue;
            }
            LpStatus::Optimal => {}
        }

        if let Some((_, inc_value)) = &incumbent {
            let threshold = if tighten {
                inc_value + 1.0 - 1e-9
            } else {
                inc_value + 1e-9
            };
            if r.value < threshold {
                record(NodeOutcome::Pruned, r.value);
                continue;
            }
        }

        let branch_var = pick_branch_var(&r.x_star, policy.branch_rule, policy.integrality_tol);
        match branch_var {
            None => {
                let x_int: Vec<i64> = r.x_star.iter().map(|v| v.round() as i64).collect();
                let value: f64 = inst
                    .c
                    .iter()
                    .zip(&x_int)
                    .map(|(c, &x)| c * x as f64)
                    .sum();
                let better = incumbent
                    .as_ref()
                    .map_or(true, |(_, inc)| value > *inc);
                if better {
                    incumbent = Some((x_int, value));
                }
                record(NodeOutcome::Leaf, r.value);
            }
            Some(var) => {
                record(NodeOutcome::Branch, r.value);
                let f = r.x_star[var].floor() as i64;
                let mut left = nodes[nid].rows.clone();
                left.push(bound_row(n, var, f, true));
                push_node(&mut nodes, &mut heap, &mut stack, nid as i64, r.value, left);
                let mut right = nodes[nid].rows.clone();
                right.push(bound_row(n, var, f + 1, false));
                push_node(&mut nodes, &mut heap, &mut stack, nid as i64, r.value, right);
            }
        }
    }

    let (status, value, incumbent_vec) = match (&incumbent, capped) {
        (_, true) => {
            let (v, inc) = incumbent
                .as_ref()
                .map(|(x, v)| (*v, Some(x.clone())))
                .unwrap_or((f64::NEG_INFINITY, None));
            (BncStatus::Capped, v, inc)
        }
        (Some((x, v)), false) => (BncStatus::Optimal, *v, Some(x.clone())),
        (None, false) => (BncStatus::Infeasible, f64::NEG_INFINITY, None),
    };
    Ok(BncResult {
        status,
        value,
        incumbent: incumbent_vec,
        tree_size: processed,
        trace: if keep_trace { Some(trace) } else { None },
    })
}

/// Tree size with one CG cut at the root.
pub fn f_cg(
    inst: &IlpInstance,
    u: &Multiplier,
    policy: &SolvePolicy,
    budget: &SolveBudget,
) -> Result<usize> {
    let cut = cg_cut(inst, u)?;
    Ok(branch_and_bound(inst, &[cut], policy, budget)?.tree_size)
}

/// Tree size with a sequence of k CG cuts at the root.
pub fn f_cg_k(
    inst: &IlpInstance,
    params: &CgSequenceParams,
    policy: &SolvePolicy,
    budget: &SolveBudget,
) -> Result<usize> {
    let cuts = cg_cut_sequence(inst, params)?;
    Ok(branch_and_bound(inst, &cuts, policy, budget)?.tree_size)
}

/// Tree size with one cut from the candidate pool at the root.
pub fn f_row(
    inst: &IlpInstance,
    pool_index: usize,
    policy: &SolvePolicy,
    budget: &SolveBudget,
) -> Result<usize> {
    let pool = candidate_pool(inst, budget.lp_iteration_cap)?;
    if pool_index >= pool.len() {
        return Err(Error::PoolIndex {
            index: pool_index,
            size: pool.len(),
        });
    }
    Ok(branch_and_bound(inst, &pool[pool_index..=pool_index], policy, budget)?.tree_size)
}

/// Outcome of the weighted scoring policy; `empty_pool` marks instances
/// where no candidate cut existed and the run fell back to no cuts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredRun {
    pub tree_size: usize,
    pub selected: Option<usize>,
    pub empty_pool: bool,
}

/// Tree size after adding the pool cut maximizing the weighted score
/// (ties resolved toward the lowest pool index).
pub fn f_s(
    inst: &IlpInstance,
    weights: &ScoreWeights,
    policy: &SolvePolicy,
    budget: &SolveBudget,
) -> Result<ScoredRun> {
    let pool = candidate_pool(inst, budget.lp_iteration_cap)?;
    if pool.is_empty() {
        let run = branch_and_bound(inst, &[], policy, budget)?;
        return Ok(ScoredRun {
            tree_size: run.tree_size,
            selected: None,
            empty_pool: true,
        });
    }
    let p = LpProblem::new(inst);
    let r = solve_lp(&p, budget.lp_iteration_cap)?;
    let mu = weights.mu();
    let mut best: Option<(usize, f64)> = None;
    for (i, cut) in pool.iter().enumerate() {
        let score = weighted_score(cut, inst, &r.x_star, mu)?;
        let replace = match best {
            None => true,
            Some((_, bs)) => score > bs,
        };
        if replace {
            best = Some((i, score));
        }
    }
    let (idx, _) = best.unwrap();
    let run = branch_and_bound(inst, &pool[idx..=idx], policy, budget)?;
    Ok(ScoredRun {
        tree_size: run.tree_size,
        selected: Some(idx),
        empty_pool: false,
    })
}

/// Brute-force ILP optimum by enumerating `{0..box_bound}^n`; test oracle.
pub fn brute_force_optimum(inst: &IlpInstance, box_bound: u64) -> Result<Option<(Vec<i64>, f64)>> {
    let n = inst.num_cols;
    let candidates = (box_bound as u128 + 1).checked_pow(n as u32);
    match candidates {
        Some(c) if c <= 10_000_000 => {}
        _ => return Err(Error::EnumerationBudget(u128::MAX)),
    }
    let mut best: Option<(Vec<i64>, f64)> = None;
    let mut x = vec![0u64; n];
    loop {
        let feasible = inst.a.iter().zip(&inst.b).all(|(row, rhs)| {
            let lhs = row
                .iter()
                .zip(&x)
                .fold(crate::ilp::Rat::zero(), |acc, (a, &v)| {
                    acc + *a * crate::ilp::rat(v as i64, 1)
                });
            lhs <= *rhs
        });
        if feasible {
            let value: f64 = inst.c.iter().zip(&x).map(|(c, &v)| c * v as f64).sum();
            if best.as_ref().map_or(true, |(_, bv)| value > *bv) {
                best = Some((x.iter().map(|&v| v as i64).collect(), value));
            }
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(best);
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
