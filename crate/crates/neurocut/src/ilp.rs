//! ILP instance representation, validation, encoding, synthetic generation
//! and dataset persistence.
//!
//! An instance is the pure integer program
//! `max { c^T x : A x <= b, x >= 0, x integral }` with rational `A`, `b`
//! and real `c`. Nonnegativity is implicit and never stored as rows of `A`.

use crate::error::{Error, Result};
use num::rational::Ratio;
use num::{BigRational, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

/// Exact rational scalar for instance data.
pub type Rat = Ratio<i64>;

pub fn rat(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn rat_to_big(r: &Rat) -> BigRational {
    BigRational::new((*r.numer()).into(), (*r.denom()).into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpInstance {
    pub num_rows: usize,
    pub num_cols: usize,
    /// Row-major `m x n` constraint matrix.
    pub a: Vec<Vec<Rat>>,
    pub b: Vec<Rat>,
    pub c: Vec<f64>,
}

impl IlpInstance {
    pub fn new(a: Vec<Vec<Rat>>, b: Vec<Rat>, c: Vec<f64>) -> Self {
        IlpInstance {
            num_rows: a.len(),
            num_cols: c.len(),
            a,
            b,
            c,
        }
    }

    /// The 2x2 worked instance used throughout the tests:
    /// `max x1+x2 s.t. 2x1+2x2 <= 3`.
    pub fn t1() -> Self {
        IlpInstance::new(
            vec![vec![rat(2, 1), rat(2, 1)]],
            vec![rat(3, 1)],
            vec![1.0, 1.0],
        )
    }

    pub fn is_valid(&self) -> bool {
        validate(self).is_ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Report-style validation; an empty report means the instance satisfies
/// every `IlpInstance` invariant.
pub fn validate(inst: &IlpInstance) -> ValidationReport {
    let mut violations = Vec::new();
    if inst.num_rows < 1 {
        violations.push("num_rows must be >= 1".to_string());
    }
    if inst.num_cols < 1 {
        violations.push("num_cols must be >= 1".to_string());
    }
    if inst.a.len() != inst.num_rows {
        violations.push(format!(
            "matrix has {} rows, expected {}",
            inst.a.len(),
            inst.num_rows
        ));
    }
    for (i, row) in inst.a.iter().enumerate() {
        if row.len() != inst.num_cols {
            violations.push(format!(
                "row {} has {} entries, expected {}",
                i,
                row.len(),
                inst.num_cols
            ));
        }
        for (j, v) in row.iter().enumerate() {
            if *v.denom() == 0 {
                violations.push(format!("non-finite coefficient A[{i}][{j}]"));
            }
        }
    }
    if inst.b.len() != inst.num_rows {
        violations.push(format!(
            "b has {} entries, expected {}",
            inst.b.len(),
            inst.num_rows
        ));
    }
    if inst.c.len() != inst.num_cols {
        violations.push(format!(
            "c has {} entries, expected {}",
            inst.c.len(),
            inst.num_cols
        ));
    }
    for (j, v) in inst.c.iter().enumerate() {
        if !v.is_finite() {
            violations.push(format!("non-finite coefficient c[{j}]"));
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormBounds {
    /// Sum of |A_ij|.
    pub a_norm: Rat,
    /// Sum of |b_i|.
    pub b_norm: Rat,
}

pub fn norm_bounds(inst: &IlpInstance) -> NormBounds {
    let a_norm = inst
        .a
        .iter()
        .flat_map(|row| row.iter())
        .fold(Rat::zero(), |acc, v| acc + v.abs());
    let b_norm = inst.b.iter().fold(Rat::zero(), |acc, v| acc + v.abs());
    NormBounds { a_norm, b_norm }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    /// Row-major entries of A, then b, then c; length `m*n + m + n`.
    pub vec: Vec<f64>,
    pub num_rows: usize,
    pub num_cols: usize,
}

impl EncodedInstance {
    pub fn dim(&self) -> usize {
        self.vec.len()
    }
}

/// Stacks `(A, b, c)` into a single vector of length `m*n + m + n`.
pub fn encode(inst: &IlpInstance) -> Result<EncodedInstance> {
    let report = validate(inst);
    if !report.is_ok() {
        return Err(Error::InvalidInstance(report.violations.join("; ")));
    }
    let mut vec = Vec::with_capacity(inst.num_rows * inst.num_cols + inst.num_rows + inst.num_cols);
    for row in &inst.a {
        vec.extend(row.iter().map(rat_to_f64));
    }
    vec.extend(inst.b.iter().map(rat_to_f64));
    vec.extend_from_slice(&inst.c);
    Ok(EncodedInstance {
        vec,
        num_rows: inst.num_rows,
        num_cols: inst.num_cols,
    })
}

/// Inverse of [`encode`]; exact for rationals representable in f64.
pub fn decode(enc: &EncodedInstance) -> Result<IlpInstance> {
    let (m, n) = (enc.num_rows, enc.num_cols);
    if enc.vec.len() != m * n + m + n {
        return Err(Error::DimensionMismatch(format!(
            "encoded length {} != {}",
            enc.vec.len(),
            m * n + m + n
        )));
    }
    let to_rat = |v: f64| -> Result<Rat> {
        Rat::approximate_float(v)
            .ok_or_else(|| Error::InvalidInstance(format!("cannot represent {v} as a rational")))
    };
    let a = (0..m)
        .map(|i| (0..n).map(|j| to_rat(enc.vec[i * n + j])).collect())
        .collect::<Result<Vec<Vec<Rat>>>>()?;
    let b = (0..m)
        .map(|i| to_rat(enc.vec[m * n + i]))
        .collect::<Result<Vec<Rat>>>()?;
    let c = enc.vec[m * n + m..].to_vec();
    Ok(IlpInstance::new(a, b, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveRule {
    /// `c_j = sum_i A_ij`.
    SumOfColumns,
    /// `c_j = A_1j`.
    FirstRow,
}

impl FromStr for ObjectiveRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum_of_columns" => Ok(ObjectiveRule::SumOfColumns),
            "first_row" => Ok(ObjectiveRule::FirstRow),
            other => Err(Error::InvalidArgument(format!(
                "unknown objective_rule: {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub n_items: usize,
    pub n_knapsacks: usize,
    pub coeff_lo: i64,
    pub coeff_hi: i64,
    pub seed: u64,
    pub objective_rule: ObjectiveRule,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_items: 16,
            n_knapsacks: 2,
            coeff_lo: 1,
            coeff_hi: 1000,
            seed: 0,
            objective_rule: ObjectiveRule::SumOfColumns,
        }
    }
}

/// Hard multi-knapsack construction: uniform integer weights with each
/// capacity set to half the row's total weight.
pub fn gen_chvatal_multiknapsack(cfg: &GeneratorConfig) -> Result<IlpInstance> {
    if cfg.n_items == 0 || cfg.n_knapsacks == 0 {
        return Err(Error::InvalidArgument(
            "n_items and n_knapsacks must be positive".into(),
        ));
    }
    if cfg.coeff_lo <= 0 || cfg.coeff_lo > cfg.coeff_hi {
        return Err(Error::InvalidArgument(
            "need 0 < coeff_lo <= coeff_hi".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = Vec::with_capacity(cfg.n_knapsacks);
    let mut b = Vec::with_capacity(cfg.n_knapsacks);
    for _ in 0..cfg.n_knapsacks {
        let row: Vec<i64> = (0..cfg.n_items)
            .map(|_| rng.gen_range(cfg.coeff_lo..=cfg.coeff_hi))
            .collect();
        let total: i64 = row.iter().sum();
        b.push(rat(total / 2, 1));
        a.push(row.into_iter().map(|v| rat(v, 1)).collect::<Vec<Rat>>());
    }
    let c: Vec<f64> = match cfg.objective_rule {
        ObjectiveRule::SumOfColumns => (0..cfg.n_items)
            .map(|j| {
                a.iter()
                    .map(|row: &Vec<Rat>| rat_to_f64(&row[j]))
                    .sum::<f64>()
            })
            .collect(),
        ObjectiveRule::FirstRow => (0..cfg.n_items).map(|j| rat_to_f64(&a[0][j])).collect(),
    };
    Ok(IlpInstance::new(a, b, c))
}

fn fmt_rat(r: &Rat) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn parse_rat(tok: &str, line: usize) -> Result<Rat> {
    let parse_i64 = |s: &str| -> Result<i64> {
        s.parse::<i64>().map_err(|_| Error::Parse {
            line,
            msg: format!("bad rational token '{tok}'"),
        })
    };
    match tok.split_once('/') {
        Some((n, d)) => {
            let den = parse_i64(d)?;
            if den == 0 {
                return Err(Error::Parse {
                    line,
                    msg: format!("zero denominator in '{tok}'"),
                });
            }
            Ok(rat(parse_i64(n)?, den))
        }
        None => Ok(rat(parse_i64(tok)?, 1)),
    }
}

/// Renders one instance in the line-oriented text format.
pub fn format_instance(inst: &IlpInstance) -> String {
    let mut out = String::new();
    writeln!(out, "ilp {} {}", inst.num_rows, inst.num_cols).unwrap();
    for row in &inst.a {
        let toks: Vec<String> = row.iter().map(fmt_rat).collect();
        writeln!(out, "{}", toks.join(" ")).unwrap();
    }
    let btoks: Vec<String> = inst.b.iter().map(fmt_rat).collect();
    writeln!(out, "b {}", btoks.join(" ")).unwrap();
    let ctoks: Vec<String> = inst.c.iter().map(|v| format!("{v}")).collect();
    writeln!(out, "c {}", ctoks.join(" ")).unwrap();
    out
}

/// Parses a whole dataset: instances separated by `---` lines.
pub fn parse_dataset(text: &str) -> Result<Vec<IlpInstance>> {
    let mut instances = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(_, first)) = lines.peek() {
        if first.trim().is_empty() || first.trim() == "---" {
            lines.next();
            continue;
        }
        let (lineno, header) = lines.next().unwrap();
        let lineno = lineno + 1;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 || toks[0] != "ilp" {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 'ilp m n' header, got '{header}'"),
            });
        }
        let m: usize = toks[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: "bad row count".into(),
        })?;
        let n: usize = toks[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: "bad column count".into(),
        })?;
        let mut next_line = |what: &str| -> Result<(usize, &str)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l)),
                None => Err(Error::Parse {
                    line: lineno,
                    msg: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let mut a = Vec::with_capacity(m);
        for i in 0..m {
            let (ln, l) = next_line("matrix row")?;
            let row: Vec<Rat> = l
                .split_whitespace()
                .map(|t| parse_rat(t, ln))
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("matrix row {} has {} entries, expected {}", i, row.len(), n),
                });
            }
            a.push(row);
        }
        let (ln, l) = next_line("b line")?;
        let btoks: Vec<&str> = l.split_whitespace().collect();
        if btoks.first() != Some(&"b") || btoks.len() != m + 1 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected 'b' line with {m} rationals"),
            });
        }
        let b: Vec<Rat> = btoks[1..]
            .iter()
            .map(|t| parse_rat(t, ln))
            .collect::<Result<_>>()?;
        let (ln, l) = next_line("c line")?;
        let ctoks: Vec<&str> = l.split_whitespace().collect();
        if ctoks.first() != Some(&"c") || ctoks.len() != n + 1 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected 'c' line with {n} reals"),
            });
        }
        let c: Vec<f64> = ctoks[1..]
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("bad objective token '{t}'"),
                })
            })
            .collect::<Result<_>>()?;
        instances.push(IlpInstance::new(a, b, c));
    }
    Ok(instances)
}

pub fn write_dataset(path: &Path, instances: &[IlpInstance]) -> Result<()> {
    let mut out = String::new();
    for (i, inst) in instances.iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        out.push_str(&format_instance(inst));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<IlpInstance>> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_t1_clean() {
        assert!(validate(&IlpInstance::t1()).is_ok());
    }

    #[test]
    fn validate_zero_rows() {
        let inst = IlpInstance::new(vec![], vec![], vec![1.0]);
        let report = validate(&inst);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("num_rows must be >= 1")));
    }

    #[test]
    fn validate_nonfinite_objective() {
        let mut inst = IlpInstance::t1();
        inst.c[0] = f64::NAN;
        let report = validate(&inst);
        assert!(report.violations.iter().any(|v| v.contains("non-finite")));
    }

    #[test]
    fn encode_t1() {
        let enc = encode(&IlpInstance::t1()).unwrap();
        assert_eq!(enc.vec, vec![2.0, 2.0, 3.0, 1.0, 1.0]);
        assert_eq!(enc.dim(), 5);
    }

    #[test]
    fn encode_identity_2x2() {
        let inst = IlpInstance::new(
            vec![vec![rat(1, 1), rat(0, 1)], vec![rat(0, 1), rat(1, 1)]],
            vec![rat(1, 1), rat(1, 1)],
            vec![1.0, 1.0],
        );
        let enc = encode(&inst).unwrap();
        assert_eq!(enc.vec, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(enc.dim(), 8);
    }

    #[test]
    fn encode_paper_scale_dim() {
        let inst = gen_chvatal_multiknapsack(&GeneratorConfig::default()).unwrap();
        assert_eq!(encode(&inst).unwrap().dim(), 2 * 16 + 2 + 16);
    }

    #[test]
    fn decode_round_trip() {
        let inst = IlpInstance::t1();
        assert_eq!(decode(&encode(&inst).unwrap()).unwrap(), inst);
    }

    #[test]
    fn norms_t1() {
        let nb = norm_bounds(&IlpInstance::t1());
        assert_eq!(nb.a_norm, rat(4, 1));
        assert_eq!(nb.b_norm, rat(3, 1));
    }

    #[test]
    fn norms_zero() {
        let inst = IlpInstance::new(vec![vec![rat(0, 1)]], vec![rat(0, 1)], vec![1.0]);
        let nb = norm_bounds(&inst);
        assert_eq!(nb.a_norm, rat(0, 1));
        assert_eq!(nb.b_norm, rat(0, 1));
    }

    #[test]
    fn norms_absolute_values() {
        let inst = IlpInstance::new(
            vec![vec![rat(-1, 1), rat(2, 1)]],
            vec![rat(-3, 1)],
            vec![1.0, 1.0],
        );
        let nb = norm_bounds(&inst);
        assert_eq!(nb.a_norm, rat(3, 1));
        assert_eq!(nb.b_norm, rat(3, 1));
    }

    #[test]
    fn norms_row_permutation_invariant() {
        let cfg = GeneratorConfig {
            n_items: 4,
            n_knapsacks: 3,
            coeff_lo: 1,
            coeff_hi: 9,
            seed: 11,
            objective_rule: ObjectiveRule::SumOfColumns,
        };
        let inst = gen_chvatal_multiknapsack(&cfg).unwrap();
        let mut permuted = inst.clone();
        permuted.a.rotate_left(1);
        permuted.b.rotate_left(1);
        assert_eq!(norm_bounds(&inst), norm_bounds(&permuted));
    }

    #[test]
    fn generator_dimensions() {
        let cfg = GeneratorConfig {
            seed: 7,
            ..GeneratorConfig::default()
        };
        let inst = gen_chvatal_multiknapsack(&cfg).unwrap();
        assert_eq!(inst.num_rows, 2);
        assert_eq!(inst.num_cols, 16);
    }

    #[test]
    fn generator_constant_coeffs() {
        let cfg = GeneratorConfig {
            n_items: 3,
            n_knapsacks: 1,
            coeff_lo: 4,
            coeff_hi: 4,
            seed: 0,
            objective_rule: ObjectiveRule::SumOfColumns,
        };
        let inst = gen_chvatal_multiknapsack(&cfg).unwrap();
        assert_eq!(inst.a[0], vec![rat(4, 1); 3]);
        assert_eq!(inst.b[0], rat(6, 1));
    }

    #[test]
    fn generator_deterministic() {
        let cfg = GeneratorConfig {
            seed: 123,
            ..GeneratorConfig::default()
        };
        let a = gen_chvatal_multiknapsack(&cfg).unwrap();
        let b = gen_chvatal_multiknapsack(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(format_instance(&a), format_instance(&b));
    }

    #[test]
    fn generator_origin_feasible() {
        for seed in 0..20 {
            let cfg = GeneratorConfig {
                n_items: 5,
                n_knapsacks: 2,
                coeff_lo: 1,
                coeff_hi: 50,
                seed,
                objective_rule: ObjectiveRule::SumOfColumns,
            };
            let inst = gen_chvatal_multiknapsack(&cfg).unwrap();
            assert!(inst.b.iter().all(|v| *v >= Rat::zero()));
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.txt");
        let instances = vec![IlpInstance::t1()];
        write_dataset(&path, &instances).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), instances);
    }

    #[test]
    fn dataset_bad_arity() {
        let text = "ilp 1 3\n1 2\nb 3\nc 1 1 1\n";
        match parse_dataset(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_many_instances_order_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("many.txt");
        let instances: Vec<IlpInstance> = (0..200)
            .map(|seed| {
                gen_chvatal_multiknapsack(&GeneratorConfig {
                    n_items: 6,
                    n_knapsacks: 2,
                    coeff_lo: 1,
                    coeff_hi: 30,
                    seed,
                    objective_rule: ObjectiveRule::SumOfColumns,
                })
                .unwrap()
            })
            .collect();
        write_dataset(&path, &instances).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), instances);
    }
}
