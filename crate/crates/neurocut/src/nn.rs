//! Minimal feed-forward networks: ReLU and linear-threshold forwards,
//! squeezing onto a parameter box, exact ReLU backprop, and a
//! straight-through-estimator surrogate gradient for LT nets.

use crate::cuts::Multiplier;
use crate::error::{Error, Result};
use crate::ilp::IlpInstance;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

/// Layer widths `[w_0, w_1, ..., w_L, w_{L+1}]`; parameters are stored as one
/// flat vector, layer by layer (matrix row-major, then bias).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkArch {
    pub widths: Vec<usize>,
}

impl NetworkArch {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "architecture needs at least input and output widths".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("all widths must be >= 1".into()));
        }
        Ok(NetworkArch { widths })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Hidden-layer count L.
    pub fn hidden_layers(&self) -> usize {
        self.widths.len() - 2
    }

    /// U: total number of hidden units.
    pub fn size_u(&self) -> usize {
        self.widths[1..self.widths.len() - 1].iter().sum()
    }

    /// W: total parameter count over all L+1 affine layers.
    pub fn param_count(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// W': parameter count of the hidden layers only (layers 1..=L).
    pub fn hidden_param_count(&self) -> usize {
        self.widths[..self.widths.len() - 1]
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// Flat-vector offset of layer `i` (1-based), returning
    /// (matrix offset, bias offset, rows, cols).
    fn layer_span(&self, i: usize) -> (usize, usize, usize, usize) {
        let mut offset = 0;
        for j in 1..i {
            offset += (self.widths[j - 1] + 1) * self.widths[j];
        }
        let rows = self.widths[i];
        let cols = self.widths[i - 1];
        (offset, offset + rows * cols, rows, cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub flat: Vec<f64>,
}

impl NetworkParams {
    pub fn new(arch: &NetworkArch, flat: Vec<f64>) -> Result<Self> {
        if flat.len() != arch.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                flat.len()
            )));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(NetworkParams { flat })
    }

    pub fn zeros(arch: &NetworkArch) -> Self {
        NetworkParams {
            flat: vec![0.0; arch.param_count()],
        }
    }
}

/// Seeded uniform initialization in ±sqrt(6/(fan_in+fan_out)) per layer.
pub fn init_params(arch: &NetworkArch, seed: u64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = Vec::with_capacity(arch.param_count());
    for w in arch.widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..(fan_in + 1) * fan_out {
            flat.push(rng.gen_range(-limit..limit));
        }
    }
    NetworkParams { flat }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqueezeKind {
    Sigmoid,
    Crelu,
}

impl std::str::FromStr for SqueezeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(SqueezeKind::Sigmoid),
            "crelu" => Ok(SqueezeKind::Crelu),
            other => Err(Error::InvalidArgument(format!(
                "unknown squeeze kind '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
}

impl ParamBox {
    pub fn new(eta: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if eta.len() != tau.len() {
            return Err(Error::DimensionMismatch("eta/tau lengths differ".into()));
        }
        if eta.iter().zip(&tau).any(|(e, t)| e > t) {
            return Err(Error::InvalidArgument("eta_i must be <= tau_i".into()));
        }
        Ok(ParamBox { eta, tau })
    }

    /// The box [0,1]^m used for CG multipliers.
    pub fn unit(m: usize) -> Self {
        ParamBox {
            eta: vec![0.0; m],
            tau: vec![1.0; m],
        }
    }
}

/// Clipped ReLU min{max{0, t}, 1}.
pub fn crelu(t: f64) -> f64 {
    t.clamp(0.0, 1.0)
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn affine(arch: &NetworkArch, params: &[f64], layer: usize, x: &[f64]) -> Vec<f64> {
    let (mat, bias, rows, cols) = arch.layer_span(layer);
    (0..rows)
        .map(|r| {
            let row = &params[mat + r * cols..mat + (r + 1) * cols];
            params[bias + r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

fn check_shapes(arch: &NetworkArch, params: &NetworkParams, x: &[f64]) -> Result<()> {
    if x.len() != arch.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input length {} != w_0 = {}",
            x.len(),
            arch.input_dim()
        )));
    }
    if params.flat.len() != arch.param_count() {
        return Err(Error::DimensionMismatch(format!(
            "parameter length {} != W = {}",
            params.flat.len(),
            arch.param_count()
        )));
    }
    Ok(())
}

/// Hidden layers apply ReLU; the final layer is affine.
pub fn forward_relu(arch: &NetworkArch, params: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    check_shapes(arch, params, x)?;
    let mut act = x.to_vec();
    let depth = arch.widths.len() - 1;
    for layer in 1..=depth {
        act = affine(arch, &params.flat, layer, &act);
        if layer < depth {
            for v in &mut act {
                *v = v.max(0.0);
            }
        }
    }
    Ok(act)
}

fn sgn(t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Hidden layers apply sgn (with sgn(0) = 1); the final layer is affine.
pub fn forward_lt(arch: &NetworkArch, params: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    check_shapes(arch, params, x)?;
    let mut act = x.to_vec();
    let depth = arch.widths.len() - 1;
    for layer in 1..=depth {
        act = affine(arch, &params.flat, layer, &act);
        if layer < depth {
            for v in &mut act {
                *v = sgn(*v);
            }
        }
    }
    Ok(act)
}

/// Concatenated hidden-layer sgn outputs across all hidden layers; used for
/// empirical region counting.
pub fn lt_hidden_pattern(
    arch: &NetworkArch,
    params: &NetworkParams,
    x: &[f64],
) -> Result<Vec<bool>> {
    check_shapes(arch, params, x)?;
    let mut act = x.to_vec();
    let mut pattern = Vec::with_capacity(arch.size_u());
    for layer in 1..=arch.hidden_layers() {
        act = affine(arch, &params.flat, layer, &act);
        for v in &mut act {
            *v = sgn(*v);
            pattern.push(*v == 1.0);
        }
    }
    Ok(pattern)
}

/// Componentwise p_i = eta_i + (tau_i - eta_i) * sigma'(y_i).
pub fn squeeze(y: &[f64], pbox: &ParamBox, kind: SqueezeKind) -> Result<Vec<f64>> {
    if y.len() != pbox.eta.len() {
        return Err(Error::DimensionMismatch(format!(
            "output length {} != box dimension {}",
            y.len(),
            pbox.eta.len()
        )));
    }
    Ok(y.iter()
        .zip(pbox.eta.iter().zip(&pbox.tau))
        .map(|(&t, (&e, &ta))| {
            let s = match kind {
                SqueezeKind::Sigmoid => sigmoid(t),
                SqueezeKind::Crelu => crelu(t),
            };
            e + (ta - e) * s
        })
        .collect())
}

/// Encode the instance, run the ReLU net, squeeze onto the box, and return
/// the resulting CG multiplier.
pub fn policy_map(
    inst: &IlpInstance,
    arch: &NetworkArch,
    params: &NetworkParams,
    pbox: &ParamBox,
    kind: SqueezeKind,
) -> Result<Multiplier> {
    let enc = crate::ilp::encode(inst)?;
    if arch.input_dim() != enc.vec.len() {
        return Err(Error::DimensionMismatch(format!(
            "net input width {} != encoding dimension {}",
            arch.input_dim(),
            enc.vec.len()
        )));
    }
    if arch.output_dim() != inst.num_rows {
        return Err(Error::DimensionMismatch(format!(
            "net output width {} != row count {}",
            arch.output_dim(),
            inst.num_rows
        )));
    }
    let y = forward_relu(arch, params, &enc.vec)?;
    Multiplier::new(squeeze(&y, pbox, kind)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HiddenGrad {
    /// ReLU subgradient: 1 for z > 0, 0 otherwise.
    Relu,
    /// STE clipped-identity surrogate: 1 for |z| <= 1, 0 otherwise.
    SteLt,
}

fn backprop(
    arch: &NetworkArch,
    params: &NetworkParams,
    x: &[f64],
    upstream: &[f64],
    mode: HiddenGrad,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_shapes(arch, params, x)?;
    if upstream.len() != arch.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "upstream length {} != output width {}",
            upstream.len(),
            arch.output_dim()
        )));
    }
    let depth = arch.widths.len() - 1;
    // forward pass, recording pre-activations and layer inputs
    let mut inputs: Vec<Vec<f64>> = vec![x.to_vec()];
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(depth);
    for layer in 1..=depth {
        let z = affine(arch, &params.flat, layer, inputs.last().unwrap());
        let mut a = z.clone();
        if layer < depth {
            for v in &mut a {
                *v = match mode {
                    HiddenGrad::Relu => v.max(0.0),
                    HiddenGrad::SteLt => sgn(*v),
                };
            }
        }
        pre.push(z);
        inputs.push(a);
    }

    let mut grad = vec![0.0; arch.param_count()];
    let mut delta = upstream.to_vec();
    for layer in (1..=depth).rev() {
        let (mat, bias, rows, cols) = arch.layer_span(layer);
        let inp = &inputs[layer - 1];
        for r in 0..rows {
            grad[bias + r] = delta[r];
            for c in 0..cols {
                grad[mat + r * cols + c] = delta[r] * inp[c];
            }
        }
        let mut prev = vec![0.0; cols];
        for c in 0..cols {
            for r in 0..rows {
                prev[c] += params.flat[mat + r * cols + c] * delta[r];
            }
        }
        if layer > 1 {
            let z_prev = &pre[layer - 2];
            for (c, p) in prev.iter_mut().enumerate() {
                let pass = match mode {
                    HiddenGrad::Relu => z_prev[c] > 0.0,
                    HiddenGrad::SteLt => z_prev[c].abs() <= 1.0,
                };
                if !pass {
                    *p = 0.0;
                }
            }
        }
        delta = prev;
    }
    Ok((grad, delta))
}

/// Gradient of upstream^T forward_relu with respect to the flat parameters
/// and, secondarily, the input vector.
pub fn backprop_relu(
    arch: &NetworkArch,
    params: &NetworkParams,
    x: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    backprop(arch, params, x, upstream, HiddenGrad::Relu)
}

/// Forward uses sgn; backward replaces sgn' with the clipped-identity
/// surrogate 1{|z| <= 1}.
pub fn backprop_ste_lt(
    arch: &NetworkArch,
    params: &NetworkParams,
    x: &[f64],
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    backprop(arch, params, x, upstream, HiddenGrad::SteLt)
}

/// Checkpoint: header line `mlp w0 w1 ...`, then the W parameters as
/// round-trippable decimals.
pub fn write_checkpoint(path: &Path, arch: &NetworkArch, params: &NetworkParams) -> Result<()> {
    let mut out = String::from("mlp");
    for w in &arch.widths {
        write!(out, " {w}").unwrap();
    }
    out.push('\n');
    for (i, v) in params.flat.iter().enumerate() {
        if i > 0 {
            out.push(if i % 8 == 0 { '\n' } else { ' ' });
        }
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(NetworkArch, NetworkParams)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty checkpoint".into(),
    })?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("mlp") {
        return Err(Error::Parse {
            line: 1,
            msg: "expected 'mlp' header".into(),
        });
    }
    let widths: Vec<usize> = toks
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("bad width '{t}'"),
            })
        })
        .collect::<Result<_>>()?;
    let arch = NetworkArch::new(widths)?;
    let mut flat = Vec::with_capacity(arch.param_count());
    for (li, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            flat.push(tok.parse().map_err(|_| Error::Parse {
                line: li + 2,
                msg: format!("bad parameter '{tok}'"),
            })?);
        }
    }
    let params = NetworkParams::new(&arch, flat)?;
    Ok((arch, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::IlpInstance;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn arch(widths: &[usize]) -> NetworkArch {
        NetworkArch::new(widths.to_vec()).unwrap()
    }

    /// Independent scalar-loop evaluation used as the forward oracle.
    fn naive_forward(a: &NetworkArch, p: &[f64], x: &[f64], relu: bool) -> Vec<f64> {
        let mut act = x.to_vec();
        let mut off = 0;
        let depth = a.widths.len() - 1;
        for layer in 1..=depth {
            let (rows, cols) = (a.widths[layer], a.widths[layer - 1]);
            let mut next = vec![0.0; rows];
            for r in 0..rows {
                let mut s = 0.0;
                for c in 0..cols {
                    s += p[off + r * cols + c] * act[c];
                }
                s += p[off + rows * cols + r];
                if layer < depth {
                    s = if relu {
                        if s > 0.0 {
                            s
                        } else {
                            0.0
                        }
                    } else if s < 0.0 {
                        0.0
                    } else {
                        1.0
                    };
                }
                next[r] = s;
            }
            off += (cols + 1) * rows;
            act = next;
        }
        act
    }

    #[test]
    fn arch_counts() {
        let a = arch(&[3, 4, 2]);
        assert_eq!(a.hidden_layers(), 1);
        assert_eq!(a.size_u(), 4);
        assert_eq!(a.param_count(), (3 + 1) * 4 + (4 + 1) * 2);
        assert_eq!(a.hidden_param_count(), (3 + 1) * 4);
        let b = arch(&[1, 1, 1]);
        assert_eq!(b.size_u(), 1);
        assert_eq!(b.hidden_param_count(), 2);
    }

    #[test]
    fn forward_relu_identity_net() {
        // A1 = I, b1 = 0, A2 = I, b2 = 0
        let a = arch(&[2, 2, 2]);
        let flat = vec![
            1.0, 0.0, 0.0, 1.0, 0.0, 0.0, // layer 1
            1.0, 0.0, 0.0, 1.0, 0.0, 0.0, // layer 2
        ];
        let p = NetworkParams::new(&a, flat).unwrap();
        assert_eq!(forward_relu(&a, &p, &[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn forward_relu_zero_params() {
        let a = arch(&[3, 5, 2]);
        let p = NetworkParams::zeros(&a);
        assert_eq!(forward_relu(&a, &p, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = arch(&[3, 4, 3, 2]);
            let flat: Vec<f64> = (0..a.param_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = NetworkParams::new(&a, flat.clone()).unwrap();
            let relu = forward_relu(&a, &p, &x).unwrap();
            let relu_ref = naive_forward(&a, &flat, &x, true);
            let lt = forward_lt(&a, &p, &x).unwrap();
            let lt_ref = naive_forward(&a, &flat, &x, false);
            for (got, want) in relu.iter().zip(&relu_ref).chain(lt.iter().zip(&lt_ref)) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_lt_sgn_boundary() {
        // hidden pre-activation (-0.5, 0, 3) -> (0, 1, 1); read through an
        // identity-ish output layer summing each hidden unit separately
        let a = arch(&[1, 3, 3]);
        let mut flat = vec![0.0; a.param_count()];
        // layer 1: A = 0, b = (-0.5, 0, 3)
        flat[3] = -0.5;
        flat[4] = 0.0;
        flat[5] = 3.0;
        // layer 2: A = I
        flat[6] = 1.0;
        flat[10] = 1.0;
        flat[14] = 1.0;
        let p = NetworkParams::new(&a, flat).unwrap();
        assert_eq!(forward_lt(&a, &p, &[0.0]).unwrap(), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn forward_lt_zero_params_bias_output() {
        // sgn(0)=1 in the hidden layer; output layer has zero weights, so the
        // result is the final bias
        let a = arch(&[2, 3, 1]);
        let p = NetworkParams::zeros(&a);
        assert_eq!(forward_lt(&a, &p, &[5.0, -5.0]).unwrap(), vec![0.0]);
        let pattern = lt_hidden_pattern(&a, &p, &[5.0, -5.0]).unwrap();
        assert_eq!(pattern, vec![true, true, true]);
    }

    #[test]
    fn forward_lt_scale_invariant_first_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = arch(&[2, 3, 2]);
        let flat: Vec<f64> = (0..a.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut scaled = flat.clone();
        for v in scaled.iter_mut().take((2 + 1) * 3) {
            *v *= 2.0;
        }
        let x = [0.3, -0.7];
        let p1 = NetworkParams::new(&a, flat).unwrap();
        let p2 = NetworkParams::new(&a, scaled).unwrap();
        assert_eq!(forward_lt(&a, &p1, &x).unwrap(), forward_lt(&a, &p2, &x).unwrap());
    }

    #[test]
    fn final_layer_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = arch(&[2, 3, 2]);
        let flat: Vec<f64> = (0..a.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut scaled = flat.clone();
        let first = (2 + 1) * 3;
        for v in scaled.iter_mut().skip(first) {
            *v *= 3.0;
        }
        let x = [0.4, -1.2];
        let y1 = forward_relu(&a, &NetworkParams::new(&a, flat).unwrap(), &x).unwrap();
        let y2 = forward_relu(&a, &NetworkParams::new(&a, scaled).unwrap(), &x).unwrap();
        for (a, b) in y1.iter().zip(&y2) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn squeeze_examples() {
        let b = ParamBox::unit(3);
        assert_eq!(
            squeeze(&[-1.0, 0.5, 2.0], &b, SqueezeKind::Crelu).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        let b2 = ParamBox::new(vec![2.0], vec![6.0]).unwrap();
        assert_eq!(squeeze(&[0.0], &b2, SqueezeKind::Sigmoid).unwrap(), vec![4.0]);
    }

    #[test]
    fn squeeze_stays_in_box() {
        let b = ParamBox::new(vec![-1.0, 0.0], vec![2.0, 0.5]).unwrap();
        for &t in &[-1e6, -3.3, 0.0, 0.2, 7.0, 1e6] {
            for kind in [SqueezeKind::Sigmoid, SqueezeKind::Crelu] {
                let p = squeeze(&[t, t], &b, kind).unwrap();
                for (i, v) in p.iter().enumerate() {
                    assert!(b.eta[i] <= *v && *v <= b.tau[i]);
                }
            }
        }
    }

    #[test]
    fn crelu_identity_two_relus() {
        let relu = |t: f64| t.max(0.0);
        for i in 0..1000 {
            let t = -3.0 + 6.0 * i as f64 / 999.0;
            assert_eq!(crelu(t), relu(t) - relu(t - 1.0));
        }
    }

    #[test]
    fn policy_map_zero_params() {
        let inst = IlpInstance::t1();
        let d = crate::ilp::encode(&inst).unwrap().vec.len();
        let a = arch(&[d, 4, inst.num_rows]);
        let p = NetworkParams::zeros(&a);
        let b = ParamBox::unit(inst.num_rows);
        let u = policy_map(&inst, &a, &p, &b, SqueezeKind::Crelu).unwrap();
        assert_eq!(u.as_slice(), &[0.0]);
        let u2 = policy_map(&inst, &a, &p, &b, SqueezeKind::Sigmoid).unwrap();
        assert_eq!(u2.as_slice(), &[0.5]);
    }

    #[test]
    fn policy_map_matches_oracle() {
        let inst = IlpInstance::t1();
        let enc = crate::ilp::encode(&inst).unwrap();
        let a = arch(&[enc.vec.len(), 4, inst.num_rows]);
        let p = init_params(&a, 7);
        let b = ParamBox::unit(inst.num_rows);
        let u = policy_map(&inst, &a, &p, &b, SqueezeKind::Crelu).unwrap();
        let y = naive_forward(&a, &p.flat, &enc.vec, true);
        for (got, want) in u.as_slice().iter().zip(&y) {
            assert!((got - crelu(*want)).abs() < 1e-12);
        }
    }

    #[test]
    fn backprop_linear_net_bias() {
        // no hidden layer: grad of upstream^T (Ax + b) wrt b is upstream
        let a = arch(&[2, 3]);
        let p = init_params(&a, 2);
        let upstream = [1.0, -2.0, 0.5];
        let (grad, gx) = backprop_relu(&a, &p, &[0.7, -0.3], &upstream).unwrap();
        assert_eq!(&grad[6..9], &upstream);
        // grad wrt x is A^T upstream
        for c in 0..2 {
            let want: f64 = (0..3).map(|r| p.flat[r * 2 + c] * upstream[r]).sum();
            assert!((gx[c] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn backprop_dead_relu_zero_grads() {
        // single hidden unit forced negative: its incoming weights get no grad
        let a = arch(&[1, 1, 1]);
        let p = NetworkParams::new(&a, vec![1.0, -5.0, 2.0, 0.0]).unwrap();
        let (grad, gx) = backprop_relu(&a, &p, &[1.0], &[1.0]).unwrap();
        assert_eq!(&grad[0..2], &[0.0, 0.0]);
        assert_eq!(gx, vec![0.0]);
        // output-layer bias still flows
        assert_eq!(grad[3], 1.0);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = arch(&[3, 4, 2]);
        for _ in 0..20 {
            let p = init_params(&a, rng.gen());
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let upstream: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (grad, _) = backprop_relu(&a, &p, &x, &upstream).unwrap();
            let h = 1e-5;
            for j in 0..a.param_count() {
                let mut lo = p.clone();
                let mut hi = p.clone();
                lo.flat[j] -= h;
                hi.flat[j] += h;
                let f = |q: &NetworkParams| -> f64 {
                    forward_relu(&a, q, &x)
                        .unwrap()
                        .iter()
                        .zip(&upstream)
                        .map(|(y, u)| y * u)
                        .sum()
                };
                let fd = (f(&hi) - f(&lo)) / (2.0 * h);
                let denom = fd.abs().max(1.0);
                assert!(
                    (grad[j] - fd).abs() / denom < 1e-4,
                    "param {j}: analytic {} vs fd {fd}",
                    grad[j]
                );
            }
        }
    }

    #[test]
    fn ste_surrogate_pass_and_block() {
        // 1-1-1 net, hidden pre-activation = b1
        let a = arch(&[1, 1, 1]);
        // z = 0.5: surrogate passes; output weight 2 scales upstream
        let p = NetworkParams::new(&a, vec![1.0, 0.5, 2.0, 0.0]).unwrap();
        let (grad, _) = backprop_ste_lt(&a, &p, &[0.0], &[1.0]).unwrap();
        assert_eq!(grad[1], 2.0); // d/db1 = upstream * A2 * 1{|z|<=1}
        // z = 5: surrogate blocks
        let p2 = NetworkParams::new(&a, vec![1.0, 5.0, 2.0, 0.0]).unwrap();
        let (grad2, _) = backprop_ste_lt(&a, &p2, &[0.0], &[1.0]).unwrap();
        assert_eq!(grad2[1], 0.0);
        // output grads reflect the sgn forward value (sgn(5) = 1)
        assert_eq!(grad2[2], 1.0);
    }

    #[test]
    fn ste_matches_relu_where_activations_agree() {
        // hidden pre-activations pinned at exactly 1: sgn(1) = relu(1) = 1 and
        // both hidden derivatives are 1, so gradients coincide
        let a = arch(&[2, 2, 1]);
        let flat = vec![
            0.5, 0.25, 0.25, 0.75, 0.25, 0.0, // layer 1: z = (1, 1) at x = (1, 1)
            1.5, -0.5, 0.3, // layer 2
        ];
        let p = NetworkParams::new(&a, flat).unwrap();
        let x = [1.0, 1.0];
        let (g_lt, gx_lt) = backprop_ste_lt(&a, &p, &x, &[1.0]).unwrap();
        let (g_relu, gx_relu) = backprop_relu(&a, &p, &x, &[1.0]).unwrap();
        assert_eq!(g_lt, g_relu);
        assert_eq!(gx_lt, gx_relu);
        assert_eq!(
            forward_lt(&a, &p, &x).unwrap(),
            forward_relu(&a, &p, &x).unwrap()
        );
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = arch(&[4, 8, 3]);
        let p1 = init_params(&a, 42);
        let p2 = init_params(&a, 42);
        let p3 = init_params(&a, 43);
        assert_eq!(p1, p2);
        assert_ne!(p1, p3);
        let lim1 = (6.0 / (4 + 8) as f64).sqrt();
        let lim2 = (6.0 / (8 + 3) as f64).sqrt();
        let split = (4 + 1) * 8;
        assert!(p1.flat[..split].iter().all(|v| v.abs() <= lim1));
        assert!(p1.flat[split..].iter().all(|v| v.abs() <= lim2));
    }

    #[test]
    fn checkpoint_round_trip_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("actor.ckpt");
        let a = arch(&[3, 7, 2]);
        let p = init_params(&a, 99);
        write_checkpoint(&path, &a, &p).unwrap();
        let (a2, p2) = read_checkpoint(&path).unwrap();
        assert_eq!(a, a2);
        assert_eq!(p.flat, p2.flat);
    }

    #[test]
    fn shape_errors() {
        let a = arch(&[2, 2]);
        let p = NetworkParams::zeros(&a);
        assert!(forward_relu(&a, &p, &[1.0]).is_err());
        assert!(backprop_relu(&a, &p, &[1.0, 2.0], &[1.0]).is_err());
        assert!(NetworkParams::new(&a, vec![0.0; 3]).is_err());
        assert!(NetworkArch::new(vec![3]).is_err());
        assert!(NetworkArch::new(vec![3, 0, 1]).is_err());
    }
}
