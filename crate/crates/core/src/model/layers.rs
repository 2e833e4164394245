//! Differentiable building blocks recorded on a [`Tape`].
//!
//! Parameters are passed as tape variables so the same functions serve
//! training, inference and the independent reference checks in tests.

use stancemt_tensor::{Axis, Tape, TensorError, Var};

type Result<T> = std::result::Result<T, TensorError>;

/// `x·W + b`.
#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub w: Var,
    pub b: Var,
}

impl Dense {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.dense(x, self.w, self.b)
    }
}

/// One LSTM direction. Gate blocks in `w_x`, `w_h`, `b` are ordered
/// input, forget, cell, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct Encoder {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Query, key and value projections.
#[derive(Clone, Copy, Debug)]
pub struct Triplet {
    pub q: Dense,
    pub k: Dense,
    pub v: Dense,
}

/// Attention weights (rows sum to 1) and the attended output.
#[derive(Clone, Copy, Debug)]
pub struct Attention {
    pub weights: Var,
    pub output: Var,
}

/// Gate values and the gated shared features.
#[derive(Clone, Copy, Debug)]
pub struct Gated {
    pub gate: Var,
    pub output: Var,
}

fn run_direction(tape: &mut Tape, x: Var, cell: &LstmCell, reverse: bool) -> Result<Var> {
    let n = tape.shape(x)[0];
    let hidden = tape.shape(cell.w_h)[0];
    let projected = tape.dense(x, cell.w_x, cell.b)?;
    let mut states: Vec<Option<Var>> = vec![None; n];
    let mut prev: Option<(Var, Var)> = None;
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    for t in order {
        let mut z = tape.slice_rows(projected, t, 1)?;
        if let Some((h, _)) = prev {
            let rec = tape.matmul(h, cell.w_h)?;
            z = tape.add(z, rec)?;
        }
        let zi = tape.slice_cols(z, 0, hidden)?;
        let zf = tape.slice_cols(z, hidden, hidden)?;
        let zg = tape.slice_cols(z, 2 * hidden, hidden)?;
        let zo = tape.slice_cols(z, 3 * hidden, hidden)?;
        let i = tape.sigmoid(zi)?;
        let g = tape.tanh(zg)?;
        let o = tape.sigmoid(zo)?;
        let mut c = tape.hadamard(i, g)?;
        if let Some((_, c_prev)) = prev {
            let f = tape.sigmoid(zf)?;
            let keep = tape.hadamard(f, c_prev)?;
            c = tape.add(keep, c)?;
        }
        let ct = tape.tanh(c)?;
        let h = tape.hadamard(o, ct)?;
        states[t] = Some(h);
        prev = Some((h, c));
    }
    let states: Vec<Var> = states.into_iter().map(|s| s.expect("every position visited")).collect();
    tape.concat(&states, Axis::Rows)
}

/// Bi-LSTM over embedded rows `x: n×d`; returns `[forward; backward]`
/// hidden states per position, `n×2d_l`.
pub fn encode(tape: &mut Tape, x: Var, enc: &Encoder) -> Result<Var> {
    let fwd = run_direction(tape, x, &enc.forward, false)?;
    let bwd = run_direction(tape, x, &enc.backward, true)?;
    tape.concat(&[fwd, bwd], Axis::Cols)
}

/// `softmax(Q·Kᵀ)·V`.
pub fn attend(tape: &mut Tape, q: Var, k: Var, v: Var) -> Result<Attention> {
    let scores = tape.matmul_t(q, k)?;
    let weights = tape.softmax_rows(scores)?;
    let output = tape.matmul(weights, v)?;
    Ok(Attention { weights, output })
}

pub fn self_attention(tape: &mut Tape, h: Var, triplet: &Triplet) -> Result<Attention> {
    let q = triplet.q.apply(tape, h)?;
    let k = triplet.k.apply(tape, h)?;
    let v = triplet.v.apply(tape, h)?;
    attend(tape, q, k, v)
}

/// Queries from `h_a` under `triplet_a`; keys and values from `h_b` under `triplet_b`.
pub fn inter_attention(tape: &mut Tape, h_a: Var, h_b: Var, triplet_a: &Triplet, triplet_b: &Triplet) -> Result<Attention> {
    let q = triplet_a.q.apply(tape, h_a)?;
    let k = triplet_b.k.apply(tape, h_b)?;
    let v = triplet_b.v.apply(tape, h_b)?;
    attend(tape, q, k, v)
}

/// Row-axis concatenation of `SA_t, SA_u, IA_tu, IA_ut`, or `SA_t` alone
/// without a topic sequence.
pub fn feature_specific_attention(
    tape: &mut Tape,
    h_t: Var,
    text: &Triplet,
    topic: Option<(Var, &Triplet)>,
) -> Result<Var> {
    let sa_t = self_attention(tape, h_t, text)?.output;
    let Some((h_u, topic)) = topic else { return Ok(sa_t) };
    let sa_u = self_attention(tape, h_u, topic)?.output;
    let ia_tu = inter_attention(tape, h_t, h_u, text, topic)?.output;
    let ia_ut = inter_attention(tape, h_u, h_t, topic, text)?.output;
    tape.concat(&[sa_t, sa_u, ia_tu, ia_ut], Axis::Rows)
}

pub fn shared_average(tape: &mut Tape, a_d: Var, a_s: Var) -> Result<Var> {
    let sum = tape.add(a_d, a_s)?;
    tape.scale(sum, 0.5)
}

/// `σ(A_shared·W + b) ⊙ dense_s(A_shared)`.
pub fn gate_cell(tape: &mut Tape, a_shared: Var, gate: &Dense, shared_proj: &Dense) -> Result<Gated> {
    let pre = gate.apply(tape, a_shared)?;
    let g = tape.sigmoid(pre)?;
    let s = shared_proj.apply(tape, a_shared)?;
    let output = tape.hadamard(g, s)?;
    Ok(Gated { gate: g, output })
}

/// Task queries attending over shared keys and values.
pub fn spia(tape: &mut Tape, a_task: Var, a_shared: Var, query: &Dense, key: &Dense, value: &Dense) -> Result<Attention> {
    let q = query.apply(tape, a_task)?;
    let k = key.apply(tape, a_shared)?;
    let v = value.apply(tape, a_shared)?;
    attend(tape, q, k, v)
}

/// `tanh(dense([G, P, G − P, G ⊙ P]))` with the blocks side by side.
pub fn fuse(tape: &mut Tape, g: Var, p: Var, fusion: &Dense) -> Result<Var> {
    let diff = tape.sub(g, p)?;
    let prod = tape.hadamard(g, p)?;
    let c = tape.concat(&[g, p, diff, prod], Axis::Cols)?;
    let pre = fusion.apply(tape, c)?;
    tape.tanh(pre)
}
