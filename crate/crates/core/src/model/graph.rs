//! Forward computation recorded on a [`Tape`].

use rand::RngCore;

use super::{names, AttentionKind, Result};
use crate::corpus::vocab::PAD;
use crate::tensor::{Real, Tape, Tensor, Var};

/// Gate weights of one GRU, in the order they appear in the update rule.
#[derive(Clone, Debug)]
pub struct GruWeights<T: Real = f32> {
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_o: Tensor<T>,
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_o: Tensor<T>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GateVars {
    w: [Var; 3],
    u: [Var; 3],
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ModelVars {
    emb: Var,
    enc: GateVars,
    dec: GateVars,
    w_a: Option<Var>,
    w_c: Var,
    w_s: Var,
}

impl ModelVars {
    pub(crate) fn bind<T: Real>(tape: &mut Tape<'_, T>, kind: AttentionKind) -> Result<Self> {
        let mut gates = |side: &str| -> Result<GateVars> {
            let mut v = Vec::with_capacity(6);
            for g in names::GATES {
                v.push(tape.param(&format!("{side}.{g}"))?);
            }
            Ok(GateVars {
                w: [v[0], v[1], v[2]],
                u: [v[3], v[4], v[5]],
            })
        };
        let enc = gates(names::ENCODER)?;
        let dec = gates(names::DECODER)?;
        Ok(Self {
            emb: tape.param(names::EMBEDDING)?,
            enc,
            dec,
            w_a: match kind {
                AttentionKind::Bilinear => Some(tape.param(names::W_A)?),
                AttentionKind::Dot => None,
            },
            w_c: tape.param(names::W_C)?,
            w_s: tape.param(names::W_S)?,
        })
    }
}

pub(crate) fn strip_padding(ids: &[usize]) -> &[usize] {
    let end = ids.iter().rposition(|&i| i != PAD).map_or(0, |p| p + 1);
    &ids[..end]
}

fn gru<T: Real>(tape: &mut Tape<'_, T>, g: &GateVars, x: Var, h: Var) -> Result<Var> {
    let pre = |tape: &mut Tape<'_, T>, w: Var, u: Var, hh: Var| -> Result<Var> {
        let a = tape.matmul(x, w)?;
        let b = tape.matmul(hh, u)?;
        Ok(tape.add(a, b)?)
    };
    let zp = pre(tape, g.w[0], g.u[0], h)?;
    let z = tape.sigmoid(zp);
    let rp = pre(tape, g.w[1], g.u[1], h)?;
    let r = tape.sigmoid(rp);
    let rh = tape.mul(r, h)?;
    let op = pre(tape, g.w[2], g.u[2], rh)?;
    let candidate = tape.tanh(op);
    let keep = tape.one_minus(z);
    let a = tape.mul(keep, candidate)?;
    let b = tape.mul(z, h)?;
    Ok(tape.add(a, b)?)
}

/// One GRU update on `1 × D` input and `1 × H` state.
pub fn gru_cell<T: Real>(
    x: &Tensor<T>,
    h_prev: &Tensor<T>,
    w: &GruWeights<T>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::detached();
    let g = GateVars {
        w: [
            tape.constant(&w.w_z),
            tape.constant(&w.w_r),
            tape.constant(&w.w_o),
        ],
        u: [
            tape.constant(&w.u_z),
            tape.constant(&w.u_r),
            tape.constant(&w.u_o),
        ],
    };
    let x = tape.constant(x);
    let h = tape.constant(h_prev);
    let out = gru(&mut tape, &g, x, h)?;
    Ok(tape.tensor(out))
}

pub(crate) struct Encoded {
    pub stack: Var,
    pub last: Var,
}

pub(crate) fn encode<T: Real>(
    tape: &mut Tape<'_, T>,
    vars: &ModelVars,
    ids: &[usize],
    rate: f64,
    mut rng: Option<&mut (dyn RngCore + 'static)>,
) -> Result<Encoded> {
    let hidden = tape.dims(vars.enc.u[0]).0;
    let mut h = tape.constant(&Tensor::zeros([1, hidden]));
    let mut states = Vec::with_capacity(ids.len());
    for &id in ids {
        let x = tape.embed_column(vars.emb, id)?;
        let x = tape.dropout(x, rate, rng.as_deref_mut())?;
        h = gru(tape, &vars.enc, x, h)?;
        states.push(h);
    }
    let stack = tape.concat(&states, 0)?;
    Ok(Encoded { stack, last: h })
}

/// Softmax over `stack · h` (dot) or `stack · W_a h` (bilinear), as `1 × n`.
pub(crate) fn attend<T: Real>(
    tape: &mut Tape<'_, T>,
    vars: &ModelVars,
    stack: Var,
    h: Var,
) -> Result<Var> {
    let hidden = tape.dims(h).1;
    let col = tape.reshape(h, hidden, 1)?;
    let query = match vars.w_a {
        Some(w_a) => tape.matmul(w_a, col)?,
        None => col,
    };
    let scores = tape.matmul(stack, query)?;
    let n = tape.dims(scores).0;
    let row = tape.reshape(scores, 1, n)?;
    Ok(tape.softmax(row))
}

pub(crate) struct Step {
    pub hidden: Var,
    pub attention: Var,
    pub context: Var,
    pub log_probs: Var,
}

pub(crate) fn decode_step<T: Real>(
    tape: &mut Tape<'_, T>,
    vars: &ModelVars,
    prev_id: usize,
    h_prev: Var,
    stack: Var,
    rate: f64,
    mut rng: Option<&mut (dyn RngCore + 'static)>,
) -> Result<Step> {
    let x = tape.embed_column(vars.emb, prev_id)?;
    let x = tape.dropout(x, rate, rng.as_deref_mut())?;
    let hidden = gru(tape, &vars.dec, x, h_prev)?;
    let attention = attend(tape, vars, stack, hidden)?;
    let context = tape.matmul(attention, stack)?;
    let joined = tape.concat(&[context, hidden], 1)?;
    let joined = tape.dropout(joined, rate, rng)?;
    let width = tape.dims(joined).1;
    let col = tape.reshape(joined, width, 1)?;
    let proj = tape.matmul(vars.w_c, col)?;
    let proj = tape.tanh(proj);
    let logits = tape.matmul(vars.w_s, proj)?;
    let v = tape.dims(logits).0;
    let row = tape.reshape(logits, 1, v)?;
    let log_probs = tape.log_softmax(row);
    Ok(Step {
        hidden,
        attention,
        context,
        log_probs,
    })
}

/// `-sum_j log p(y_j | y_<j, x)` with gold inputs. `tgt` starts with `<s>`;
/// every later id is a prediction target.
pub(crate) fn sequence_loss<T: Real>(
    tape: &mut Tape<'_, T>,
    vars: &ModelVars,
    src: &[usize],
    tgt: &[usize],
    rate: f64,
    mut rng: Option<&mut (dyn RngCore + 'static)>,
) -> Result<Var> {
    let enc = encode(tape, vars, src, rate, rng.as_deref_mut())?;
    let mut h = enc.last;
    let mut picks = Vec::with_capacity(tgt.len() - 1);
    for w in tgt.windows(2) {
        let step = decode_step(tape, vars, w[0], h, enc.stack, rate, rng.as_deref_mut())?;
        picks.push(tape.pick(step.log_probs, w[1])?);
        h = step.hidden;
    }
    let total = tape.sum_many(&picks)?;
    Ok(tape.neg(total))
}
