//! Reverse-mode gradients from the tape versus the closed form for a
//! softmax classifier: d(-log p_y)/dW = x^T (p - e_y).
//!
//! cargo run --example autodiff_tape

use fcrg::tensor::{ParamStore, Partition, Tape, Tensor};

fn main() -> anyhow::Result<()> {
    let x = Tensor::row(vec![0.5, -1.0, 2.0]);
    let w = Tensor::new(
        [3, 4],
        (0..12).map(|i| ((i * 7 % 5) as f64 - 2.0) / 4.0).collect(),
    )?;
    let y = 2;
    let mut store = ParamStore::new();
    store.insert("w", Partition::Shared, w.clone())?;

    let mut tape = Tape::new(&store);
    let xv = tape.constant(&x);
    let wv = tape.param("w")?;
    let logits = tape.matmul(xv, wv)?;
    let logp = tape.log_softmax(logits);
    let picked = tape.pick(logp, y)?;
    let loss = tape.neg(picked);
    println!("loss {:.6}", tape.scalar(loss));
    let grads = tape.backward(loss)?;
    store.accumulate(&grads)?;
    let tape_grad = store.get("w")?.grad.clone();

    let z: Vec<f64> = (0..4)
        .map(|j| (0..3).map(|i| x.data()[i] * w.data()[i * 4 + j]).sum())
        .collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = z.iter().map(|v| (v - m).exp()).sum();
    let mut worst = 0.0f64;
    for i in 0..3 {
        let row: Vec<String> = (0..4)
            .map(|j| {
                let p = (z[j] - m).exp() / total;
                let closed = x.data()[i] * (p - f64::from(u8::from(j == y)));
                let taped = tape_grad.data()[i * 4 + j];
                worst = worst.max((closed - taped).abs());
                format!("{taped:+.5}")
            })
            .collect();
        println!("dW[{i}] {}", row.join(" "));
    }
    println!("max difference from the closed form: {worst:.1e}");
    Ok(())
}
