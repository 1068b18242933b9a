//! Finite-difference check of every parameter for both attention variants.
//!
//! cargo run --release --example gradient_check

use fcrg::model::{random_pairs, AttentionKind, Fcrg, ModelConfig};
use fcrg::tensor::GradCheckConfig;

fn main() -> anyhow::Result<()> {
    let cfg = GradCheckConfig::default();
    for kind in [AttentionKind::Dot, AttentionKind::Bilinear] {
        let mc = ModelConfig::tiny(kind);
        let pairs = random_pairs(&mc, 3, 7);
        let mut model = Fcrg::<f64>::new(mc)?;
        let report = model.check_gradients(&pairs, &cfg)?;
        println!("{kind} attention:");
        for p in &report.params {
            println!(
                "  {:12} {:4} coords  max rel {:.2e}  max abs {:.2e}  {}",
                p.name,
                p.coords_checked,
                p.max_rel_error,
                p.max_abs_error,
                if p.passed { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(())
}
