//! Monte Carlo velocity structure functions against the analytic result
//! for a single mode, plus the K41 and She–Lévêque reference exponents.
//!
//! ```text
//! cargo run --release --example structure_functions
//! ```

use turbogen::diagnostics::{k41_exponent, sl94_exponent, structure_functions, Directions, StructureFunctionOptions};
use turbogen::synthetic::sample_vector_field;
use turbogen::GridSpec;

fn main() -> turbogen::Result<()> {
    let g = GridSpec::cube(3, 6)?;
    let u = sample_vector_field(&g, |x| [x[0].sin(), 0.0, 0.0]);
    let opts = StructureFunctionOptions {
        orders: vec![2],
        samples: 1_000_000,
        separations: 8,
        directions: Directions::Axis(0),
        ..Default::default()
    };
    let sf = structure_functions(&u, &g, &opts)?;
    println!("S_2 of u = (sin x, 0, 0) along x, {} samples per separation:", sf.samples);
    for (j, r) in sf.r.iter().enumerate() {
        let exact = 1.0 - r.cos();
        println!(
            "  r = {r:.4}: {:.5} +- {:.5}  (exact {exact:.5}, {:+.2} SE)",
            sf.values[0][j],
            sf.stderr[0][j],
            (sf.values[0][j] - exact) / sf.stderr[0][j].max(1e-300)
        );
    }
    println!("\n p   K41     SL94");
    for p in 1..=8 {
        println!("{p:>2}   {:.4}  {:.4}", k41_exponent(p as f64), sl94_exponent(p as f64));
    }
    Ok(())
}
