//! Second and third invariants of the velocity gradient tensor for a solid
//! rotation, a plane strain and a random flow.
//!
//! ```text
//! cargo run --release --example qr_invariants
//! ```

use turbogen::diagnostics::{qr_invariants, vieillefosse_curve, QrOptions};
use turbogen::synthetic::sample_vector_field;
use turbogen::GridSpec;

fn main() -> turbogen::Result<()> {
    let g = GridSpec::cube(3, 6)?;
    let opts = QrOptions::default();

    let rotation = sample_vector_field(&g, |x| [-x[1].sin(), x[0].sin(), 0.0]);
    let (inv, _) = qr_invariants(&rotation, &g, &opts)?;
    println!("rotation at the origin: Q = {:.9}, R = {:.1e}", inv.q[0], inv.r[0]);

    let strain = sample_vector_field(&g, |x| [x[0].sin(), -x[1].sin(), 0.0]);
    let (inv, _) = qr_invariants(&strain, &g, &opts)?;
    println!("strain at the origin:   Q = {:.9}, R = {:.1e}", inv.q[0], inv.r[0]);

    let mixed = sample_vector_field(&g, |x| {
        [
            (x[1] + 0.3).sin() + 0.5 * (2.0 * x[2]).cos(),
            (x[2] - 1.0).sin() + 0.4 * (3.0 * x[0]).sin(),
            (x[0] + 2.0).cos() * (x[1]).sin(),
        ]
    });
    let (inv, hist) = qr_invariants(&mixed, &g, &opts)?;
    println!(
        "mixed flow: Q_w = {:.4}, skewness of R = {:.3}, {:.1}% of points inside the plotted window",
        inv.q_w,
        inv.skewness_r,
        100.0 * hist.in_range
    );
    println!("zero-discriminant (Vieillefosse) line samples:");
    for (r, q) in vieillefosse_curve(&[-1.0, -0.25, 0.0, 0.25, 1.0]) {
        println!("  R = {r:+.2}: Q = {q:+.4}");
    }
    Ok(())
}
