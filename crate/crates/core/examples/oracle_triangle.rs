//! Three routes to the same spectral observable: the truncated convolution,
//! the expectation of a sparse measurement operator, and pointwise products
//! in physical space. Also shows the Hermitian split of the operator.
//!
//! ```text
//! cargo run --release --example oracle_triangle
//! ```

use turbogen::madelung::{
    all_kernels, build_measurement_operator, convolve_observable_direct, hermitian_split, observable_spectrum,
    KernelKind,
};
use turbogen::synthetic::random_band_limited_spinor;
use turbogen::{GridSpec, SpinConvention};

fn main() -> turbogen::Result<()> {
    let grid = GridSpec::new(&[2, 2, 2])?;
    let spinor = random_band_limited_spinor(&grid, 7);
    let conv = SpinConvention::Kernel;
    let probe = grid.flat_of_wavenumbers(&[1, 0, -1])?;
    let k = grid.wavenumbers(probe);

    for kind in all_kernels(&grid) {
        let direct = convolve_observable_direct(&spinor, kind, &k, conv)?;
        let fft = observable_spectrum(&spinor, kind, conv)?[probe];
        print!("{:<10} k = {k:?}: direct {direct:.6}  fft {fft:.6}", kind.label());
        if matches!(kind, KernelKind::Density | KernelKind::Momentum(_)) {
            let op = build_measurement_operator(kind, &grid.multi_index(probe), &grid)?;
            print!("  operator {:.6} ({} nonzeros)", op.expectation(&spinor)?, op.operator().nnz());
        }
        println!();
    }

    let op = build_measurement_operator(KernelKind::Momentum(0), &grid.multi_index(probe), &grid)?;
    let (h1, h2) = hermitian_split(op.operator());
    let q = op.expectation(&spinor)?;
    let (a, b) = (
        h1.expectation(spinor.psi_plus())? + h1.expectation(spinor.psi_minus())?,
        h2.expectation(spinor.psi_plus())? + h2.expectation(spinor.psi_minus())?,
    );
    println!(
        "\nHermitian split: <H1> = {:.6}, <H2> = {:.6} (both real: {}), <H1> + i<H2> - <Q> = {:.1e}",
        a.re,
        b.re,
        h1.is_hermitian(1e-14) && h2.is_hermitian(1e-14),
        (a + num_complex::Complex64::i() * b - q).norm()
    );
    Ok(())
}
