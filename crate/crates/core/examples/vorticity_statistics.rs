//! Vorticity PDF tails: recovering a known stretched exponential from
//! samples, and the kurtosis and tail fit of a Gaussian field for contrast.
//!
//! ```text
//! cargo run --release --example vorticity_statistics
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use turbogen::diagnostics::{excess_kurtosis, fit_stretched_exponential, vorticity_pdf};
use turbogen::synthetic::stretched_exponential_samples;

fn main() -> turbogen::Result<()> {
    let x = stretched_exponential_samples(14.0, 0.2, 2_000_000, 1);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    let fit = fit_stretched_exponential(&x, 2.0 * rms)?;
    println!(
        "samples of exp(-14 |w|^0.2): fitted c = {:.2}, beta = {:.3}, excess kurtosis {:.1}, {} tail samples",
        fit.c,
        fit.beta,
        excess_kurtosis(&x),
        fit.tail_samples
    );

    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let gaussian: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let pdf = vorticity_pdf(&gaussian, 101)?;
    println!(
        "Gaussian components: omega' = {:.3}, excess kurtosis {:?}, tail beta = {:.2} (2 expected)",
        pdf.omega_prime,
        pdf.excess_kurtosis.iter().map(|k| (k * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        pdf.fit.beta
    );
    Ok(())
}
