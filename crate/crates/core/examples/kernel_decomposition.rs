//! Splits a few univariate kernels into `k = k0 + k1` and prints one slice
//! of each, along with how well `k0` integrates to zero.

use zanova::{decompose, Measure, Result, UnivariateKernel};

fn main() -> Result<()> {
    let rule = Measure::uniform(0.0, 1.0)?.rule(200)?;
    let kernels = [
        UnivariateKernel::brownian(),
        UnivariateKernel::shifted_brownian(),
        UnivariateKernel::matern32(0.5)?,
        UnivariateKernel::gaussian(0.3)?,
    ];
    let y = 0.7;
    for base in kernels {
        let zk = decompose(base, rule.clone())?;
        println!("{} (D = {:.5})", zk.base().name(), zk.denom());
        println!("  {:>5} {:>9} {:>9} {:>9}", "x", "k", "k0", "k1");
        for i in 0..=5 {
            let x = i as f64 / 5.0;
            let k = zk.base().eval(x, y)?;
            println!("  {x:5.2} {k:9.5} {:9.5} {:9.5}", zk.eval_k0(x, y), zk.eval_k1(x, y));
        }
        let worst = (0..=20)
            .map(|i| zk.centering_residual(i as f64 / 20.0).abs())
            .fold(0.0, f64::max);
        println!("  max |∫ k0(x, y) dy| over a grid of x: {worst:.2e}\n");
    }
    Ok(())
}
