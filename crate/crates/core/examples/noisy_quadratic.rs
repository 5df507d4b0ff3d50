//! Effect of the nugget on Sobol indices of a noisy 2D quadratic under the
//! standard normal measure.

use zanova::subset::Subset;
use zanova::testbed::{add_noise, derive_seed, lhs_maximin, quadratic_analytic_index, DoeSpec, TestFunction};
use zanova::{decompose, fit, sobol_indices, AnovaKernel, Measure, Result, Selection, UnivariateKernel};

fn main() -> Result<()> {
    let spec = DoeSpec::new(20, vec![(-5.0, 5.0); 2]).with_restarts(20);
    let rule = Measure::standard_normal().rule(100)?;
    let zk = decompose(UnivariateKernel::gaussian(10.0)?, rule)?;
    let kernel = AnovaKernel::star(vec![zk; 2], 200.0)?;
    let subsets = [Subset::from_dims([0]), Subset::from_dims([1]), Subset::from_dims([0, 1])];

    print!("{:>6}", "lambda");
    for s in subsets {
        print!(" {:>9}", s.to_string());
    }
    println!();
    print!("{:>6}", "exact");
    for s in subsets {
        print!(" {:9.4}", quadratic_analytic_index(s)?);
    }
    println!();

    let replicates = 10;
    for lambda in [0.0, 1.0, 4.0, 16.0] {
        let mut mean = [0.0; 3];
        for r in 0..replicates {
            let design = lhs_maximin(&spec, derive_seed(7, 2 * r))?;
            let clean = TestFunction::Quadratic.eval_design(&design)?;
            let f = add_noise(&clean, lambda, derive_seed(7, 2 * r + 1))?;
            let model = fit(kernel.clone(), design, f, lambda)?;
            let report = sobol_indices(&model, &Selection::only(subsets.to_vec()))?;
            for (m, s) in mean.iter_mut().zip(subsets) {
                *m += report.indices[&s] / replicates as f64;
            }
        }
        println!("{lambda:6} {:9.4} {:9.4} {:9.4}", mean[0], mean[1], mean[2]);
    }
    Ok(())
}
