//! Closed-form Sobol indices of a kriging surrogate of the 5D g-function,
//! next to the analytic values.

use zanova::subset::Subset;
use zanova::testbed::{g_analytic_index, lhs_maximin, DoeSpec, TestFunction};
use zanova::{decompose, fit, sobol_indices, AnovaKernel, Measure, Result, Selection, UnivariateKernel};

fn main() -> Result<()> {
    let a = vec![0.2, 0.6, 0.8, 100.0, 100.0];
    let g = TestFunction::g_function(a.clone())?;
    let design = lhs_maximin(&DoeSpec::unit_cube(50, 5), 11)?;
    let f = g.eval_design(&design)?;

    let rule = Measure::uniform(0.0, 1.0)?.rule(100)?;
    let zk = decompose(UnivariateKernel::matern32(1.0)?, rule)?;
    let model = fit(AnovaKernel::star(vec![zk; 5], 1.0)?, design, f, 0.0)?;

    let report = sobol_indices(&model, &Selection::up_to_order(2))?;
    println!("{:<8} {:>9} {:>9}", "subset", "fitted", "exact");
    for (s, v) in &report.indices {
        if s.len() == 1 || *s == Subset::from_dims([0, 1]) {
            println!("{:<8} {v:9.4} {:9.4}", s.to_string(), g_analytic_index(*s, &a)?);
        }
    }
    println!("sum over orders 1 and 2: {:.4}", report.sum());
    Ok(())
}
