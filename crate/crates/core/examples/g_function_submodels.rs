//! Fits a star-ANOVA kriging model to the 2D g-function and compares each
//! fitted ANOVA term with the exact one at a few points.

use zanova::subset::Subset;
use zanova::testbed::{lhs_maximin, DoeSpec, TestFunction};
use zanova::{decompose, fit, AnovaKernel, Measure, Result, UnivariateKernel};

fn exact_term(s: Subset, a: &[f64], x: &[f64]) -> f64 {
    s.dims()
        .map(|i| ((4.0 * x[i] - 2.0).abs() - 1.0) / (1.0 + a[i]))
        .product()
}

fn main() -> Result<()> {
    let a = vec![1.0, 2.0];
    let g = TestFunction::g_function(a.clone())?;
    let design = lhs_maximin(&DoeSpec::unit_cube(20, 2), 2)?;
    let f = g.eval_design(&design)?;

    let rule = Measure::uniform(0.0, 1.0)?.rule(100)?;
    let zk = decompose(UnivariateKernel::matern32(1.0)?, rule)?;
    let model = fit(AnovaKernel::star(vec![zk; 2], 1.0)?, design, f, 0.0)?;
    println!("constant term m0 = {:.4} (exact 1)", model.constant_term());

    for s in Subset::all(2).skip(1) {
        println!("term {s}");
        for x in [[0.1, 0.8], [0.5, 0.5], [0.9, 0.3]] {
            println!(
                "  x = ({:.1}, {:.1})  fitted {:8.4}  exact {:8.4}",
                x[0],
                x[1],
                model.predict_submodel(s, &x)?,
                exact_term(s, &a, &x)
            );
        }
    }
    Ok(())
}
