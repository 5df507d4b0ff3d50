//! The three kernel modes on the same data: only the star mode yields
//! centered, mutually orthogonal terms.

use zanova::diagnostics::term_moments;
use zanova::subset::Subset;
use zanova::testbed::{lhs_maximin, DoeSpec, TestFunction};
use zanova::{decompose, fit, AnovaKernel, Measure, Result, UnivariateKernel};

fn main() -> Result<()> {
    let design = lhs_maximin(&DoeSpec::unit_cube(20, 2), 2)?;
    let f = TestFunction::g_function(vec![1.0, 2.0])?.eval_design(&design)?;
    let rule = Measure::uniform(0.0, 1.0)?.rule(100)?;
    let base = UnivariateKernel::matern32(1.0)?;
    let rules = vec![rule.clone(); 2];
    let subsets: Vec<Subset> = Subset::all(2).skip(1).collect();

    let star = AnovaKernel::star(vec![decompose(base.clone(), rule)?; 2], 1.0)?;
    let standard = AnovaKernel::standard(vec![base.clone(); 2], 1.0)?;
    let tensor = AnovaKernel::tensor(vec![base; 2], 1.0)?;

    for (name, kernel) in [("star", star), ("standard", standard), ("tensor", tensor)] {
        let model = fit(kernel, design.clone(), f.clone(), 0.0)?;
        print!("{name:9} prediction at (0.3, 0.6): {:8.4}", model.predict(&[0.3, 0.6])?);
        match term_moments(&model, &rules, &subsets) {
            Ok(m) => println!(
                "  max |term mean| {:.2e}  max |inner product| {:.2e}",
                m.max_abs_mean(),
                m.max_abs_inner()
            ),
            Err(e) => println!("  ({e})"),
        }
    }
    Ok(())
}
