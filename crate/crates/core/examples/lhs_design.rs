//! Maximin Latin hypercube designs: restarts against separation, and a CSV
//! round trip.

use zanova::testbed::{design_from_csv, design_to_csv, lhs_maximin, min_pairwise_distance, DoeSpec};
use zanova::Result;

fn main() -> Result<()> {
    for restarts in [1, 10, 100, 1000] {
        let design = lhs_maximin(&DoeSpec::unit_cube(20, 2).with_restarts(restarts), 42)?;
        println!("restarts {restarts:5}: min distance {:.4}", min_pairwise_distance(&design));
    }

    let spec = DoeSpec::new(6, vec![(-1.0, 1.0), (0.0, 10.0)]);
    let design = lhs_maximin(&spec, 1)?;
    let csv = design_to_csv(&design, None);
    print!("\n{csv}");
    let (back, f) = design_from_csv(&csv)?;
    assert!(f.is_none());
    assert_eq!(back, design);
    Ok(())
}
