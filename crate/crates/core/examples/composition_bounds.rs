//! Composition of projections onto two lines through the origin.
//! The certified interval is [1/2, 2/3]; the sampled value moves with the angle.

use averagedness::{
    certify, estimate_lower, oy_bound, special_case_bounds, ConvexSet, OperatorExpr, SampleConfig,
    SpecialCase, Vector,
};

fn line_halfspace(deg: f64) -> averagedness::Result<ConvexSet> {
    let t = deg.to_radians();
    ConvexSet::halfspace(Vector::new(vec![t.cos(), t.sin()])?, 0.0)
}

fn main() -> averagedness::Result<()> {
    println!("bound for (1/2, 1/2): {:.6}", oy_bound(&[0.5, 0.5])?.value);
    println!(
        "bound for (1/3, 1/4, 1/5): {:.6}",
        oy_bound(&[1.0 / 3.0, 0.25, 0.2])?.value
    );

    let p0 = OperatorExpr::project(line_halfspace(0.0)?);
    for deg in [30.0, 60.0, 90.0, 120.0] {
        let t = OperatorExpr::compose(&p0, &OperatorExpr::project(line_halfspace(deg)?))?;
        let c = certify(&t);
        let k = estimate_lower(&t, &SampleConfig::default().with_pairs(20_000))?.kappa_lower;
        println!(
            "angle {deg:>5}: certificate [{:.6}, {:.6}], sampled {k:.6}",
            c.lower, c.upper
        );
    }

    let (lo, hi) = special_case_bounds(SpecialCase::ProjectionAfterT, 0.5)?;
    println!("projection after a 1/2-averaged map: [{lo}, {hi:.6}]");
    Ok(())
}
