//! The prox of -alpha ln t on the real line: values, and the modulus from the derivative.

use averagedness::{
    certify, derivative_modulus_1d, estimate_lower, Grid, OperatorExpr, SampleConfig, Vector,
};

fn main() -> averagedness::Result<()> {
    let g = OperatorExpr::prox_neg_log(1.0)?;
    for y in [-1e6, -10.0, -1.0, 0.0, 1.0, 10.0] {
        let x = g.apply(&Vector::new(vec![y])?)?[0];
        println!("prox({y:>10}) = {x:.12e}");
    }

    let grid = Grid {
        lo: -1000.0,
        hi: 1000.0,
        n_points: 20_001,
    };
    println!(
        "derivative modulus  {:.7}",
        derivative_modulus_1d(&g, &grid)?
    );
    println!(
        "sampled modulus     {:.7}",
        estimate_lower(&g, &SampleConfig::default().with_radius(1000.0))?.kappa_lower
    );
    println!("certificate         {:?}", certify(&g).exact_value());
    Ok(())
}
