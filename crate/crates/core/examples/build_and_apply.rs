//! Build an operator expression, evaluate it, and print its JSON form.

use averagedness::{ConvexSet, OperatorExpr, Vector};

fn main() -> averagedness::Result<()> {
    let ball = ConvexSet::ball(Vector::zeros(2), 1.0)?;
    let strip = ConvexSet::halfspace(Vector::new(vec![0.0, 1.0])?, 0.5)?;

    // project onto the strip, then half-relax toward the ball
    let t = OperatorExpr::compose(
        &OperatorExpr::relax(&OperatorExpr::project(ball), 0.5)?,
        &OperatorExpr::project(strip),
    )?;

    for p in [[3.0, 4.0], [0.2, -0.1], [-2.0, 2.0]] {
        let x = Vector::new(p.to_vec())?;
        println!("T{:?} = {:?}", x.as_slice(), t.apply(&x)?.as_slice());
    }
    println!("{}", t.to_json());
    Ok(())
}
