//! Building and running a small H / Ry / CRy circuit, reading Z expectations,
//! and dumping the gate list as JSON.

use std::f64::consts::PI;

use pqdvqc::qsim::run_circuit;
use pqdvqc::{Circuit, GateOp};

fn main() -> pqdvqc::Result<()> {
    let mut c = Circuit::new(3);
    c.push(GateOp::h(0))
        .push(GateOp::ry(1, PI / 3.0))
        .push(GateOp::cry_param(0, 2, 0))
        .push(GateOp::cry_param(1, 2, 1));
    c.validate()?;
    println!("{}", c.to_json()?);

    let thetas = [PI, PI / 2.0];
    let state = run_circuit(&c, &thetas)?;
    println!("\nbasis  amplitude   (qubit 0 is the rightmost bit)");
    for (i, a) in state.amplitudes().iter().enumerate() {
        println!("|{i:03b}>  {:+.6}", a.re);
    }
    println!("\nnorm^2 = {:.15}", state.norm_sqr());
    for q in 0..3 {
        println!("<Z_{q}> = {:+.6}", state.expect_z(q)?);
    }
    // qubit 1 alone: <Z> = cos(pi/3) = 0.5
    Ok(())
}
