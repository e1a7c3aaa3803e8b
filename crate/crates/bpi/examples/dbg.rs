use bpi::functionals::*;
use bpi::mechanisms::Mechanism;
fn main() {
    let f = Functionals::with_default_theta(&Mechanism::logistic(0.5, 1.0, 1.0)).unwrap();
    let q1 = f.limit_at(Functional::Q, Boundary::One);
    println!("kind {:?} value {} err {}", q1.kind, q1.value, q1.error_bound);
    for r in &q1.diagnostics {
        let exact = 0.5 * ((1.0 - r.eps) / 0.5f64).ln() - (1.0 - r.eps - 0.5);
        println!("eps {:9.3e} shell {:+.12} exact {:+.12} diff {:+.3e}", r.eps, r.value, exact, r.value - exact);
    }
    println!("exact Q1 = {}", 0.5 * 2.0f64.ln() - 0.5);
}
