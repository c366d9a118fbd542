use hybeam::{CMat, Complex64};

fn main() {
    // Hermitian, eigenvalues 1 and -1: indefinite.
    let m = CMat::from_row_slice(2, 2, &[
        Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0),
    ]);
    println!("chol(indefinite offdiag) is_some = {}", m.clone().cholesky().is_some());

    let m2 = CMat::from_row_slice(2, 2, &[
        Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0),
        Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0),
    ]);
    // eigenvalues 3 and -1
    match m2.clone().cholesky() {
        Some(c) => {
            println!("chol(eig 3,-1) SUCCEEDED, L = {:?}", c.l().as_slice());
            let mut ld = 0.0;
            for i in 0..2 { ld += c.l()[(i,i)].re.log2(); }
            println!("bogus log2det/2 = {ld}");
        }
        None => println!("chol(eig 3,-1) correctly failed"),
    }
    // diag negative
    let m3 = CMat::from_row_slice(1, 1, &[Complex64::new(-4.0, 0.0)]);
    match m3.clone().cholesky() {
        Some(c) => println!("chol(-4) SUCCEEDED, L = {:?}", c.l().as_slice()),
        None => println!("chol(-4) correctly failed"),
    }
}
