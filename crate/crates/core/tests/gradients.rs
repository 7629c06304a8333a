mod support;

use support::{check_grad_c, check_grad_q, check_grad_x, check_jacobian_theta, GradStats};

const TOL: f64 = 1e-4;

fn assert_suite(name: &str, s: GradStats, want: usize) {
    println!("{name}: {} checked, {} discarded, worst relative error {:.2e}", s.checked, s.discarded, s.worst_rel);
    assert_eq!(s.checked, want, "{name}: not enough segment-stable instances");
    assert!(s.worst_rel <= TOL, "{name}: worst relative error {}", s.worst_rel);
}

#[test]
fn surrogate_gradient_in_x() {
    assert_suite("df/dx", check_grad_x(11, 100), 100);
}

#[test]
fn decision_jacobian_in_theta() {
    assert_suite("dx/dtheta", check_jacobian_theta(12, 100), 100);
}

#[test]
fn quadratic_term_gradient() {
    assert_suite("d/dQ", check_grad_q(13, 100), 100);
}

#[test]
fn soft_matrix_gradient() {
    assert_suite("d/dC", check_grad_c(14, 100), 100);
}
