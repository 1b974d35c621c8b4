//! Backpropagation against central finite differences.

mod common;

#[test]
fn dense_net_gradients_match_finite_differences() {
    if let Err(e) = common::check_dense_nets(11, 25) {
        panic!("{e}");
    }
}

#[test]
fn joint_loss_gradients_match_finite_differences() {
    if let Err(e) = common::check_mf_members(5, 8) {
        panic!("{e}");
    }
}
