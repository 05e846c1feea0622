mod common;

use common::{manufactured_errors, observed_orders};

#[test]
fn p1_newton_converges_at_second_order_in_l2() {
    let sizes = [8, 16, 32, 64];
    let errors = manufactured_errors(&sizes, 1e-3, 2);
    let orders = observed_orders(&errors);
    println!("errors {errors:?} orders {orders:?}");
    for (k, p) in orders.iter().enumerate() {
        assert!((p - 2.0).abs() < 0.2, "order {p} between {} and {}", sizes[k], sizes[k + 1]);
    }
}
