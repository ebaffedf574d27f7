mod common;

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..20 {
        let worst = common::gradient_check_case(seed);
        assert!(
            worst <= 1e-4,
            "configuration {seed}: relative error {worst:e}"
        );
    }
}

#[test]
fn gradients_hold_on_more_configurations() {
    for seed in 1000..1100 {
        let worst = common::gradient_check_case(seed);
        assert!(
            worst <= 1e-4,
            "configuration {seed}: relative error {worst:e}"
        );
    }
}
