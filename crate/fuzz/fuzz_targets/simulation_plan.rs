#![no_main]

use lasso_tradeoff::io::parse_simulation_plan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(plan) = parse_simulation_plan(text) {
        for config in plan.configs() {
            config.validate().expect("parsed plans validate");
            let _ = config.prior_star();
        }
    }
});
