#![no_main]

use lasso_tradeoff::io::parse_asymptotic_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_asymptotic_config(text) {
        config.shape().expect("validated shape");
        config.grid.values().expect("validated grid");
    }
});
