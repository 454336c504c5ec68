#![no_main]

use lasso_tradeoff::io;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = io::read_boundary_csv(data) {
        let text = io::csv_string(&rows).unwrap();
        assert_eq!(io::read_boundary_csv(text.as_bytes()).unwrap().len(), rows.len());
    }
    let _ = io::read_region_csv(data);
    let _ = io::read_asymptotic_csv(data);
    let _ = io::read_simulation_csv(data);
});
