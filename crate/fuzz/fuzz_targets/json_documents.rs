#![no_main]

use lasso_tradeoff::io::{
    self, AchieveDocument, AsymptoticDocument, BoundaryDocument, ContainmentDocument,
    RegionDocument, SimulationDocument, TransitionDocument,
};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = io::parse_document::<BoundaryDocument>(text);
    let _ = io::parse_document::<RegionDocument>(text);
    let _ = io::parse_document::<TransitionDocument>(text);
    let _ = io::parse_document::<AsymptoticDocument>(text);
    let _ = io::parse_document::<SimulationDocument>(text);
    let _ = io::parse_document::<ContainmentDocument>(text);
    let _ = io::parse_document::<AchieveDocument>(text);
});
