#![no_main]

use covert_relay_core::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = parse_config(text) {
        for (_, params, sim) in cfg.points() {
            assert!(params.validate().is_ok());
            assert!(sim.validate().is_ok());
        }
    }
});
