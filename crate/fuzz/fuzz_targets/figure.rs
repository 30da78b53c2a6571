#![no_main]

use covert_relay_core::config::Figure;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(fig) = text.parse::<Figure>() {
        assert_eq!(fig.as_str().parse::<Figure>(), Ok(fig));
    }
});
