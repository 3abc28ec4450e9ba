#![no_main]

use libfuzzer_sys::fuzz_target;

// Any byte string either parses to a valid config or yields a config error;
// accepted configs must also resolve to a grid.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = diagsing_cli::parse_config(text) {
        cfg.model.grid().expect("validated model has a grid");
        let echoed = serde_json::to_string(&cfg).expect("config serialises");
        assert_eq!(diagsing_cli::parse_config(&echoed).expect("echo parses"), cfg);
    }
});
