#![no_main]

use std::sync::OnceLock;

use diagsing::ScatteringModel;
use diagsing_cli::config::{ModelSpec, ObservableSpec, StateSpec};
use libfuzzer_sys::fuzz_target;

fn model() -> &'static ScatteringModel {
    static M: OnceLock<ScatteringModel> = OnceLock::new();
    M.get_or_init(|| ModelSpec { n: 8, ..ModelSpec::default() }.build().unwrap())
}

// Inline state and observable specs, decoded on an 8-node grid. Decoding
// may refuse but never panics, and an accepted state is a valid state.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = serde_json::from_str::<StateSpec>(text) {
        if let Ok(rho) = spec.decode(model().grid()) {
            rho.validate().expect("decoded state is valid");
        }
    }
    if let Ok(spec) = serde_json::from_str::<ObservableSpec>(text) {
        let _ = spec.decode(model());
    }
});
