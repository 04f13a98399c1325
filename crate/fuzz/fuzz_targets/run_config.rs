#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = erwlab::cli::RunConfig::from_json_bytes(data) {
        // Anything accepted must survive a serialize/parse round trip.
        let json = cfg.to_json_string();
        let back = erwlab::cli::RunConfig::from_json_str(&json)
            .expect("re-parse of serialized config");
        assert_eq!(cfg, back);
    }
});
