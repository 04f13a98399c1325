#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = erwlab::cli::parse_moments_csv(text) {
        let written = erwlab::cli::write_moments_csv(&rows);
        let back = erwlab::cli::parse_moments_csv(&written).expect("round trip");
        assert_eq!(rows, back);
    }
});
