#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = erwlab::cli::parse_coeffs_csv(text) {
        let written = erwlab::cli::write_coeffs_csv(&rows);
        let back = erwlab::cli::parse_coeffs_csv(&written).expect("round trip");
        assert_eq!(rows, back);
    }
});
