#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = erwlab::cli::parse_grid(text) {
        // Accepted grids are nonempty and strictly increasing.
        assert!(!grid.is_empty());
        assert!(grid[0] >= 1);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }
});
