#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(law) = erwlab::cli::parse_step_spec(text) {
        // Accepted laws are normalized: finite nonnegative variance and
        // strictly positive, finite draws.
        let sigma2 = law.sigma2();
        assert!(sigma2.is_finite() && sigma2 >= 0.0);
        let mut rng = erwlab::rng::Stream::new(1);
        for _ in 0..16 {
            let z = law.sample(&mut rng);
            assert!(z.is_finite() && z > 0.0, "bad draw {z} from {law:?}");
        }
    }
});
