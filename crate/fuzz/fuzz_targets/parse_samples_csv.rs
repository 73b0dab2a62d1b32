#![no_main]

use eqpart::io::parse_samples_csv;
use eqpart::{build_equiprobable, default_cycle_order, entropy_naive};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&flags, body)) = data.split_first() else {
        return;
    };
    let Ok(samples) = parse_samples_csv(body, flags & 1 == 1) else {
        return;
    };
    assert!(samples.len() >= 2);
    assert!(samples.as_slice().iter().all(|x| x.is_finite()));
    if samples.len() > 4096 || samples.dims() > 3 {
        return;
    }

    // whatever parses must go through the estimators without panicking
    let depth = 1 + usize::from(flags >> 1 & 1);
    if let Ok(p) = build_equiprobable(&samples, depth, &default_cycle_order(samples.dims())) {
        assert_eq!(p.counts().iter().sum::<usize>(), samples.len());
    }
    let _ = entropy_naive(&samples, 2);
});
