#![no_main]

use hetmix::belief::parse_district_shares;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_district_shares(data);
});
