#![no_main]

use hetmix::belief::GroupBeliefTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = GroupBeliefTable::from_csv(data) {
        let _ = table.wave_starts();
    }
});
