#![no_main]

use libfuzzer_sys::fuzz_target;

// Any config that validates must integrate without panicking. The horizon is
// capped so each input stays cheap.
fuzz_target!(|text: &str| {
    let Ok(cfg) = hetmix_cli::config::parse_config(text) else {
        return;
    };
    let mut ic = cfg.integration;
    ic.dt = ic.dt.max(0.01);
    ic.horizon = ic.horizon.clamp(ic.dt, 5.0);
    ic.record_every = ic.record_every.clamp(ic.dt, ic.horizon);
    if let Ok(traj) = hetmix::simulate(&cfg.params, &ic) {
        let _ = hetmix::summarize(&traj);
    }
});
