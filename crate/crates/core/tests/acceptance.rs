//! The twelve acceptance checks. Prints one line per check and exits
//! nonzero if any gated check fails; check 12 is a diagnostic and only
//! reports.

use anharmonic::verify::{criterion_ids, run_criterion};

fn main() {
    let mut failed = Vec::new();
    for id in criterion_ids() {
        match run_criterion(id) {
            Ok(outcome) => {
                println!("{}", outcome.line());
                if !outcome.acceptable() {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("[FAIL] {id:>2} error: {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all gated checks passed");
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}
