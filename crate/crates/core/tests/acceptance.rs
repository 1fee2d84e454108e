//! One PASS/FAIL line per acceptance criterion, followed by its details.
//! Set `GKF_ACCEPTANCE=fast` to run only the fast subset.

use gkf_core::validation::{run_criterion, ALL, FAST};

fn main() {
    let ids = match std::env::var("GKF_ACCEPTANCE").as_deref() {
        Ok("fast") => FAST,
        _ => ALL,
    };
    let mut failed = 0;
    for &id in ids {
        let r = run_criterion(id);
        println!("{} criterion {:>2}: {} ({:.1} s)", if r.pass { "PASS" } else { "FAIL" }, r.id, r.title, r.seconds);
        for line in &r.details {
            println!("    {line}");
        }
        failed += usize::from(!r.pass);
    }
    println!("{} of {} criteria passed", ids.len() - failed, ids.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
