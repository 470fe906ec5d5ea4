//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use cone_sobolev::selftest::{run_criterion, CRITERIA};

fn main() {
    let seed = 0;
    let mut failed = Vec::new();
    println!("acceptance suite, seed {seed}");
    for &(id, name, budget) in CRITERIA.iter() {
        match run_criterion(id, seed) {
            Ok(r) => {
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                println!("criterion {id:>2} {verdict} {name} ({:.2}s of {budget:.0}s) {}", r.elapsed_s, r.detail);
                if !r.pass {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL {name} error: {e}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", CRITERIA.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
