//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::process::ExitCode;

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are honoured only crudely: listing prints the names
    if std::env::args().any(|a| a == "--list") {
        for (i, n) in qcrystal::acceptance::NAMES.iter().enumerate() {
            println!("criterion_{:02}: test ({n})", i + 1);
        }
        return ExitCode::SUCCESS;
    }
    println!("running 12 acceptance criteria");
    let results = qcrystal::acceptance::run(&[], &mut |r| println!("{}", r.line()));
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "\nacceptance result: {}. {} passed; {failed} failed",
        if failed == 0 { "ok" } else { "FAILED" },
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
