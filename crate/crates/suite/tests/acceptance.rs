//! Acceptance matrix: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;

fn main() -> ExitCode {
    let m = proxlab::suite::run(None, false);
    print!("{}", m.table());
    if m.criteria.len() != 11 {
        println!("FAIL expected 11 criteria, ran {}", m.criteria.len());
        return ExitCode::FAILURE;
    }
    if m.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
