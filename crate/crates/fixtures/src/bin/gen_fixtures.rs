//! Writes every bundled fixture set under the given directory:
//! `paper/` (audit bundle), `validation/{us_testbed,aws,combined}/`, and
//! `tables/` (published-table fixtures).

use std::path::PathBuf;
use std::process::ExitCode;

fn main() -> ExitCode {
    let Some(out) = std::env::args().nth(1) else {
        eprintln!("usage: gen-fixtures <out-dir>");
        return ExitCode::from(64);
    };
    let out = PathBuf::from(out);
    let result = locaudit_fixtures::paper::write_bundle(&out.join("paper"))
        .and_then(|_| locaudit_fixtures::validation::write_us_testbed(&out.join("validation/us_testbed")))
        .and_then(|_| locaudit_fixtures::validation::write_aws(&out.join("validation/aws")))
        .and_then(|_| locaudit_fixtures::validation::write_combined(&out.join("validation/combined")))
        .and_then(|_| locaudit_fixtures::stats_tables::write_tables(&out.join("tables")));
    match result {
        Ok(()) => {
            println!("fixtures written under {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
