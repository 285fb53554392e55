//! Re-records the transcript of each fixture directory given on the command
//! line from its scripted reply files.

use std::path::Path;
use std::process::ExitCode;

use delf_core::prompt::TemplateSet;
use delf_core::replay::record_fixture;
use delf_core::session::SessionSettings;

fn main() -> ExitCode {
    let dirs: Vec<String> = std::env::args().skip(1).collect();
    if dirs.is_empty() {
        eprintln!("usage: record_fixture <fixture-dir>...");
        return ExitCode::from(2);
    }
    let templates = TemplateSet::bundled();
    let settings = SessionSettings::default();
    for dir in dirs {
        match record_fixture(Path::new(&dir), &templates, &settings) {
            Ok(state) => println!(
                "{dir}: {} exchanges, phase {}, trials {}",
                state.replies_received(),
                state.phase,
                state.trial_counter
            ),
            Err(e) => {
                eprintln!("{dir}: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    ExitCode::SUCCESS
}
