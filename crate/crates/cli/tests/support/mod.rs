//! Shared helper for CLI integration tests: spawn the built binary and
//! capture its streams and exit code.

use std::process::Command;

pub struct Run {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub fn run(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_shiftsim"))
        .args(args)
        .output()
        .expect("the shiftsim binary spawns");
    Run {
        stdout: String::from_utf8(out.stdout).expect("stdout is UTF-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr is UTF-8"),
        code: out.status.code().expect("the binary exits rather than dying on a signal"),
    }
}
