use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let mut err = io::stderr().lock();
    let status = hivnsfd_cli::run_cli(std::env::args_os(), &mut out, &mut err);
    drop(out);
    ExitCode::from(status as u8)
}
