use clap::Parser;
use spinmesh_cli::{configure_threads, run, Cli, EXIT_USAGE, THREADS_ENV};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let threads = std::env::var(THREADS_ENV).ok();
    let code = configure_threads(threads.as_deref()).and_then(|()| run(cli)).unwrap_or_else(|e| {
        eprintln!("spinmesh: {e}");
        e.exit_code()
    });
    std::process::exit(code);
}
