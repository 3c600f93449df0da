use cellflow::cli::{self, Cli};
use clap::Parser;

fn main() {
    // Optional cap on worker threads.
    if let Ok(s) = std::env::var("CELLFLOW_THREADS") {
        if let Ok(n) = s.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("warning: ignoring unparsable CELLFLOW_THREADS={s:?}");
        }
    }
    let args = Cli::parse();
    if let Err(e) = cli::run(&args) {
        eprintln!("error: {e}");
        std::process::exit(cli::exit_code(&e));
    }
}
