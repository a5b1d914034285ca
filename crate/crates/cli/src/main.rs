use clap::Parser;
use trade_topology_cli::{run, Cli, THREADS_ENV};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();

    if let Some(threads) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
        {
            log::warn!("ignoring {THREADS_ENV}: {e}");
        }
    }

    std::process::exit(run(&cli));
}
