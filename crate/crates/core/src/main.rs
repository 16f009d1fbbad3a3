fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = sparse_ggp::cli::configure_threads() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    std::process::exit(sparse_ggp::cli::run(std::env::args_os()));
}
