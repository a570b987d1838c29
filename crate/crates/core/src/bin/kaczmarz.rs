use env_logger::Env;

fn main() {
    env_logger::Builder::from_env(Env::new().filter("KACZMARZ_LOG"))
        .format_timestamp(None)
        .init();
    std::process::exit(kaczmarz::cli::run_from(std::env::args_os()));
}
