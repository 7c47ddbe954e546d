fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(dale_forge::cli::LOG_ENV, "warn")).init();
    std::process::exit(dale_forge::cli::run(std::env::args_os()));
}
