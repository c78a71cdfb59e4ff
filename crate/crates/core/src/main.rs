fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SYNKBQA_LOG", "warn")).init();
    std::process::exit(synkbqa::cli::run(std::env::args_os().collect()));
}
