fn main() {
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(tracing::Level::INFO).init();
    std::process::exit(canvas_service::cli::main_with_args(std::env::args_os()));
}
