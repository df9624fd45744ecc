fn main() {
    std::process::exit(tseng_qvi::cli::run(std::env::args_os()));
}
