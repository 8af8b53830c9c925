fn main() {
    std::process::exit(prsa::cli::run(std::env::args_os()));
}
