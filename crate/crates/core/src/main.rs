fn main() {
    std::process::exit(biotlab::cli::run(std::env::args_os()));
}
