fn main() {
    std::process::exit(aatr::cli::run(std::env::args_os()));
}
