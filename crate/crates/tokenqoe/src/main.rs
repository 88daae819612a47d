fn main() {
    std::process::exit(tokenqoe::cli::run(std::env::args_os()));
}
