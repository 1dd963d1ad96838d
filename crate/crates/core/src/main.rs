fn main() {
    std::process::exit(quadcurl::cli::main_with_args(std::env::args_os()));
}
