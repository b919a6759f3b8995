fn main() {
    std::process::exit(unravel_cli::run_args(std::env::args_os()));
}
