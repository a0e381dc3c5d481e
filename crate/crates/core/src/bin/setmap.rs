fn main() {
    std::process::exit(setmap::cli::run_from_args(std::env::args_os()));
}
