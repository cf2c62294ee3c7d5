fn main() {
    std::process::exit(bytefuse::cli::dispatch(std::env::args_os()));
}
