fn main() {
    std::process::exit(popspace_cli::dispatch(std::env::args_os()));
}
