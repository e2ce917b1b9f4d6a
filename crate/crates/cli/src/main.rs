fn main() {
    std::process::exit(hetmix_cli::dispatch(std::env::args_os()));
}
