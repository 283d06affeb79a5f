fn main() {
    std::process::exit(vcim::cli_io::run_cli(std::env::args_os()));
}
