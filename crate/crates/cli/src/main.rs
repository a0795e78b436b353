fn main() {
    std::process::exit(bvd_cli::run(std::env::args_os()));
}
