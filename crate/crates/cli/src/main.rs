fn main() {
    std::process::exit(nvpoly_cli::run(std::env::args_os()));
}
