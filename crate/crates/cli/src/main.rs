fn main() {
    std::process::exit(kinmo_cli::run(std::env::args_os()));
}
