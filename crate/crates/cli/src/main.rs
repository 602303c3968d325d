fn main() {
    std::process::exit(statespace_cli::run(std::env::args_os()));
}
