fn main() {
    std::process::exit(sploc_cli::run(std::env::args_os()));
}
