fn main() {
    std::process::exit(signkit_cli::run(std::env::args_os()));
}
