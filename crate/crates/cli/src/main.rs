fn main() {
    std::process::exit(ragkit_cli::run(std::env::args_os()));
}
