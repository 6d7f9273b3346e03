fn main() {
    std::process::exit(infraloom_cli::run(std::env::args_os()));
}
