fn main() {
    std::process::exit(opchaos_cli::run(std::env::args_os()));
}
