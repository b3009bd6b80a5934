fn main() {
    std::process::exit(esai_cli::run(std::env::args_os()));
}
