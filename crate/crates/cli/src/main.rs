fn main() {
    std::process::exit(spiro_cli::run(std::env::args_os()));
}
