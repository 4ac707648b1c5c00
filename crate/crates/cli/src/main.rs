fn main() {
    std::process::exit(limbkin_cli::run(std::env::args_os()));
}
