fn main() {
    std::process::exit(cefbounds_cli::main_with_args(std::env::args_os()));
}
