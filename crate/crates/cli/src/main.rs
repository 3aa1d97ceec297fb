fn main() {
    std::process::exit(crone_cli::main_with_args(std::env::args_os()));
}
