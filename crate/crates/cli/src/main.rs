fn main() {
    std::process::exit(qvs_cli::main_with_args(std::env::args_os()));
}
