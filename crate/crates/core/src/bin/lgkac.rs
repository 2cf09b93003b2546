fn main() {
    std::process::exit(lgkac::cli::main_with_args(std::env::args_os()));
}
