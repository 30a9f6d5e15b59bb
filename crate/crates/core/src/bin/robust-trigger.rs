fn main() {
    std::process::exit(robust_trigger::cli::main_with_args(std::env::args_os()));
}
