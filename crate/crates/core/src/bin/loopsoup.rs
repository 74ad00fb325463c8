fn main() {
    std::process::exit(loopsoup::cli::main_with_args(std::env::args_os()));
}
