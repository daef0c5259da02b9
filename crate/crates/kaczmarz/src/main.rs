fn main() {
    std::process::exit(kaczmarz::cli::main_with_args(std::env::args_os()));
}
