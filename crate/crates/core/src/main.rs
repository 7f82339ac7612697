fn main() {
    std::process::exit(ucbsde::cli::main_with_args(std::env::args_os()));
}
