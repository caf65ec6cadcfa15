fn main() {
    std::process::exit(influnet::cli::main_with_args(std::env::args_os()));
}
