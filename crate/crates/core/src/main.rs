fn main() {
    std::process::exit(ergokit::cli::main_with_args(std::env::args_os()));
}
