fn main() {
    std::process::exit(lsi::cli::main_with_args(std::env::args_os()));
}
