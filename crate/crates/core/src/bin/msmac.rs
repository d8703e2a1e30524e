fn main() {
    std::process::exit(msmac::cli::main_with_args(std::env::args_os()));
}
