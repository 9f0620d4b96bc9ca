fn main() {
    std::process::exit(bec_lab::cli::main_from_args(std::env::args_os()));
}
