fn main() {
    std::process::exit(phasescout::cli::main_with_args(std::env::args_os()));
}
