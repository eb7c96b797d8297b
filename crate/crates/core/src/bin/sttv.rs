fn main() {
    std::process::exit(sttv::cli::main_with_args(std::env::args_os()));
}
