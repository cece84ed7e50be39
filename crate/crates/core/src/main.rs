fn main() {
    std::process::exit(ivpoq::cli::main_with_args(std::env::args_os()));
}
