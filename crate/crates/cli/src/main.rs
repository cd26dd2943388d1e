fn main() {
    std::process::exit(bhecho_cli::main_with_args(std::env::args_os()));
}
