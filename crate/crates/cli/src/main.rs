fn main() {
    std::process::exit(gazeperc_cli::main_with(std::env::args_os()));
}
