fn main() {
    std::process::exit(dgff_cli::app::main_with(std::env::args_os()));
}
