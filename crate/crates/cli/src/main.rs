fn main() {
    std::process::exit(evireg_cli::run(std::env::args_os()));
}
