fn main() {
    std::process::exit(trajuq_cli::run(std::env::args_os()));
}
