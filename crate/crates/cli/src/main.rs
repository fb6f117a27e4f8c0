fn main() {
    std::process::exit(picket_cli::run(std::env::args_os()));
}
