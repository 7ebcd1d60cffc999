fn main() {
    std::process::exit(bb84cert::cli::run(std::env::args_os()));
}
