fn main() {
    std::process::exit(gmil::cli::run(std::env::args_os()));
}
