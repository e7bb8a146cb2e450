fn main() {
    std::process::exit(equichrom::cli::run(std::env::args_os()));
}
