fn main() {
    std::process::exit(hons_cli::run(std::env::args_os()));
}
