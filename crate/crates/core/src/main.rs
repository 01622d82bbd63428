fn main() {
    std::process::exit(sdrkit::cli::run(std::env::args_os()));
}
