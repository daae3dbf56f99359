fn main() {
    std::process::exit(countmap::cli::run(std::env::args_os()));
}
