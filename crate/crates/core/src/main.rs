fn main() {
    std::process::exit(facetrack::cli::run_cli(std::env::args_os()));
}
