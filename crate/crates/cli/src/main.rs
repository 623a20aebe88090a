fn main() {
    std::process::exit(f0lab_cli::run(std::env::args_os()));
}
