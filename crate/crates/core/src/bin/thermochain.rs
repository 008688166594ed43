fn main() {
    std::process::exit(thermochain::cli::run(std::env::args_os()));
}
