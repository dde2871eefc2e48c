fn main() {
    std::process::exit(dnls::cli::run_command(std::env::args_os()));
}
