fn main() {
    std::process::exit(gnlab_cli::run_command(std::env::args_os()));
}
