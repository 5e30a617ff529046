fn main() {
    std::process::exit(paractl_cli::run_command(std::env::args_os()));
}
