fn main() -> std::process::ExitCode {
    bandap::cli::cli_main(std::env::args_os())
}
