fn main() -> std::process::ExitCode {
    crsn::cli::run_command(std::env::args_os())
}
