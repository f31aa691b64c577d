fn main() -> std::process::ExitCode {
    dropcompute::cli::main()
}
