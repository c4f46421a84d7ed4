fn main() -> std::process::ExitCode {
    rdsm::cli::main()
}
