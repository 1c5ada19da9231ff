fn main() -> std::process::ExitCode {
    adaptive_hri::cli::main()
}
