fn main() -> std::process::ExitCode {
    abase_lite::cli::main()
}
