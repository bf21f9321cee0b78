fn main() -> std::process::ExitCode {
    mflab_core::cli::main()
}
