fn main() -> std::process::ExitCode {
    oocgemm::cli::main()
}
