fn main() -> std::process::ExitCode {
    nsp::cli::main_entry()
}
