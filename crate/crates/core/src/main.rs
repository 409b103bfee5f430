fn main() {
    std::process::exit(hcbreak::cli::main());
}
