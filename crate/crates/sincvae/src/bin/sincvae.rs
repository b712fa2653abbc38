fn main() {
    std::process::exit(sincvae::cli::main());
}
