fn main() {
    std::process::exit(chunkio::cli::main_with_env());
}
