fn main() {
    std::process::exit(ekman_core::cli::main_entry());
}
