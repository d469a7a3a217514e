fn main() {
    std::process::exit(quatfield::cli::main_entry());
}
