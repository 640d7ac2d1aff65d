fn main() {
    std::process::exit(netident::cli::main_entry());
}
