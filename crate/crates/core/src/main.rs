fn main() {
    std::process::exit(newsfame::cli::main_entry());
}
