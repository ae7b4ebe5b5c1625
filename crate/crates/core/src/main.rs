fn main() {
    std::process::exit(jcq::cli::main_entry());
}
