fn main() {
    std::process::exit(tinyesc::cli::main(std::env::args_os()));
}
