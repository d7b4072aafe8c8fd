fn main() {
    std::process::exit(warpmass::cli::run(std::env::args_os()));
}
