fn main() {
    std::process::exit(regwatch_core::cli::run(std::env::args_os()));
}
