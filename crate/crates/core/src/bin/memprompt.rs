fn main() {
    std::process::exit(memprompt::cli::run(std::env::args_os()));
}
