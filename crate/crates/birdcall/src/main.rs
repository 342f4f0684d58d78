fn main() {
    std::process::exit(birdcall::cli::main_with_args(std::env::args_os()));
}
