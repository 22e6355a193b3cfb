fn main() {
    std::process::exit(dynenh_cli::run(std::env::args_os()));
}
