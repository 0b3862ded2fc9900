fn main() {
    std::process::exit(codeprobe::cli::dispatch(std::env::args_os()));
}
