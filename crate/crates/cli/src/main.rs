fn main() {
    std::process::exit(spinlab::run(std::env::args_os()));
}
