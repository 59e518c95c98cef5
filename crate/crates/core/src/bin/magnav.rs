fn main() {
    std::process::exit(magnav::harness::cli_main(std::env::args_os()));
}
