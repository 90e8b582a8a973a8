fn main() {
    std::process::exit(qrelent::harness::cli::cli_main(std::env::args_os()));
}
