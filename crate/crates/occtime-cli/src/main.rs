fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(occtime_cli::run(&argv));
}
