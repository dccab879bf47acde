fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
    std::process::exit(tfred_cli::run(&refs));
}
