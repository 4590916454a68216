fn main() {
    eprintln!("grid-restore CLI: under construction");
    std::process::exit(4);
}
