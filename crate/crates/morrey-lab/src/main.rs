fn main() {
    eprintln!("cli under construction");
    std::process::exit(2);
}
